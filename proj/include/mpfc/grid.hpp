#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

namespace mpfc {

using cplx = std::complex<double>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Periodic Fourier grid on the unit cube (0,1)^dim, dim in {1,2,3}.
///
/// Real fields live on n^dim equispaced samples; spectra use the
/// real-to-complex layout (last axis halved). Coefficients are stored
/// normalized so that the k=0 entry equals the spatial mean and
/// Parseval reads ||u||^2 = sum_k weight_k |u_k|^2.
class Grid {
  public:
    Grid(int dim, int n, double padding_factor = 2.0)
        : dim_(dim), n_(n), padding_(padding_factor) {
        if (dim < 1 || dim > 3) throw Error("Grid: dim must be 1, 2 or 3");
        if (n < 4 || n % 2 != 0) throw Error("Grid: modes per dim must be even and >= 4");
        if (padding_factor < 1.0) throw Error("Grid: padding_factor must be >= 1");
        npoints_ = 1;
        for (int d = 0; d < dim; ++d) npoints_ *= static_cast<std::size_t>(n);
        ncoeff_ = npoints_ / static_cast<std::size_t>(n) * (static_cast<std::size_t>(n) / 2 + 1);

        real_buf_ = fftw_alloc_real(npoints_);
        cplx_buf_ = fftw_alloc_complex(ncoeff_);
        int dims[3] = {n, n, n};
        fwd_ = fftw_plan_dft_r2c(dim, dims, real_buf_, cplx_buf_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r(dim, dims, cplx_buf_, real_buf_, FFTW_ESTIMATE);
        if (!fwd_ || !bwd_) throw Error("Grid: FFTW plan creation failed");

        build_mode_tables();

        if (padding_ > 1.0) {
            int m = static_cast<int>(std::lround(padding_ * n));
            if (m % 2 != 0) ++m;
            padded_ = std::make_shared<Grid>(dim, m, 1.0);
        }
    }

    ~Grid() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_buf_);
        fftw_free(cplx_buf_);
    }

    Grid(const Grid&) = delete;
    Grid& operator=(const Grid&) = delete;

    int dim() const { return dim_; }
    int n() const { return n_; }
    double padding_factor() const { return padding_; }
    std::size_t npoints() const { return npoints_; }
    std::size_t ncoeff() const { return ncoeff_; }

    /// Padded companion grid for alias-free products (null when padding == 1).
    const Grid* padded() const { return padded_.get(); }

    /// Integer squared wavenumber |k|^2 of spectral slot i.
    int ksq(std::size_t i) const { return ksq_[i]; }
    /// Parseval multiplicity of slot i (2 when the conjugate partner is implicit).
    double weight(std::size_t i) const { return weight_[i]; }
    /// True when any axis index sits on the Nyquist plane |k_j| = n/2.
    bool nyquist(std::size_t i) const { return nyq_[i]; }
    /// Per-axis wavevector of slot i.
    std::array<int, 3> kvec(std::size_t i) const {
        std::array<int, 3> k{0, 0, 0};
        std::size_t rem = i;
        int nh = n_ / 2 + 1;
        for (int d = dim_ - 1; d >= 0; --d) {
            int extent = (d == dim_ - 1) ? nh : n_;
            int idx = static_cast<int>(rem % static_cast<std::size_t>(extent));
            rem /= static_cast<std::size_t>(extent);
            k[d] = (d == dim_ - 1) ? idx : (idx <= n_ / 2 ? idx : idx - n_);
        }
        return k;
    }

    /// Laplacian eigenvalue lambda_k = (2 pi |k|)^2 of slot i.
    double lambda(std::size_t i) const {
        return 4.0 * M_PI * M_PI * static_cast<double>(ksq_[i]);
    }

    /// Largest per-axis index kept alias-free for cubic products.
    int dealias_limit() const {
        int m = padded_ ? padded_->n() : n_;
        int keep = m / 4;
        return std::min(keep, n_ / 2 - 1);
    }

    std::vector<cplx> to_spectral(const std::vector<double>& values) const {
        if (values.size() != npoints_) throw Error("to_spectral: size mismatch");
        for (std::size_t i = 0; i < npoints_; ++i) real_buf_[i] = values[i];
        fftw_execute(fwd_);
        std::vector<cplx> out(ncoeff_);
        const double scale = 1.0 / static_cast<double>(npoints_);
        for (std::size_t i = 0; i < ncoeff_; ++i)
            out[i] = cplx(cplx_buf_[i][0], cplx_buf_[i][1]) * scale;
        return out;
    }

    std::vector<double> to_real(const std::vector<cplx>& coeffs) const {
        if (coeffs.size() != ncoeff_) throw Error("to_real: size mismatch");
        for (std::size_t i = 0; i < ncoeff_; ++i) {
            cplx_buf_[i][0] = coeffs[i].real();
            cplx_buf_[i][1] = coeffs[i].imag();
        }
        fftw_execute(bwd_);
        return std::vector<double>(real_buf_, real_buf_ + npoints_);
    }

    /// Embed a base-grid spectrum into this grid's padded companion.
    /// Nyquist planes of the base grid are dropped.
    std::vector<cplx> pad_spectrum(const std::vector<cplx>& coeffs) const {
        if (!padded_) throw Error("pad_spectrum: grid has no padded companion");
        if (coeffs.size() != ncoeff_) throw Error("pad_spectrum: size mismatch");
        const Grid& pg = *padded_;
        std::vector<cplx> out(pg.ncoeff(), cplx(0.0, 0.0));
        for (std::size_t i = 0; i < ncoeff_; ++i) {
            if (nyq_[i]) continue;
            auto k = kvec(i);
            out[pg.index_of(k)] = coeffs[i];
        }
        return out;
    }

    /// Restrict a padded-grid spectrum back to this grid (Nyquist planes zeroed).
    std::vector<cplx> truncate_spectrum(const std::vector<cplx>& padded_coeffs) const {
        if (!padded_) throw Error("truncate_spectrum: grid has no padded companion");
        const Grid& pg = *padded_;
        if (padded_coeffs.size() != pg.ncoeff()) throw Error("truncate_spectrum: size mismatch");
        std::vector<cplx> out(ncoeff_, cplx(0.0, 0.0));
        for (std::size_t i = 0; i < ncoeff_; ++i) {
            if (nyq_[i]) continue;
            auto k = kvec(i);
            out[i] = padded_coeffs[pg.index_of(k)];
        }
        return out;
    }

    /// Slot index of wavevector k (negative entries wrap; last axis must be >= 0).
    std::size_t index_of(const std::array<int, 3>& k) const {
        std::size_t idx = 0;
        int nh = n_ / 2 + 1;
        for (int d = 0; d < dim_; ++d) {
            int extent = (d == dim_ - 1) ? nh : n_;
            int kk = k[d];
            if (d == dim_ - 1) {
                if (kk < 0 || kk > n_ / 2) throw Error("index_of: bad last-axis index");
            } else if (kk < 0) {
                kk += n_;
            }
            idx = idx * static_cast<std::size_t>(extent) + static_cast<std::size_t>(kk);
        }
        return idx;
    }

    /// Physical coordinates of sample j (row-major).
    std::array<double, 3> coords(std::size_t j) const {
        std::array<double, 3> x{0.0, 0.0, 0.0};
        std::size_t rem = j;
        for (int d = dim_ - 1; d >= 0; --d) {
            x[d] = static_cast<double>(rem % static_cast<std::size_t>(n_)) / n_;
            rem /= static_cast<std::size_t>(n_);
        }
        return x;
    }

  private:
    void build_mode_tables() {
        ksq_.resize(ncoeff_);
        weight_.resize(ncoeff_);
        nyq_.resize(ncoeff_);
        for (std::size_t i = 0; i < ncoeff_; ++i) {
            auto k = kvec(i);
            int s = 0;
            bool ny = false;
            for (int d = 0; d < dim_; ++d) {
                s += k[d] * k[d];
                if (std::abs(k[d]) == n_ / 2) ny = true;
            }
            ksq_[i] = s;
            nyq_[i] = ny ? 1 : 0;
            int kz = k[dim_ - 1];
            weight_[i] = (kz == 0 || kz == n_ / 2) ? 1.0 : 2.0;
        }
    }

    int dim_;
    int n_;
    double padding_;
    std::size_t npoints_ = 0;
    std::size_t ncoeff_ = 0;
    double* real_buf_ = nullptr;
    fftw_complex* cplx_buf_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
    std::vector<int> ksq_;
    std::vector<double> weight_;
    std::vector<char> nyq_;
    std::shared_ptr<Grid> padded_;
};

}  // namespace mpfc
