#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mpfc/field.hpp"

namespace mpfc {

static_assert(std::endian::native == std::endian::little,
              "snapshot format is little-endian; big-endian hosts unsupported");

/// Binary field snapshot: magic "MPFC1", u32 dim, u32 N per axis, f64 time,
/// then row-major f64 samples. All little-endian.
inline void write_snapshot(const std::string& path, const Field& f, double t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open snapshot for writing: " + path);
    out.write("MPFC1", 5);
    const std::uint32_t dim = static_cast<std::uint32_t>(f.grid->dim());
    out.write(reinterpret_cast<const char*>(&dim), 4);
    for (int d = 0; d < f.grid->dim(); ++d) {
        const std::uint32_t n = static_cast<std::uint32_t>(f.grid->n());
        out.write(reinterpret_cast<const char*>(&n), 4);
    }
    out.write(reinterpret_cast<const char*>(&t), 8);
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!out) throw Error("snapshot write failed: " + path);
}

struct SnapshotHeader {
    int dim = 0;
    std::vector<int> n;
    double t = 0.0;
};

inline Field read_snapshot(const std::string& path, const Grid& g, SnapshotHeader* hdr = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open snapshot: " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "MPFC1", 5) != 0)
        throw Error("bad snapshot magic in " + path);
    std::uint32_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), 4);
    if (dim < 1 || dim > 3) throw Error("bad snapshot dim in " + path);
    std::vector<int> ns(dim);
    for (std::uint32_t d = 0; d < dim; ++d) {
        std::uint32_t n = 0;
        in.read(reinterpret_cast<char*>(&n), 4);
        ns[d] = static_cast<int>(n);
    }
    double t = 0.0;
    in.read(reinterpret_cast<char*>(&t), 8);
    if (static_cast<int>(dim) != g.dim())
        throw Error("snapshot dim mismatch: " + path);
    for (int d = 0; d < g.dim(); ++d)
        if (ns[static_cast<std::size_t>(d)] != g.n())
            throw Error("snapshot grid-size mismatch: " + path);
    Field f(g);
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!in) throw Error("truncated snapshot: " + path);
    if (hdr) {
        hdr->dim = static_cast<int>(dim);
        hdr->n = ns;
        hdr->t = t;
    }
    return f;
}

/// Plain-text export (coordinates + value per row) for small grids.
inline void write_field_csv(const std::string& path, const Field& f) {
    if (f.grid->npoints() > 1u << 16)
        throw Error("field CSV export limited to grids of at most 65536 samples");
    std::ofstream out(path);
    if (!out) throw Error("cannot open field CSV for writing: " + path);
    const int dim = f.grid->dim();
    out << (dim == 1 ? "x,value" : dim == 2 ? "x,y,value" : "x,y,z,value") << "\n";
    out.precision(17);
    for (std::size_t j = 0; j < f.grid->npoints(); ++j) {
        auto x = f.grid->coords(j);
        for (int d = 0; d < dim; ++d) out << x[d] << ',';
        out << f.values[j] << "\n";
    }
}

/// FNV-1a 64-bit hash of a file's bytes (ledger integrity stamp).
inline std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file for hashing: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    return h;
}

}  // namespace mpfc
