#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "evolve.hpp"
#include "fft.hpp"
#include "profile.hpp"

namespace mll {

// Binary snapshot: 8-byte magic, u32 version, i32 P, i32 Ny, f64 Ly, f64 eps, f64 t, then
// (re, im) f64 pairs ordered p-major, eta-major, component. All little-endian.
inline constexpr char snapshot_magic[8] = {'M', 'L', 'L', 'S', 'N', 'A', 'P', '\0'};
inline constexpr std::uint32_t snapshot_version = 1;

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
    auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    os.write(reinterpret_cast<const char*>(bits.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bits{};
    if (!is.read(reinterpret_cast<char*>(bits.data()), sizeof(T))) throw ConfigError("truncated snapshot file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    return std::bit_cast<T>(bits);
}

}  // namespace detail

inline void write_snapshot(std::ostream& os, const ThetaProfile& v, double t) {
    os.write(snapshot_magic, sizeof snapshot_magic);
    detail::put_le(os, snapshot_version);
    detail::put_le(os, std::int32_t(v.P()));
    detail::put_le(os, std::int32_t(v.Ny()));
    detail::put_le(os, v.grid().Ly);
    detail::put_le(os, v.eps());
    detail::put_le(os, t);
    for (const auto& c : v.data())
        for (int k = 0; k < 9; ++k) {
            detail::put_le(os, c(k).real());
            detail::put_le(os, c(k).imag());
        }
}

struct LoadedSnapshot {
    ThetaProfile V;
    double t{};
};

inline LoadedSnapshot read_snapshot(std::istream& is) {
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, snapshot_magic, sizeof magic) != 0)
        throw ConfigError("not a profile snapshot");
    if (detail::get_le<std::uint32_t>(is) != snapshot_version) throw ConfigError("unsupported snapshot version");
    Grid g;
    g.P = detail::get_le<std::int32_t>(is);
    g.Ny = detail::get_le<std::int32_t>(is);
    g.Ly = detail::get_le<double>(is);
    if (g.P < 0 || g.Ny <= 0) throw ConfigError("corrupt snapshot header");
    const double eps = detail::get_le<double>(is);
    const double t = detail::get_le<double>(is);
    ThetaProfile v(g, eps);
    for (auto& c : v.data())
        for (int k = 0; k < 9; ++k) {
            const double re = detail::get_le<double>(is);
            c(k) = cplx(re, detail::get_le<double>(is));
        }
    return {std::move(v), t};
}

inline void save_snapshot(const std::string& path, const ThetaProfile& v, double t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path);
    write_snapshot(os, v, t);
}

inline LoadedSnapshot load_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path);
    return read_snapshot(is);
}

inline void write_diagnostics_header(std::ostream& os) {
    os << "t,L2_total,Linf_total,L2_Pi0,L2_Pis,Linf_Pi0,Linf_Pis\n";
}

inline void write_diagnostics_row(std::ostream& os, const Diagnostics& d) {
    os << std::setprecision(17) << d.t << ',' << d.l2_total << ',' << d.linf_total << ',' << d.l2_pi0 << ','
       << d.l2_pis << ',' << d.linf_pi0 << ',' << d.linf_pis << '\n';
}

// Columns y, re, im of a periodic complex field.
inline void write_envelope_csv(std::ostream& os, const std::vector<cplx>& g, double Ly) {
    os << "y,re_g,im_g\n" << std::setprecision(17);
    const int ny = int(g.size());
    for (int i = 0; i < ny; ++i) os << Ly * i / ny << ',' << g[i].real() << ',' << g[i].imag() << '\n';
}

// Harmonic p of a layer in y-space: columns y, then re_c, im_c for each requested component.
inline void write_layer_csv(std::ostream& os, const ThetaProfile& v, int p, const std::vector<int>& components) {
    const int ny = v.Ny();
    Fft1D fft(ny);
    std::vector<std::vector<cplx>> cols;
    os << 'y';
    for (int c : components) {
        if (c < 0 || c > 8) throw ConfigError("component index out of range");
        os << ",re_" << c << ",im_" << c;
        std::vector<cplx> s(ny);
        for (int n = 0; n < ny; ++n) s[n] = v.at(p, n)(c);
        cols.push_back(fft.to_physical(s));
    }
    os << '\n' << std::setprecision(17);
    for (int i = 0; i < ny; ++i) {
        os << grid_y(i, v.grid());
        for (const auto& col : cols) os << ',' << col[i].real() << ',' << col[i].imag();
        os << '\n';
    }
}

}  // namespace mll
