#pragma once

#include <complex>
#include <cstdint>
#include <cmath>
#include <functional>

namespace convlat {

using cplx = std::complex<double>;

/// Complex integer (Gaussian integer) with exact 64-bit components.
/// Symbol state must stay exact for hashing and merge detection, so these
/// never pass through floating point.
struct GaussInt {
    std::int64_t re = 0;
    std::int64_t im = 0;

    friend GaussInt operator+(GaussInt a, GaussInt b) { return {a.re + b.re, a.im + b.im}; }
    friend GaussInt operator-(GaussInt a, GaussInt b) { return {a.re - b.re, a.im - b.im}; }
    friend GaussInt operator-(GaussInt a) { return {-a.re, -a.im}; }
    friend bool operator==(GaussInt a, GaussInt b) { return a.re == b.re && a.im == b.im; }
    friend bool operator!=(GaussInt a, GaussInt b) { return !(a == b); }

    GaussInt conj() const { return {re, -im}; }
    GaussInt rot90() const { return {-im, re}; }  // multiply by j
    std::int64_t norm2() const { return re * re + im * im; }
    bool is_zero() const { return re == 0 && im == 0; }
    bool odd_components() const { return (re & 1) && (im & 1); }
    bool even_components() const { return !(re & 1) && !(im & 1); }

    cplx to_cplx() const { return {double(re), double(im)}; }
};

inline GaussInt scale(GaussInt a, std::int64_t s) { return {a.re * s, a.im * s}; }

/// Nearest integer, halves rounded toward +infinity.  The rounding convention
/// is shared by shaper and decoder; changing it breaks their agreement.
inline std::int64_t round_half_up(double x) {
    return std::int64_t(std::floor(x + 0.5));
}

/// Componentwise nearest Gaussian integer of a complex value.
inline GaussInt round_gauss(cplx z) {
    return {round_half_up(z.real()), round_half_up(z.imag())};
}

/// Nearest odd integer (grid of PAM symbols); halves of the even midpoints
/// round toward +infinity, consistent with round_half_up.
inline std::int64_t round_to_odd(double x) {
    std::int64_t k = round_half_up((x - 1.0) / 2.0);
    return 2 * k + 1;
}

inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

struct GaussIntHash {
    std::size_t operator()(GaussInt g) const {
        return hash_mix(std::uint64_t(g.re) * 0x9e3779b97f4a7c15ULL, std::uint64_t(g.im));
    }
};

/// QAM symbol: Gaussian integer with odd components bounded by the
/// constellation half-width M (|re|,|im| <= M-1).
struct QamSymbol {
    GaussInt value;
    int m = 2;

    bool valid() const {
        return value.odd_components() &&
               std::llabs(value.re) <= m - 1 && std::llabs(value.im) <= m - 1;
    }
};

}  // namespace convlat
