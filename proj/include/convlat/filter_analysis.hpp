#pragma once

#include <span>
#include <vector>

#include "convlat/encode.hpp"
#include "convlat/filter_pattern.hpp"

namespace convlat {

/// Thrown when the companion-matrix eigensolver fails; callers must never
/// interpret a failed factorization as "not minimum phase".
struct RootFindingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotInvertibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Zeros (in z) of sum_l taps[l] z^{-l}; taps[0] != 0 required.
std::vector<cplx> poly_roots(std::span<const cplx> taps);

/// Rational factor A(z) = gain * z^{advance} * prod (1 - z_i z^-1) / (1 - p_i z^-1).
/// Reflection pairs make |A(e^jw)| constant; unit_from_poles builds a true
/// |A| = 1 allpass with a stable causal realization.
struct AllpassSpec {
    cplx gain{1.0, 0.0};
    int advance = 0;
    std::vector<cplx> zeros;
    std::vector<cplx> poles;

    bool is_identity() const { return zeros.empty() && poles.empty() && advance == 0 && gain == cplx(1.0, 0.0); }
    cplx at(double w) const;

    /// Causal impulse response, truncated once |a(k)| stays below eps for a
    /// full pole-memory window.  Requires advance == 0 and poles inside the
    /// unit circle.
    std::vector<cplx> impulse_response(double eps, std::size_t max_len = 1u << 20) const;

    static AllpassSpec identity() { return {}; }
    static AllpassSpec unit_from_poles(std::span<const cplx> poles);
};

inline constexpr double kMinPhaseTol = 1e-9;

/// True iff all zeros of F (and of G and H for ARMA patterns) have magnitude
/// < 1 - tol.
bool is_minimum_phase(const FilterPattern& f, double tol = kMinPhaseTol);

/// Split F into F_i(z) F_o(z), reflect the maximum-phase zeros, and return
/// the monic minimum-phase equivalent together with A(z) = F(z)/F_mp(z).
/// |F(w)| = |A gain constant| * |F_mp(w)|; for minimum-phase input the
/// pattern is returned unchanged and A = 1.
std::pair<FilterPattern, AllpassSpec> minimum_phase_equivalent(const FilterPattern& f,
                                                               double tol = kMinPhaseTol);

/// Transform a received block so that decoding it forward against the
/// conjugate pattern is equivalent to decoding y backward against f.
/// y is filtered with A(z) = F*(1/z*)/F(z) (stable causal 1/F followed by the
/// anti-causal FIR F*(1/z*)) and time-reversed.  The allpass leaves the noise
/// statistics unchanged.
struct BackwardTransform {
    FilterPattern f_bwd;        // taps conj(f_l), monic minimum phase
    std::vector<cplx> y_bwd;    // same length as y
};
BackwardTransform backward_code_transform(const FilterPattern& f, std::span<const cplx> y);

/// Encoder filter for transmission through an ISI channel: F'(z) =
/// F(z)/(A(z) H_i(z) H_o(z)) with A(z) = H_o*(1/z*)/H_o(z), so the combined
/// response F' A H folds into gain * z^advance * F(z).
struct PreEqualization {
    FilterPattern encoder_filter;  // monic ARMA F / H_mp
    AllpassSpec allpass;           // applied at the transmitter output
    cplx gain{1.0, 0.0};           // combined response is gain * z^advance * F
    int advance = 0;
};
PreEqualization preequalization_filter(const FilterPattern& f_target,
                                       std::span<const cplx> channel_taps,
                                       double tol = kMinPhaseTol);

}  // namespace convlat
