#pragma once

#include <optional>
#include <span>
#include <vector>

#include "convlat/filter_pattern.hpp"
#include "convlat/gauss.hpp"

namespace convlat {

enum class ShapingScheme { tomlinson, flexible, nested };

const char* to_string(ShapingScheme s);
ShapingScheme shaping_scheme_from_string(const std::string& name);

/// Recursion memory of the shaper: the last L shaped symbols (and the last K
/// codeword samples for ARMA patterns).  Zero-initialized at stream start;
/// single-owner, mutated sequentially.
class ShaperState {
  public:
    ShaperState() = default;
    ShaperState(const FilterPattern& f, ShapingScheme scheme, int m);

    ShapingScheme scheme() const { return scheme_; }
    int m() const { return m_; }

    /// sum_l f_l b_{n-l} - sum_k h_k x_{n-k}
    cplx feedback(const FilterPattern& f) const;
    void push(GaussInt b, cplx x);

    /// last L shaped symbols, oldest first
    std::vector<GaussInt> last_symbols() const;
    const std::vector<cplx>& last_outputs_ring() const { return last_x_; }

  private:
    std::vector<GaussInt> last_b_;  // ring, newest at head_-1
    std::vector<cplx> last_x_;
    int head_b_ = 0;
    int head_x_ = 0;
    ShapingScheme scheme_ = ShapingScheme::tomlinson;
    int m_ = 2;

    friend struct ShaperAccess;
};

struct ShapeStep {
    GaussInt b;
    cplx x;
    GaussInt k;
};

/// Hypercube shaping: k_n = round((a_n + feedback)/2M), b_n = a_n - 2M k_n.
/// Both components of x_n land in [-M, M).
ShapeStep tomlinson_step(QamSymbol a, ShaperState& state, const FilterPattern& f);

/// Dither shaping: k_n = round(feedback/2), b_n = a_n - 2 k_n; the dither
/// x_n - a_n has both components in [-1, 1).
ShapeStep flexible_step(QamSymbol a, ShaperState& state, const FilterPattern& f);

struct NestedStats {
    std::uint64_t window_edge_hits = 0;  // selected k on the candidate window boundary
    double energy = 0.0;                 // full-codeword energy of the winner
    double tomlinson_energy = 0.0;
};

/// Beam-search (M-algorithm) approximation of nearest-point shaping in the
/// coarse lattice 2M G.  Keeps the m_alg lowest-energy partial sequences; the
/// pure Tomlinson path is carried as a protected candidate so the output
/// energy never exceeds Tomlinson shaping.  k candidates per step live in a
/// window of radius r_k around the Tomlinson choice.
std::vector<GaussInt> nested_shape_block(std::span<const GaussInt> a, const FilterPattern& f,
                                         int m, int m_alg, int r_k = 2,
                                         NestedStats* stats = nullptr);

struct InverseShapeResult {
    std::vector<GaussInt> symbols;
    bool ok = true;  // false when flexible slicing left the constellation
};

/// Recover data symbols from shaped symbols: centered mod-2M for
/// tomlinson/nested, regenerate-and-slice for flexible.
InverseShapeResult inverse_shape(std::span<const GaussInt> b, ShapingScheme scheme,
                                 const FilterPattern& f, int m);

/// Last-L symbols of a block plus their losslessly compressed encoding.
struct TailRecord {
    std::vector<GaussInt> raw;      // oldest first
    std::vector<int> bit_widths;    // per-stage two's-complement width (per component)
    std::vector<std::uint8_t> packed;

    int total_payload_bits() const;
    std::vector<std::uint8_t> serialize() const { return packed; }
};

/// Capture the last L shaped symbols; the stream state is left untouched so
/// encoding can continue across blocks.
TailRecord terminate_block(const ShaperState& state, const FilterPattern& f);

/// Residual coding of a tail through the one-zero predictor ladder
/// (1 + c z^-1)^(k-1) for factored patterns, or the degree-(k-1) truncation
/// of F otherwise.  Bit-exact round trip.
TailRecord compress_tail(std::span<const GaussInt> raw, const FilterPattern& f);
std::vector<GaussInt> decompress_tail(std::span<const std::uint8_t> packed, const FilterPattern& f);

}  // namespace convlat
