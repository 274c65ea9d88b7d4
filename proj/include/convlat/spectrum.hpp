#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "convlat/filter_pattern.hpp"
#include "convlat/gauss.hpp"

namespace convlat {

/// Error-symbol sequence: even complex integers, first and last symbol
/// nonzero, no run of L consecutive zeros (that would be two events).
struct ErrorEvent {
    std::vector<GaussInt> symbols;
    double weight = 0.0;
};

struct SpectrumReport {
    std::vector<ErrorEvent> events;  // canonical: no shifts, no 90-degree rotations
    double d_min2 = 0.0;
    int n_min = 0;
    std::map<std::int64_t, std::uint64_t> histogram;  // unit bins keyed by floor(weight)
    std::uint64_t nodes_examined = 0;
    bool complete = true;  // false when the node budget was exhausted
    double d2_search = 0.0;
    int n_max = 0;

    std::string to_json_text() const;
    std::string histogram_csv() const;
};

struct SearchOptions {
    std::uint64_t node_budget = 1'000'000'000;
    bool keep_events = true;
    int jobs = 1;  // partitions the e(0) candidate list across workers
};

/// Squared Euclidean weight d^2(e) = sum |(e*f)(n)|^2 over the full
/// convolution support.
double error_weight(std::span<const GaussInt> e, const FilterPattern& f);
double error_weight(std::span<const GaussInt> e, std::span<const cplx> taps);

/// All canonical error events with weight < d2_search and length <= n_max.
/// Tree search with partial-weight pruning, the modified bound
/// d2_search - 4|f_L|^2, first-symbol rotation dilution, and zero-run
/// skipping.
SpectrumReport search_spectrum(const FilterPattern& f, double d2_search, int n_max,
                               const SearchOptions& opts = {});

/// Same search for an arbitrary tap vector with nonzero leading tap (used to
/// compare spectra across allpass-equivalent patterns).
SpectrumReport search_spectrum(std::span<const cplx> taps, double d2_search, int n_max,
                               const SearchOptions& opts = {});

/// Minimum distance with dynamically shrinking radius, seeded by the
/// single-symbol event e = [2] whose weight 4 sum|f_l|^2 is an upper bound.
struct MinDistanceResult {
    double d_min2 = 0.0;
    int n_min = 0;
    std::vector<GaussInt> event;
    std::uint64_t nodes_examined = 0;
    bool complete = true;
};
MinDistanceResult min_distance(const FilterPattern& f, int n_max, const SearchOptions& opts = {});

/// Two-pass variant: a backward pass enumerates event tails below d2_tail
/// into a prefix database; the forward pass keeps a branch above
/// d2_search - d2_tail only when its last L-1 symbols match a stored tail
/// prefix.  Returns exactly the search_spectrum event set, usually with
/// fewer nodes examined.
SpectrumReport backward_forward_search(const FilterPattern& f, double d2_search, double d2_tail,
                                       int n_max, const SearchOptions& opts = {});

/// Approximate union bound on the event error rate: each canonical event is
/// expanded back to its 4 rotations.  Truncated at the search radius, so an
/// approximation of an upper bound rather than a bound.
double union_bound_eer(const SpectrumReport& report, double sigma2);

/// Weight spectrum of the Cartesian lattice (identity pattern) restricted to
/// all-nonzero sequences: a(k) = b(k) + sum_i a(i) b(k-i), with b(k) the
/// number of single even complex-integer symbols of squared magnitude 4k.
struct CartesianSpectrum {
    std::vector<std::uint64_t> a;
    std::vector<std::uint64_t> b;
};
CartesianSpectrum cartesian_spectrum(int k_max);

/// Least-squares fit of histogram counts to N(d) = alpha * d^beta in the log
/// domain.  By default fits the nonempty bins strictly above the d_min bin;
/// min_bin_lo overrides the lower edge of the fit window.
struct HistogramFit {
    double alpha = 0.0;
    double beta = 0.0;
    double residual = 0.0;  // rms residual in log10 space
    int bins_used = 0;
};
HistogramFit histogram_fit(const SpectrumReport& report, double min_bin_lo = -1.0);

}  // namespace convlat
