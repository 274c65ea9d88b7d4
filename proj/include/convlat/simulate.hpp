#pragma once

#include <string>
#include <vector>

#include "convlat/decoder.hpp"
#include "convlat/filter_pattern.hpp"
#include "convlat/shaping.hpp"

namespace convlat {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class DecoderKind { stack, bidir };

struct SimConfig {
    std::string pattern_name = "table1:4";
    int m = 8;
    ShapingScheme scheme = ShapingScheme::tomlinson;
    DecoderKind decoder = DecoderKind::stack;
    int n = 500;
    int blocks = 500;
    std::vector<double> snr_db{21.5};
    std::uint64_t seed = 1;
    int jobs = 1;
    int m_alg = 100;  // nested shaping beam width
    int r_k = 2;      // nested shaping k-window radius
    double signal_power = 0.0;  // 0 -> 2M^2/3, the hypercube-shaped output power
    FanoConfig fano;            // sigma2 is filled per SNR point

    FilterPattern pattern() const { return FilterPattern::from_name(pattern_name); }
    double resolved_signal_power() const { return signal_power > 0 ? signal_power : 2.0 * m * m / 3.0; }

    static SimConfig from_json_text(const std::string& text);
    static SimConfig from_json_file(const std::string& path);
    std::string to_json_text() const;
    std::uint64_t config_hash() const;
};

struct SnrResult {
    double snr_db = 0.0;
    double sigma2 = 0.0;
    std::uint64_t frames = 0;
    std::uint64_t frame_errors = 0;
    std::uint64_t decode_failures = 0;  // subset of frame_errors
    double fer = 0.0;
    double mean_comp_per_symbol = 0.0;
    double max_comp_per_symbol = 0.0;
    std::uint64_t cpl_count = 0;
    std::uint64_t evictions = 0;
};

struct SimResult {
    std::vector<SnrResult> per_snr;
    std::string config_echo;
    std::string config_hash;
    double wall_seconds = 0.0;

    std::string to_json_text() const;
    std::string to_csv() const;  // snr_db,fer,mean_comp,max_comp
};

/// Monte-Carlo frame-error-rate run: per block generate data, shape, encode,
/// add noise, decode, compare.  Per-block RNG streams are derived from
/// (seed, snr index, block index), so results are independent of parallelism.
SimResult run_simulation(const SimConfig& cfg);

struct ShapingGainRow {
    int m = 0;
    int m_alg = 0;
    double mean_power = 0.0;
    double gain_db = 0.0;  // 10 log10(uncoded QAM energy / measured power)
    std::uint64_t symbols = 0;
};

/// Mean shaper output power versus the uncoded constellation energy, per
/// beam width and constellation.
std::vector<ShapingGainRow> shaping_gain_experiment(const FilterPattern& f,
                                                    std::span<const int> m_algs,
                                                    std::span<const int> constellations,
                                                    std::uint64_t min_symbols, std::uint64_t seed,
                                                    int block_len = 1000, int r_k = 2, int jobs = 1);

}  // namespace convlat
