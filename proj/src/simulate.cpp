#include "convlat/simulate.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "convlat/channel.hpp"
#include "convlat/encode.hpp"

namespace convlat {

namespace {

const char* decoder_name(DecoderKind k) { return k == DecoderKind::stack ? "stack" : "bidir"; }

DecoderKind decoder_from_string(const std::string& s) {
    if (s == "stack") return DecoderKind::stack;
    if (s == "bidir" || s == "bidirectional") return DecoderKind::bidir;
    throw std::invalid_argument("unknown decoder kind: " + s);
}

}  // namespace

SimConfig SimConfig::from_json_text(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    SimConfig cfg;
    std::vector<std::string> known{"pattern", "m",      "scheme", "decoder",      "n",
                                   "blocks",  "snr_db", "seed",   "jobs",         "m_alg",
                                   "r_k",     "fano",   "version", "signal_power"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw std::invalid_argument("unknown config key: " + it.key());
        }
    }
    if (j.contains("pattern")) cfg.pattern_name = j["pattern"].get<std::string>();
    if (j.contains("m")) cfg.m = j["m"].get<int>();
    if (j.contains("scheme")) cfg.scheme = shaping_scheme_from_string(j["scheme"].get<std::string>());
    if (j.contains("decoder")) cfg.decoder = decoder_from_string(j["decoder"].get<std::string>());
    if (j.contains("n")) cfg.n = j["n"].get<int>();
    if (j.contains("blocks")) cfg.blocks = j["blocks"].get<int>();
    if (j.contains("snr_db")) cfg.snr_db = j["snr_db"].get<std::vector<double>>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
    if (j.contains("m_alg")) cfg.m_alg = j["m_alg"].get<int>();
    if (j.contains("r_k")) cfg.r_k = j["r_k"].get<int>();
    if (j.contains("signal_power")) cfg.signal_power = j["signal_power"].get<double>();
    if (j.contains("fano")) {
        auto& f = j["fano"];
        std::vector<std::string> fk{"max_stack", "branch_delta", "x_range",      "merge_len",
                                    "bias",      "r_b",          "path_memory",  "max_entries"};
        for (auto it = f.begin(); it != f.end(); ++it) {
            if (std::find(fk.begin(), fk.end(), it.key()) == fk.end()) {
                throw std::invalid_argument("unknown fano key: " + it.key());
            }
        }
        if (f.contains("max_stack")) cfg.fano.max_stack = f["max_stack"].get<int>();
        if (f.contains("branch_delta")) {
            cfg.fano.branch_delta = f["branch_delta"].is_string()
                                        ? std::numeric_limits<double>::infinity()
                                        : f["branch_delta"].get<double>();
        }
        if (f.contains("x_range")) cfg.fano.x_range_test = f["x_range"].get<bool>();
        if (f.contains("merge_len")) cfg.fano.merge_len = f["merge_len"].get<int>();
        if (f.contains("bias")) cfg.fano.bias = f["bias"].get<double>();
        if (f.contains("r_b")) cfg.fano.r_b = f["r_b"].get<int>();
        if (f.contains("path_memory")) cfg.fano.path_memory_depth = f["path_memory"].get<int>();
        if (f.contains("max_entries")) cfg.fano.max_entries = f["max_entries"].get<std::uint64_t>();
    }
    return cfg;
}

SimConfig SimConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string SimConfig::to_json_text() const {
    nlohmann::json j;
    j["pattern"] = pattern_name;
    j["m"] = m;
    j["scheme"] = to_string(scheme);
    j["decoder"] = decoder_name(decoder);
    j["n"] = n;
    j["blocks"] = blocks;
    j["snr_db"] = snr_db;
    j["seed"] = seed;
    j["jobs"] = jobs;
    j["m_alg"] = m_alg;
    j["r_k"] = r_k;
    j["signal_power"] = resolved_signal_power();
    nlohmann::json f;
    f["max_stack"] = fano.max_stack;
    f["branch_delta"] = std::isfinite(fano.branch_delta) ? nlohmann::json(fano.branch_delta)
                                                         : nlohmann::json("inf");
    f["x_range"] = fano.x_range_test;
    f["merge_len"] = fano.merge_len;
    if (fano.bias) f["bias"] = *fano.bias;
    f["r_b"] = fano.r_b;
    f["path_memory"] = fano.path_memory_depth;
    f["max_entries"] = fano.max_entries;
    j["fano"] = f;
    j["version"] = kLibraryVersion;
    return j.dump(2);
}

std::uint64_t SimConfig::config_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : to_json_text()) h = hash_mix(h, std::uint64_t(std::uint8_t(c)));
    return h;
}

namespace {

struct BlockOutcome {
    bool frame_error = false;
    bool decode_failure = false;
    bool cpl = false;
    std::uint64_t computations = 0;
    std::uint64_t evictions = 0;
};

/// shape a fresh block with zero initial state; returns shaped symbols
std::vector<GaussInt> shape_block(std::span<const GaussInt> a, const FilterPattern& f,
                                  const SimConfig& cfg) {
    const int n = int(a.size());
    std::vector<GaussInt> b(static_cast<std::size_t>(n));
    if (cfg.scheme == ShapingScheme::nested) {
        return nested_shape_block(a, f, cfg.m, cfg.m_alg, cfg.r_k);
    }
    ShaperState st(f, cfg.scheme, cfg.m);
    for (int i = 0; i < n; ++i) {
        QamSymbol sym{a[std::size_t(i)], cfg.m};
        ShapeStep step = cfg.scheme == ShapingScheme::tomlinson ? tomlinson_step(sym, st, f)
                                                                : flexible_step(sym, st, f);
        b[std::size_t(i)] = step.b;
    }
    return b;
}

BlockOutcome run_block(const SimConfig& cfg, const FilterPattern& f, double sigma2,
                       std::uint64_t snr_idx, std::uint64_t block_idx) {
    Rng rng(mix_seed(cfg.seed, snr_idx, block_idx));
    const int n = cfg.n;
    const int order = f.order();

    std::vector<GaussInt> a(static_cast<std::size_t>(n));
    for (auto& s : a) s = rng.next_qam(cfg.m);

    std::vector<GaussInt> b = shape_block(a, f, cfg);
    Codeword x = encode_convolve(b, f);
    std::vector<cplx> y = awgn_add(x.samples, sigma2, rng);

    std::span<const GaussInt> tail(b.data() + (n - order), std::size_t(order));

    FanoConfig fano = cfg.fano;
    fano.sigma2 = sigma2;
    fano.m = cfg.m;
    // the t-h box only bounds hypercube-shaped streams
    fano.x_range_test = cfg.fano.x_range_test && cfg.scheme != ShapingScheme::nested;

    DecodeResult dec = cfg.decoder == DecoderKind::stack
                           ? stack_decode(y, f, tail, fano, b)
                           : bidirectional_decode(y, f, tail, fano, b);

    BlockOutcome out;
    out.computations = dec.total_entries();
    out.evictions = dec.stats.evictions + dec.stats_bwd.evictions;
    out.cpl = dec.stats.cpl || dec.stats_bwd.cpl;
    if (!dec.ok) {
        out.frame_error = true;
        out.decode_failure = true;
        return out;
    }
    auto inv = inverse_shape(dec.symbols, cfg.scheme, f, cfg.m);
    out.frame_error = !inv.ok || inv.symbols != a;
    return out;
}

}  // namespace

SimResult run_simulation(const SimConfig& cfg) {
    if (cfg.n < 1 || cfg.blocks < 1) throw std::invalid_argument("run_simulation: bad block setup");
    FilterPattern f = cfg.pattern();
    if (cfg.n <= f.order()) throw std::invalid_argument("run_simulation: N must exceed filter order");
    const double power = cfg.resolved_signal_power();

    auto t0 = std::chrono::steady_clock::now();
    SimResult result;
    result.config_echo = cfg.to_json_text();
    {
        std::ostringstream os;
        os << std::hex << cfg.config_hash();
        result.config_hash = os.str();
    }

    for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
        const double snr = cfg.snr_db[si];
        const double sigma2 = snr_to_sigma2(snr, power);
        std::vector<BlockOutcome> outcomes(std::size_t(cfg.blocks));

        const int jobs = std::max(1, cfg.jobs);
        if (jobs == 1) {
            for (int bi = 0; bi < cfg.blocks; ++bi) {
                outcomes[std::size_t(bi)] = run_block(cfg, f, sigma2, si, std::uint64_t(bi));
            }
        } else {
            std::atomic<int> next{0};
            std::vector<std::thread> pool;
            for (int t = 0; t < jobs; ++t) {
                pool.emplace_back([&] {
                    for (int bi = next.fetch_add(1); bi < cfg.blocks; bi = next.fetch_add(1)) {
                        outcomes[std::size_t(bi)] = run_block(cfg, f, sigma2, si, std::uint64_t(bi));
                    }
                });
            }
            for (auto& th : pool) th.join();
        }

        SnrResult r;
        r.snr_db = snr;
        r.sigma2 = sigma2;
        r.frames = std::uint64_t(cfg.blocks);
        double comp_sum = 0.0;
        for (const auto& o : outcomes) {
            r.frame_errors += o.frame_error;
            r.decode_failures += o.decode_failure;
            r.cpl_count += o.cpl;
            r.evictions += o.evictions;
            double cps = double(o.computations) / double(cfg.n);
            comp_sum += cps;
            r.max_comp_per_symbol = std::max(r.max_comp_per_symbol, cps);
        }
        r.fer = double(r.frame_errors) / double(r.frames);
        r.mean_comp_per_symbol = comp_sum / double(r.frames);
        result.per_snr.push_back(r);
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

std::string SimResult::to_json_text() const {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(config_echo);
    j["config_hash"] = config_hash;
    j["wall_seconds"] = wall_seconds;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : per_snr) {
        rows.push_back({{"snr_db", r.snr_db},
                        {"sigma2", r.sigma2},
                        {"frames", r.frames},
                        {"frame_errors", r.frame_errors},
                        {"decode_failures", r.decode_failures},
                        {"fer", r.fer},
                        {"mean_comp_per_symbol", r.mean_comp_per_symbol},
                        {"max_comp_per_symbol", r.max_comp_per_symbol},
                        {"cpl_count", r.cpl_count},
                        {"evictions", r.evictions}});
    }
    j["per_snr"] = rows;
    return j.dump(2);
}

std::string SimResult::to_csv() const {
    std::ostringstream os;
    os << "snr_db,fer,mean_comp,max_comp\n";
    for (const auto& r : per_snr) {
        os << r.snr_db << "," << r.fer << "," << r.mean_comp_per_symbol << ","
           << r.max_comp_per_symbol << "\n";
    }
    return os.str();
}

std::vector<ShapingGainRow> shaping_gain_experiment(const FilterPattern& f,
                                                    std::span<const int> m_algs,
                                                    std::span<const int> constellations,
                                                    std::uint64_t min_symbols, std::uint64_t seed,
                                                    int block_len, int r_k, int jobs) {
    std::vector<ShapingGainRow> rows;
    const std::uint64_t blocks = (min_symbols + std::uint64_t(block_len) - 1) / std::uint64_t(block_len);
    for (int m : constellations) {
        for (int m_alg : m_algs) {
            std::vector<double> block_power(blocks, 0.0);
            auto work = [&](std::uint64_t bi) {
                Rng rng(mix_seed(seed, std::uint64_t(m) * 1000 + std::uint64_t(m_alg), bi));
                std::vector<GaussInt> a(static_cast<std::size_t>(block_len));
                for (auto& s : a) s = rng.next_qam(m);
                auto b = nested_shape_block(a, f, m, m_alg, r_k);
                // emitted power over the data samples
                ShaperState st(f, ShapingScheme::nested, m);
                double p = 0.0;
                for (std::size_t i = 0; i < b.size(); ++i) {
                    cplx x = b[i].to_cplx() + st.feedback(f);
                    st.push(b[i], x);
                    p += std::norm(x);
                }
                block_power[bi] = p;
            };
            if (jobs <= 1) {
                for (std::uint64_t bi = 0; bi < blocks; ++bi) work(bi);
            } else {
                std::atomic<std::uint64_t> next{0};
                std::vector<std::thread> pool;
                for (int t = 0; t < jobs; ++t) {
                    pool.emplace_back([&] {
                        for (std::uint64_t bi = next.fetch_add(1); bi < blocks;
                             bi = next.fetch_add(1)) {
                            work(bi);
                        }
                    });
                }
                for (auto& th : pool) th.join();
            }
            double total = 0.0;
            for (double p : block_power) total += p;
            std::uint64_t symbols = blocks * std::uint64_t(block_len);
            double mean_power = total / double(symbols);
            double uncoded = constellation_energy(m, /*qam=*/true);
            rows.push_back({m, m_alg, mean_power, 10.0 * std::log10(uncoded / mean_power), symbols});
        }
    }
    return rows;
}

}  // namespace convlat
