// convlat: convolutional lattice codes over QAM -- encode, shape, search the
// error spectrum, decode, simulate.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "convlat/channel.hpp"
#include "convlat/decoder.hpp"
#include "convlat/encode.hpp"
#include "convlat/filter_analysis.hpp"
#include "convlat/rng.hpp"
#include "convlat/shaping.hpp"
#include "convlat/simulate.hpp"
#include "convlat/spectrum.hpp"

using namespace convlat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitTruncated = 2;
constexpr int kExitInternal = 3;

FilterPattern load_pattern(const std::string& spec) {
    if (!spec.empty() && (spec[0] == '{' || spec[0] == '[')) return FilterPattern::from_json_text(spec);
    if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") {
        return FilterPattern::from_json_file(spec);
    }
    return FilterPattern::from_name(spec);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string hex_bytes(std::span<const std::uint8_t> bytes) {
    std::ostringstream os;
    for (auto b : bytes) os << std::hex << std::setw(2) << std::setfill('0') << int(b);
    return os.str();
}

std::vector<std::uint8_t> unhex(const std::string& s) {
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
        out.push_back(std::uint8_t(std::stoi(s.substr(i, 2), nullptr, 16)));
    }
    return out;
}

nlohmann::json gauss_array(std::span<const GaussInt> v) {
    nlohmann::json arr = nlohmann::json::array();
    for (auto g : v) arr.push_back({g.re, g.im});
    return arr;
}

std::vector<GaussInt> gauss_from(const nlohmann::json& arr) {
    std::vector<GaussInt> out;
    for (const auto& e : arr) out.push_back({e[0].get<std::int64_t>(), e[1].get<std::int64_t>()});
    return out;
}

int cmd_spectrum(const std::string& pattern, double dsearch, int nmax, bool backward_forward,
                 double dtail, std::uint64_t budget, int jobs, const std::string& out,
                 const std::string& hist) {
    FilterPattern f = load_pattern(pattern);
    SearchOptions opts;
    opts.node_budget = budget;
    opts.jobs = jobs;
    SpectrumReport report = backward_forward ? backward_forward_search(f, dsearch, dtail, nmax, opts)
                                             : search_spectrum(f, dsearch, nmax, opts);
    std::cout << "events: " << report.events.size() << "  d_min2: " << std::fixed
              << std::setprecision(2) << report.d_min2 << "  n_min: " << report.n_min
              << "  nodes: " << report.nodes_examined << (report.complete ? "" : "  [truncated]")
              << "\n";
    if (!out.empty()) write_file(out, report.to_json_text());
    if (!hist.empty()) write_file(hist, report.histogram_csv());
    return report.complete ? kExitOk : kExitTruncated;
}

int cmd_mindist(const std::string& pattern, int nmax, std::uint64_t budget, int jobs) {
    FilterPattern f = load_pattern(pattern);
    SearchOptions opts;
    opts.node_budget = budget;
    opts.jobs = jobs;
    auto res = min_distance(f, nmax, opts);
    std::cout << "d_min2: " << std::setprecision(10) << res.d_min2 << "  n_min: " << res.n_min
              << "  nodes: " << res.nodes_examined << (res.complete ? "" : "  [truncated]") << "\n";
    std::cout << "event:";
    for (auto g : res.event) std::cout << " (" << g.re << "," << g.im << ")";
    std::cout << "\n";
    return res.complete ? kExitOk : kExitTruncated;
}

int cmd_cartesian(int kmax, const std::string& out) {
    auto cs = cartesian_spectrum(kmax);
    std::ostringstream os;
    os << "k,a,b\n";
    for (int k = 1; k <= kmax; ++k) {
        os << k << "," << cs.a[std::size_t(k - 1)] << "," << cs.b[std::size_t(k - 1)] << "\n";
    }
    std::cout << os.str();
    if (!out.empty()) write_file(out, os.str());
    return kExitOk;
}

int cmd_verify_table1(bool include_long, int nmax, std::uint64_t budget, int jobs) {
    struct Row {
        const char* name;
        double d2;
        int nmin;
    };
    const Row rows[5] = {{"table1:1", 14.81, 3},
                         {"table1:2", 17.33, 3},
                         {"table1:3", 20.53, 10},
                         {"table1:4", 23.59, 5},
                         {"table1:5", 31.27, 12}};
    int limit = include_long ? 5 : 4;
    bool all_ok = true;
    std::cout << "pattern      d_min2   expected  n_min  expected  status\n";
    for (int i = 0; i < limit; ++i) {
        SearchOptions opts;
        opts.node_budget = budget;
        opts.jobs = jobs;
        auto res = min_distance(FilterPattern::from_name(rows[i].name), nmax, opts);
        bool ok = res.complete && std::abs(res.d_min2 - rows[i].d2) <= 0.005 + 1e-12 &&
                  res.n_min == rows[i].nmin;
        all_ok = all_ok && ok;
        std::cout << std::left << std::setw(12) << rows[i].name << " " << std::fixed
                  << std::setprecision(2) << std::setw(8) << res.d_min2 << " " << std::setw(9)
                  << rows[i].d2 << " " << std::setw(6) << res.n_min << " " << std::setw(9)
                  << rows[i].nmin << " " << (ok ? "ok" : "MISMATCH") << "\n";
    }
    return all_ok ? kExitOk : kExitUsage;
}

int cmd_encode(const std::string& pattern, int m, const std::string& scheme_name, int n,
               std::uint64_t seed, int m_alg, const std::string& out) {
    FilterPattern f = load_pattern(pattern);
    ShapingScheme scheme = shaping_scheme_from_string(scheme_name);
    Rng rng(seed);
    std::vector<GaussInt> a;
    for (int i = 0; i < n; ++i) a.push_back(rng.next_qam(m));

    std::vector<GaussInt> b;
    if (scheme == ShapingScheme::nested) {
        b = nested_shape_block(a, f, m, m_alg);
    } else {
        ShaperState st(f, scheme, m);
        for (auto s : a) {
            b.push_back((scheme == ShapingScheme::tomlinson ? tomlinson_step({s, m}, st, f)
                                                            : flexible_step({s, m}, st, f))
                            .b);
        }
    }
    auto x = encode_convolve(b, f);
    std::vector<GaussInt> tail(b.end() - f.order(), b.end());
    auto tail_rec = compress_tail(tail, f);

    nlohmann::json j;
    j["version"] = kLibraryVersion;
    j["pattern"] = nlohmann::json::parse(f.to_json_text());
    j["m"] = m;
    j["scheme"] = scheme_name;
    j["n"] = n;
    j["seed"] = seed;
    j["a"] = gauss_array(a);
    j["b"] = gauss_array(b);
    nlohmann::json xs = nlohmann::json::array();
    for (auto v : x.samples) xs.push_back({v.real(), v.imag()});
    j["x"] = xs;
    j["tail_packed"] = hex_bytes(tail_rec.packed);
    j["tail_bits"] = tail_rec.total_payload_bits();
    write_file(out, j.dump(2));
    std::cout << "wrote " << out << " (" << n << " symbols, tail " << tail_rec.total_payload_bits()
              << " payload bits)\n";
    return kExitOk;
}

int cmd_decode(const std::string& in, double snr_db, double sigma2_in, const std::string& decoder,
               std::uint64_t seed, int max_stack, const std::string& out) {
    std::ifstream fi(in);
    if (!fi) throw std::invalid_argument("cannot open " + in);
    nlohmann::json j;
    fi >> j;
    FilterPattern f = FilterPattern::from_json_text(j.at("pattern").dump());
    int m = j.at("m").get<int>();
    ShapingScheme scheme = shaping_scheme_from_string(j.at("scheme").get<std::string>());
    auto a = gauss_from(j.at("a"));
    auto b = gauss_from(j.at("b"));
    std::vector<cplx> x;
    for (const auto& v : j.at("x")) x.push_back({v[0].get<double>(), v[1].get<double>()});
    auto tail = decompress_tail(unhex(j.at("tail_packed").get<std::string>()), f);

    double sigma2 = sigma2_in;
    if (sigma2 < 0) {
        double power = 2.0 * m * m / 3.0;
        sigma2 = snr_db > 0 ? snr_to_sigma2(snr_db, power) : 0.0;
    }
    Rng rng(seed);
    auto y = awgn_add(x, sigma2, rng);

    FanoConfig cfg;
    cfg.sigma2 = sigma2 > 0 ? sigma2 : 1e-6;
    cfg.m = m;
    cfg.max_stack = max_stack;
    cfg.x_range_test = scheme != ShapingScheme::nested;
    DecodeResult res = decoder == "bidir" ? bidirectional_decode(y, f, tail, cfg, b)
                                          : stack_decode(y, f, tail, cfg, b);
    bool frame_ok = false;
    if (res.ok) {
        auto inv = inverse_shape(res.symbols, scheme, f, m);
        frame_ok = inv.ok && inv.symbols == a;
    }
    nlohmann::json rj = nlohmann::json::parse(res.to_json_text());
    rj["frame_ok"] = frame_ok;
    rj["sigma2"] = sigma2;
    std::cout << rj.dump(2) << "\n";
    if (!out.empty()) write_file(out, rj.dump(2));
    return kExitOk;
}

int cmd_simulate(const std::string& config_path, std::vector<double> snr_list,
                 const std::string& decoder, int blocks, int n, int jobs, std::uint64_t seed,
                 const std::string& out, const std::string& csv) {
    SimConfig cfg = config_path.empty() ? SimConfig{} : SimConfig::from_json_file(config_path);
    if (!snr_list.empty()) cfg.snr_db = snr_list;
    if (!decoder.empty()) {
        if (decoder != "bidir" && decoder != "stack") {
            throw std::invalid_argument("decoder must be stack or bidir");
        }
        cfg.decoder = decoder == "bidir" ? DecoderKind::bidir : DecoderKind::stack;
    }
    if (blocks > 0) cfg.blocks = blocks;
    if (n > 0) cfg.n = n;
    if (jobs > 0) cfg.jobs = jobs;
    if (seed) cfg.seed = seed;
    std::cerr << "config: " << cfg.to_json_text() << "\n";
    auto res = run_simulation(cfg);
    std::cout << res.to_csv();
    if (!out.empty()) write_file(out, res.to_json_text());
    if (!csv.empty()) write_file(csv, res.to_csv());
    return kExitOk;
}

int cmd_shaping_gain(const std::string& pattern, std::vector<int> m_algs,
                     std::vector<int> constellations, std::uint64_t symbols, std::uint64_t seed,
                     int block_len, int jobs, const std::string& out) {
    FilterPattern f = load_pattern(pattern);
    auto rows = shaping_gain_experiment(f, m_algs, constellations, symbols, seed, block_len, 2, jobs);
    std::ostringstream os;
    os << "m,m_alg,mean_power,gain_db,symbols\n";
    for (const auto& r : rows) {
        os << r.m << "," << r.m_alg << "," << r.mean_power << "," << r.gain_db << "," << r.symbols
           << "\n";
    }
    std::cout << os.str();
    if (!out.empty()) write_file(out, os.str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"convolutional lattice codes over QAM"};
    app.require_subcommand(1);

    auto* sp = app.add_subcommand("spectrum", "enumerate error events below a radius");
    std::string sp_pattern = "table1:4";
    double sp_dsearch = 24.0, sp_dtail = 8.0;
    int sp_nmax = 16, sp_jobs = 1;
    std::uint64_t sp_budget = 1'000'000'000;
    bool sp_bf = false;
    std::string sp_out, sp_hist;
    sp->add_option("--pattern", sp_pattern, "pattern name, JSON, or .json file");
    sp->add_option("--dsearch", sp_dsearch, "squared search radius");
    sp->add_option("--nmax", sp_nmax, "maximum event length");
    sp->add_flag("--backward-forward", sp_bf, "two-pass tails-database search");
    sp->add_option("--dtail", sp_dtail, "tails database radius (backward-forward)");
    sp->add_option("--budget", sp_budget, "tree node budget");
    sp->add_option("--jobs", sp_jobs, "worker threads");
    sp->add_option("--out", sp_out, "write report JSON here");
    sp->add_option("--hist", sp_hist, "write histogram CSV here");

    auto* md = app.add_subcommand("mindist", "minimum distance with dynamic radius");
    std::string md_pattern = "table1:4";
    int md_nmax = 16, md_jobs = 1;
    std::uint64_t md_budget = 1'000'000'000;
    md->add_option("--pattern", md_pattern, "pattern name, JSON, or .json file");
    md->add_option("--nmax", md_nmax, "maximum event length");
    md->add_option("--budget", md_budget, "tree node budget");
    md->add_option("--jobs", md_jobs, "worker threads");

    auto* ca = app.add_subcommand("cartesian", "weight spectrum of the identity lattice");
    int ca_kmax = 10;
    std::string ca_out;
    ca->add_option("--kmax", ca_kmax, "number of terms");
    ca->add_option("--out", ca_out, "write CSV here");

    auto* vt = app.add_subcommand("verify-table1", "check the built-in high-gain patterns");
    bool vt_long = false;
    int vt_nmax = 16, vt_jobs = 1;
    std::uint64_t vt_budget = 4'000'000'000;
    vt->add_flag("--long", vt_long, "include the L=4 pattern (slow)");
    vt->add_option("--nmax", vt_nmax, "maximum event length");
    vt->add_option("--budget", vt_budget, "tree node budget");
    vt->add_option("--jobs", vt_jobs, "worker threads");

    auto* en = app.add_subcommand("encode", "shape and encode a random block");
    std::string en_pattern = "table1:4", en_scheme = "tomlinson", en_out = "encoded.json";
    int en_m = 8, en_n = 500, en_malg = 100;
    std::uint64_t en_seed = 1;
    en->add_option("--pattern", en_pattern);
    en->add_option("--m", en_m, "constellation half-width");
    en->add_option("--scheme", en_scheme, "tomlinson|flexible|nested");
    en->add_option("--n", en_n, "block length");
    en->add_option("--seed", en_seed);
    en->add_option("--malg", en_malg, "nested shaping beam width");
    en->add_option("--out", en_out);

    auto* de = app.add_subcommand("decode", "decode an encoded block through AWGN");
    std::string de_in = "encoded.json", de_decoder = "stack", de_out;
    double de_snr = -1.0, de_sigma2 = -1.0;
    std::uint64_t de_seed = 2;
    int de_stack = 10000;
    de->add_option("--in", de_in, "encode output file");
    de->add_option("--snr", de_snr, "SNR in dB (noiseless if unset)");
    de->add_option("--sigma2", de_sigma2, "noise variance (overrides --snr)");
    de->add_option("--decoder", de_decoder, "stack|bidir");
    de->add_option("--seed", de_seed, "noise seed");
    de->add_option("--max-stack", de_stack);
    de->add_option("--out", de_out, "write result JSON here");

    auto* si = app.add_subcommand("simulate", "Monte-Carlo frame error rate runs");
    std::string si_config, si_decoder, si_out, si_csv;
    std::vector<double> si_snr;
    int si_blocks = 0, si_n = 0, si_jobs = 0;
    std::uint64_t si_seed = 0;
    si->add_option("--config", si_config, "JSON config file");
    si->add_option("--snr-list", si_snr, "SNR points in dB")->delimiter(',');
    si->add_option("--decoder", si_decoder, "stack|bidir");
    si->add_option("--blocks", si_blocks);
    si->add_option("--n", si_n, "block length");
    si->add_option("--jobs", si_jobs);
    si->add_option("--seed", si_seed);
    si->add_option("--out", si_out, "write result JSON here");
    si->add_option("--csv", si_csv, "write snr_db,fer,mean_comp,max_comp CSV here");

    auto* sg = app.add_subcommand("shaping-gain", "nested shaping gain sweep");
    std::string sg_pattern = "table1:4", sg_out;
    std::vector<int> sg_malg{1, 2, 5, 10, 20, 50, 100};
    std::vector<int> sg_cons{8, 2};
    std::uint64_t sg_symbols = 100000, sg_seed = 1;
    int sg_block = 1000, sg_jobs = 1;
    sg->add_option("--pattern", sg_pattern);
    sg->add_option("--malg", sg_malg, "beam widths")->delimiter(',');
    sg->add_option("--constellations", sg_cons, "M values")->delimiter(',');
    sg->add_option("--symbols", sg_symbols, "minimum symbols per point");
    sg->add_option("--seed", sg_seed);
    sg->add_option("--block", sg_block, "shaping block length");
    sg->add_option("--jobs", sg_jobs);
    sg->add_option("--out", sg_out, "write CSV here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sp->parsed()) {
            return cmd_spectrum(sp_pattern, sp_dsearch, sp_nmax, sp_bf, sp_dtail, sp_budget, sp_jobs,
                                sp_out, sp_hist);
        }
        if (md->parsed()) return cmd_mindist(md_pattern, md_nmax, md_budget, md_jobs);
        if (ca->parsed()) return cmd_cartesian(ca_kmax, ca_out);
        if (vt->parsed()) return cmd_verify_table1(vt_long, vt_nmax, vt_budget, vt_jobs);
        if (en->parsed()) {
            return cmd_encode(en_pattern, en_m, en_scheme, en_n, en_seed, en_malg, en_out);
        }
        if (de->parsed()) {
            return cmd_decode(de_in, de_snr, de_sigma2, de_decoder, de_seed, de_stack, de_out);
        }
        if (si->parsed()) {
            return cmd_simulate(si_config, si_snr, si_decoder, si_blocks, si_n, si_jobs, si_seed,
                                si_out, si_csv);
        }
        if (sg->parsed()) {
            return cmd_shaping_gain(sg_pattern, sg_malg, sg_cons, sg_symbols, sg_seed, sg_block,
                                    sg_jobs, sg_out);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
