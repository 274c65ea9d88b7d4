#include "convlat/filter_pattern.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace convlat {

namespace {

constexpr double kMonicTol = 0.0;  // f0 must be exactly 1

void check_monic(const std::vector<cplx>& taps, const char* what) {
    if (taps.empty() || taps[0] != cplx(1.0, 0.0)) {
        throw std::invalid_argument(std::string(what) + " must be monic (leading tap 1)");
    }
    (void)kMonicTol;
}

}  // namespace

FilterPattern::FilterPattern(std::vector<cplx> taps, std::vector<cplx> denom)
    : taps_(std::move(taps)), denom_(std::move(denom)) {
    check_monic(taps_, "filter pattern");
    if (!denom_.empty()) {
        check_monic(denom_, "filter pattern denominator");
        if (denom_.size() == 1) denom_.clear();
    }
}

std::vector<cplx> expand_repeated_zero(cplx c, int mult) {
    std::vector<cplx> taps{1.0};
    for (int i = 0; i < mult; ++i) {
        std::vector<cplx> next(taps.size() + 1, 0.0);
        for (std::size_t k = 0; k < taps.size(); ++k) {
            next[k] += taps[k];
            next[k + 1] += taps[k] * c;
        }
        taps = std::move(next);
    }
    return taps;
}

FilterPattern FilterPattern::factored(cplx c, int mult) {
    if (mult < 0) throw std::invalid_argument("multiplicity must be >= 0");
    FilterPattern f(expand_repeated_zero(c, mult));
    f.factored_ = FactoredForm{c, mult};
    return f;
}

FilterPattern FilterPattern::from_name(const std::string& name) {
    if (name == "identity") return FilterPattern();
    // registry of the high coding gain patterns, printed "+" sign
    struct Row { double r, theta_over_pi; int mult; };
    static const Row rows[5] = {
        {0.90, 1.0 / 8.0, 2},
        {0.98, 1.0 / 8.0, 2},
        {0.95, 1.0 / 8.0, 3},
        {0.98, 0.09, 3},
        {0.95, 0.08, 4},
    };
    if (name.rfind("table1:", 0) == 0) {
        int idx = std::stoi(name.substr(7));
        if (idx < 1 || idx > 5) throw std::invalid_argument("table1 index out of range: " + name);
        const Row& row = rows[idx - 1];
        cplx c = std::polar(row.r, M_PI * row.theta_over_pi);
        return factored(c, row.mult);
    }
    throw std::invalid_argument("unknown pattern name: " + name);
}

namespace {

cplx json_cplx(const nlohmann::json& v) {
    if (!v.is_array() || v.size() != 2) throw std::invalid_argument("complex value must be [re, im]");
    return {v[0].get<double>(), v[1].get<double>()};
}

std::vector<cplx> json_taps(const nlohmann::json& arr) {
    std::vector<cplx> out;
    for (const auto& v : arr) out.push_back(json_cplx(v));
    return out;
}

}  // namespace

FilterPattern FilterPattern::from_json_text(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    if (j.is_string()) return from_name(j.get<std::string>());
    if (j.contains("zero")) {
        const auto& z = j.at("zero");
        double r = z.at(0).get<double>();
        double theta = z.at(1).get<double>();
        int mult = j.at("multiplicity").get<int>();
        double sign = 1.0;
        if (j.contains("sign")) {
            std::string s = j["sign"].get<std::string>();
            if (s == "-") sign = -1.0;
            else if (s != "+") throw std::invalid_argument("sign must be '+' or '-'");
        }
        return factored(sign * std::polar(r, M_PI * theta), mult);
    }
    if (j.contains("factored")) {
        // round trip of to_json_text(); the factored form also selects the
        // tail predictor, so it must survive serialization
        cplx c = json_cplx(j["factored"].at("coeff"));
        return factored(c, j["factored"].at("multiplicity").get<int>());
    }
    std::vector<cplx> taps = json_taps(j.at("taps"));
    std::vector<cplx> denom;
    if (j.contains("denom")) denom = json_taps(j["denom"]);
    return FilterPattern(std::move(taps), std::move(denom));
}

FilterPattern FilterPattern::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pattern file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

double FilterPattern::sum_tap_energy() const {
    double s = 0.0;
    for (auto t : taps_) s += std::norm(t);
    return s;
}

cplx FilterPattern::numer_at(double w) const {
    cplx z = std::polar(1.0, -w), zp = 1.0, acc = 0.0;
    for (auto t : taps_) {
        acc += t * zp;
        zp *= z;
    }
    return acc;
}

cplx FilterPattern::denom_at(double w) const {
    if (denom_.empty()) return 1.0;
    cplx z = std::polar(1.0, -w), zp = 1.0, acc = 0.0;
    for (auto t : denom_) {
        acc += t * zp;
        zp *= z;
    }
    return acc;
}

bool FilterPattern::bits_equal(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    if (a.size() != b.size()) return false;
    return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(cplx)) == 0;
}

std::uint64_t FilterPattern::hash() const {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    auto mix_vec = [&](const std::vector<cplx>& v) {
        for (auto t : v) {
            std::uint64_t bits[2];
            std::memcpy(bits, &t, sizeof(bits));
            h = hash_mix(h, bits[0]);
            h = hash_mix(h, bits[1]);
        }
        h = hash_mix(h, v.size());
    };
    mix_vec(taps_);
    mix_vec(denom_);
    return h;
}

std::string FilterPattern::to_json_text() const {
    nlohmann::json j;
    auto dump_taps = [](const std::vector<cplx>& v) {
        nlohmann::json arr = nlohmann::json::array();
        for (auto t : v) arr.push_back({t.real(), t.imag()});
        return arr;
    };
    j["taps"] = dump_taps(taps_);
    if (is_arma()) j["denom"] = dump_taps(denom_);
    if (factored_) {
        j["factored"] = {{"coeff", {factored_->zero_coeff.real(), factored_->zero_coeff.imag()}},
                         {"multiplicity", factored_->multiplicity}};
    }
    return j.dump();
}

}  // namespace convlat
