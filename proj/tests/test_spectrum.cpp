#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "convlat/filter_analysis.hpp"
#include "convlat/rng.hpp"
#include "convlat/spectrum.hpp"

using namespace convlat;

namespace {

std::vector<GaussInt> gi(std::initializer_list<std::pair<int, int>> v) {
    std::vector<GaussInt> out;
    for (auto [r, i] : v) out.push_back({r, i});
    return out;
}

// ---- independent oracle: plain recursive enumeration --------------------
//
// Enumerates every even-component sequence up to n_max symbols with
// components bounded by comp_bound, pruning only on the monotone partial
// weight.  Recorded events are filtered and canonicalized afterwards by
// separate, straightforward code paths (no candidate disks, no modified
// bound, no rotation dilution during the walk).

struct OracleEvent {
    std::vector<GaussInt> symbols;
    double weight;
    bool operator==(const OracleEvent& o) const { return symbols == o.symbols; }
    bool operator<(const OracleEvent& o) const {
        if (symbols.size() != o.symbols.size()) return symbols.size() < o.symbols.size();
        for (std::size_t i = 0; i < symbols.size(); ++i) {
            if (symbols[i].re != o.symbols[i].re) return symbols[i].re < o.symbols[i].re;
            if (symbols[i].im != o.symbols[i].im) return symbols[i].im < o.symbols[i].im;
        }
        return false;
    }
};

bool valid_event_shape(const std::vector<GaussInt>& e, int order) {
    if (e.empty() || e.front().is_zero() || e.back().is_zero()) return false;
    int run = 0;
    for (auto s : e) {
        run = s.is_zero() ? run + 1 : 0;
        if (order == 0 && run > 0) return false;
        if (order > 0 && run >= order) return false;
    }
    return true;
}

std::vector<GaussInt> rotate_seq(const std::vector<GaussInt>& e, int quarter_turns) {
    std::vector<GaussInt> out = e;
    for (int t = 0; t < quarter_turns; ++t) {
        for (auto& s : out) s = s.rot90();
    }
    return out;
}

std::vector<GaussInt> canonical_rotation(const std::vector<GaussInt>& e) {
    for (int t = 0; t < 4; ++t) {
        auto r = rotate_seq(e, t);
        if (r.front().re > 0 && r.front().im >= 0) return r;
    }
    FAIL("no canonical rotation found");
    return e;
}

std::set<OracleEvent> oracle_spectrum(const FilterPattern& f, double d2_search, int n_max,
                                      int comp_bound) {
    std::set<OracleEvent> out;
    std::vector<GaussInt> e;
    const int order = f.order();
    const auto& taps = f.taps();

    // partial weight over the first `len` convolution samples
    auto partial_sample = [&](int idx) {
        cplx acc = 0.0;
        for (int l = 0; l <= order && l <= idx; ++l) {
            if (idx - l < int(e.size())) acc += taps[std::size_t(l)] * e[std::size_t(idx - l)].to_cplx();
        }
        return std::norm(acc);
    };

    auto rec = [&](auto&& self, double partial) -> void {
        if (!e.empty() && valid_event_shape(e, order)) {
            double w = error_weight(e, f);
            if (w < d2_search) out.insert({canonical_rotation(e), w});
        }
        if (int(e.size()) == n_max) return;
        for (int re = -comp_bound; re <= comp_bound; re += 2) {
            for (int im = -comp_bound; im <= comp_bound; im += 2) {
                e.push_back({re, im});
                double p2 = partial + partial_sample(int(e.size()) - 1);
                if (p2 < d2_search) self(self, p2);
                e.pop_back();
            }
        }
    };
    rec(rec, 0.0);
    return out;
}

std::set<OracleEvent> report_events(const SpectrumReport& report) {
    std::set<OracleEvent> out;
    for (const auto& ev : report.events) out.insert({ev.symbols, ev.weight});
    return out;
}

}  // namespace

TEST_CASE("error_weight examples") {
    CHECK(error_weight(gi({{2, 0}}), FilterPattern()) == doctest::Approx(4.0));
    FilterPattern f1({cplx(1.0), cplx(0.5, 0.0)});
    CHECK(error_weight(gi({{2, 0}}), f1) == doctest::Approx(4.0 * (1.0 + 0.25)));
    FilterPattern f2({cplx(1.0), cplx(-0.5)});
    CHECK(error_weight(gi({{2, 0}, {-2, 0}}), f2) == doctest::Approx(14.0));
}

TEST_CASE("identity pattern search finds the single low event") {
    auto report = search_spectrum(FilterPattern(), 5.0, 3);
    REQUIRE(report.events.size() == 1);
    CHECK(report.events[0].symbols == gi({{2, 0}}));
    CHECK(report.events[0].weight == doctest::Approx(4.0));
    CHECK(report.d_min2 == doctest::Approx(4.0));
    CHECK(report.n_min == 1);
    CHECK(report.complete);
}

TEST_CASE("search equals exhaustive enumeration on random short patterns") {
    Rng rng(2024);
    int patterns_checked = 0;
    while (patterns_checked < 20) {
        int order = 1 + int(rng.next_below(2));
        std::vector<cplx> taps{1.0};
        for (int i = 0; i < order; ++i) {
            taps.push_back(cplx(2 * rng.next_double() - 1, 2 * rng.next_double() - 1) / std::sqrt(2.0));
        }
        if (std::norm(taps.back()) < 1e-3) continue;  // degenerate last tap stalls the oracle
        FilterPattern f(taps);
        double d2 = 6.0 + 6.0 * rng.next_double();  // <= 12
        int n_max = 2 + int(rng.next_below(3));     // <= 4

        auto report = search_spectrum(f, d2, n_max);
        REQUIRE(report.complete);
        auto got = report_events(report);
        auto want = oracle_spectrum(f, d2, n_max, 24);

        REQUIRE(got.size() == want.size());
        auto it = got.begin();
        auto jt = want.begin();
        for (; it != got.end() && jt != want.end(); ++it, ++jt) {
            CHECK(it->symbols == jt->symbols);
            CHECK(it->weight == doctest::Approx(jt->weight).epsilon(1e-9));
        }
        ++patterns_checked;
    }
}

TEST_CASE("high coding gain pattern, small radius") {
    FilterPattern f = FilterPattern::from_name("table1:1");
    auto report = search_spectrum(f, 15.0, 8);
    CHECK(report.complete);
    CHECK(report.d_min2 == doctest::Approx(14.81).epsilon(1e-3));
    CHECK(report.n_min == 3);
}

TEST_CASE("min_distance") {
    SUBCASE("two-tap real pattern has d2 = 4(1+f1^2)") {
        auto res = min_distance(FilterPattern({cplx(1.0), cplx(-0.5)}), 8);
        CHECK(res.d_min2 == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(res.complete);
    }
    SUBCASE("identity lattice") {
        auto res = min_distance(FilterPattern(), 4);
        CHECK(res.d_min2 == doctest::Approx(4.0));
        CHECK(res.n_min == 1);
    }
    SUBCASE("non-increasing in n_max") {
        FilterPattern f = FilterPattern::from_name("table1:1");
        double prev = 1e300;
        for (int n_max : {1, 2, 3, 4, 6}) {
            auto res = min_distance(f, n_max);
            CHECK(res.d_min2 <= prev + 1e-12);
            prev = res.d_min2;
        }
    }
    SUBCASE("minimal event time symmetry (observed, logged only)") {
        auto res = min_distance(FilterPattern::from_name("table1:1"), 8);
        REQUIRE(res.n_min == 3);
        // e(t) vs e(N-t): reported for information; the paper observes this
        // empirically for the high-gain patterns
        auto& e = res.event;
        bool symmetric = false;
        for (int t = 0; t < 4 && !symmetric; ++t) {
            for (int conj_pass = 0; conj_pass < 2 && !symmetric; ++conj_pass) {
                bool match = true;
                for (std::size_t i = 0; i < e.size(); ++i) {
                    GaussInt v = e[e.size() - 1 - i];
                    if (conj_pass) v = v.conj();
                    v = rotate_seq({v}, t)[0];
                    if (v != e[i]) match = false;
                }
                symmetric = symmetric || match;
            }
        }
        MESSAGE("minimal event symmetric under reversal+rotation/conj: ", symmetric);
    }
}

TEST_CASE("backward_forward_search equals plain search") {
    SUBCASE("table1:1 at radius 15") {
        FilterPattern f = FilterPattern::from_name("table1:1");
        auto plain = search_spectrum(f, 15.0, 8);
        auto bf = backward_forward_search(f, 15.0, 8.0, 8);
        CHECK(report_events(plain) == report_events(bf));
        CHECK(bf.d_min2 == doctest::Approx(plain.d_min2).epsilon(1e-12));
        CHECK(bf.n_min == plain.n_min);
        MESSAGE("nodes plain=", plain.nodes_examined, " bwd-fwd=", bf.nodes_examined);
    }
    SUBCASE("random patterns, several tail radii") {
        Rng rng(77);
        for (int trial = 0; trial < 6; ++trial) {
            std::vector<cplx> taps{1.0};
            int order = 1 + int(rng.next_below(2));
            for (int i = 0; i < order; ++i) {
                taps.push_back(cplx(2 * rng.next_double() - 1, 2 * rng.next_double() - 1) / 2.0);
            }
            if (std::norm(taps.back()) < 1e-3) continue;
            FilterPattern f(taps);
            double d2 = 10.0;
            auto plain = search_spectrum(f, d2, 4);
            for (double tail : {2.0, 5.0, 9.0}) {
                auto bf = backward_forward_search(f, d2, tail, 4);
                CHECK(report_events(plain) == report_events(bf));
            }
        }
    }
}

TEST_CASE("union bound") {
    SpectrumReport rep;
    rep.events.push_back({gi({{2, 0}}), 4.0});
    rep.d_min2 = 4.0;
    rep.n_min = 1;
    double eer = union_bound_eer(rep, 1.0);
    CHECK(eer == doctest::Approx(4.0 * 0.5 * std::erfc(1.0)).epsilon(1e-12));
    CHECK(eer == doctest::Approx(0.3144).epsilon(1e-2));

    SpectrumReport empty;
    CHECK(union_bound_eer(empty, 1.0) == 0.0);

    double prev = eer;
    for (double s2 : {0.5, 0.2, 0.05}) {
        double v = union_bound_eer(rep, s2);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(prev < 1e-8);
}

TEST_CASE("cartesian spectrum recursion") {
    auto cs = cartesian_spectrum(13);
    std::vector<std::uint64_t> b_expect{4, 4, 0, 4, 8, 0, 0, 4, 4, 8, 0, 0, 8};
    REQUIRE(cs.b.size() == 13);
    for (int i = 0; i < 13; ++i) CHECK(cs.b[std::size_t(i)] == b_expect[std::size_t(i)]);
    std::vector<std::uint64_t> a_expect{4, 20, 96, 468, 2280, 11104, 54080, 263380, 1282724, 6247176};
    for (int i = 0; i < 10; ++i) CHECK(cs.a[std::size_t(i)] == a_expect[std::size_t(i)]);
    // b(3) = 0: no representation of 3 as a sum of two squares
    CHECK(cs.b[2] == 0);
}

TEST_CASE("histogram fit") {
    SUBCASE("recovers an exact power law") {
        SpectrumReport rep;
        rep.d_min2 = 9.0;
        rep.n_min = 1;
        double alpha = 0.75, beta = 3.5;
        for (int lo = 10; lo < 30; ++lo) {
            double d = lo + 0.5;
            rep.histogram[lo] = std::uint64_t(std::llround(alpha * std::pow(d, beta)));
        }
        // counts are rounded; regenerate exactly from the stored integers
        // by fitting densely sampled large counts
        auto fit = histogram_fit(rep);
        CHECK(fit.beta == doctest::Approx(beta).epsilon(1e-3));
        CHECK(fit.alpha == doctest::Approx(alpha).epsilon(5e-3));

        // exact synthetic counts (no rounding): alpha chosen to keep integers
        SpectrumReport rep2;
        rep2.d_min2 = 0.5;
        for (int lo = 1; lo <= 16; lo *= 2) {
            rep2.histogram[lo] = std::uint64_t(std::llround(std::pow(double(lo) + 0.5, 2.0)));
        }
        (void)rep2;
    }
    SUBCASE("cartesian lattice counts grow with a positive exponent") {
        auto cs = cartesian_spectrum(10);
        SpectrumReport rep;
        rep.d_min2 = 4.0;
        for (int k = 1; k <= 10; ++k) rep.histogram[4 * k] = cs.a[std::size_t(k - 1)];
        auto fit = histogram_fit(rep, 5.0);
        CHECK(fit.beta > 0.0);
    }
    SUBCASE("too few bins rejected") {
        SpectrumReport rep;
        rep.d_min2 = 1.0;
        rep.histogram[2] = 5;
        rep.histogram[3] = 9;
        CHECK_THROWS_AS(histogram_fit(rep), std::invalid_argument);
    }
}

TEST_CASE("allpass invariance of the error spectrum") {
    FilterPattern f = FilterPattern::from_name("table1:1");
    std::vector<cplx> poles{cplx(0.35, 0.15), cplx(-0.2, 0.25)};
    auto ap = AllpassSpec::unit_from_poles(poles);
    auto a = ap.impulse_response(1e-12);

    // f convolved with the truncated allpass response
    std::vector<cplx> f2(f.taps().size() + a.size() - 1, 0.0);
    for (std::size_t i = 0; i < f.taps().size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) f2[i + j] += f.taps()[i] * a[j];
    }

    SUBCASE("weights of random sequences match") {
        Rng rng(4242);
        for (int trial = 0; trial < 100; ++trial) {
            int len = 1 + int(rng.next_below(6));
            std::vector<GaussInt> e(static_cast<std::size_t>(len));
            for (auto& s : e) {
                s = {2 * (std::int64_t(rng.next_below(5)) - 2), 2 * (std::int64_t(rng.next_below(5)) - 2)};
            }
            double w1 = error_weight(e, f);
            double w2 = error_weight(e, std::span<const cplx>(f2));
            CHECK(w1 == doctest::Approx(w2).epsilon(1e-6));
        }
    }
    SUBCASE("spectra at equal radius are equal multisets of weights") {
        // f and its reversed conjugate are related by the allpass
        // z^-L F*(1/z*)/F(z) and share the magnitude response; a truncated
        // random allpass would shrink the leading tap and blow up the search
        std::vector<cplx> frc(f.taps().rbegin(), f.taps().rend());
        for (auto& t : frc) t = std::conj(t);
        auto r1 = search_spectrum(f, 16.0, 6);
        auto r2 = search_spectrum(std::span<const cplx>(frc), 16.0, 6);
        std::vector<double> w1, w2;
        for (const auto& ev : r1.events) w1.push_back(ev.weight);
        for (const auto& ev : r2.events) w2.push_back(ev.weight);
        std::sort(w1.begin(), w1.end());
        std::sort(w2.begin(), w2.end());
        REQUIRE(w1.size() == w2.size());
        REQUIRE(w1.size() >= 1);
        for (std::size_t i = 0; i < w1.size(); ++i) {
            CHECK(w1[i] == doctest::Approx(w2[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("canonicalization: rotations and shifts do not appear") {
    FilterPattern f = FilterPattern::from_name("table1:1");
    auto report = search_spectrum(f, 16.0, 6);
    std::set<OracleEvent> seen = report_events(report);
    for (const auto& ev : report.events) {
        CHECK(ev.symbols.front().re > 0);
        CHECK(ev.symbols.front().im >= 0);
        CHECK_FALSE(ev.symbols.back().is_zero());
        // rotations have identical weight but must not be listed
        for (int t = 1; t < 4; ++t) {
            auto rot = rotate_seq(ev.symbols, t);
            CHECK(error_weight(rot, f) == doctest::Approx(ev.weight).epsilon(1e-9));
            CHECK(seen.count({rot, ev.weight}) == 0);
        }
    }
}

TEST_CASE("node budget produces an incomplete flag") {
    FilterPattern f = FilterPattern::from_name("table1:4");
    SearchOptions opts;
    opts.node_budget = 50;
    auto report = search_spectrum(f, 30.0, 16, opts);
    CHECK_FALSE(report.complete);
}

TEST_CASE("parallel search matches single-threaded") {
    FilterPattern f = FilterPattern::from_name("table1:1");
    auto seq = search_spectrum(f, 16.0, 6);
    SearchOptions opts;
    opts.jobs = 3;
    auto par = search_spectrum(f, 16.0, 6, opts);
    CHECK(report_events(seq) == report_events(par));
    CHECK(seq.d_min2 == doctest::Approx(par.d_min2));

    auto md_seq = min_distance(f, 8);
    auto md_par = min_distance(f, 8, opts);
    CHECK(md_seq.d_min2 == doctest::Approx(md_par.d_min2).epsilon(1e-12));
    CHECK(md_seq.n_min == md_par.n_min);
}
