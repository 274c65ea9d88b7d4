#include <doctest.h>

#include <complex>
#include <vector>

#include "convlat/channel.hpp"
#include "convlat/encode.hpp"
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

FilterPattern random_monic(Rng& rng, int order, double max_mag = 1.0) {
    std::vector<cplx> taps{1.0};
    for (int i = 0; i < order; ++i) {
        taps.push_back(max_mag * cplx(2 * rng.next_double() - 1, 2 * rng.next_double() - 1) / std::sqrt(2.0));
    }
    return FilterPattern(taps);
}

}  // namespace

TEST_CASE("encode_convolve basics") {
    auto x = encode_convolve(gi({{2, 0}}), FilterPattern());
    REQUIRE(x.samples.size() == 1);
    CHECK(x.samples[0] == cplx(2.0, 0.0));

    FilterPattern f({cplx(1.0), cplx(-0.5)});
    auto x2 = encode_convolve(gi({{2, 0}, {2, 0}}), f);
    REQUIRE(x2.samples.size() == 3);
    CHECK(x2.samples[0] == cplx(2.0));
    CHECK(x2.samples[1] == cplx(1.0));
    CHECK(x2.samples[2] == cplx(-1.0));
}

TEST_CASE("single-symbol energy is d_a^2 sum |f|^2") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        FilterPattern f = random_monic(rng, 3);
        auto x = encode_convolve(gi({{4, 0}}), f);
        double e = 0;
        for (auto v : x.samples) e += std::norm(v);
        CHECK(e == doctest::Approx(16.0 * f.sum_tap_energy()).epsilon(1e-12));
    }
}

TEST_CASE("generator matrix structure and agreement with convolution") {
    auto g0 = generator_matrix(FilterPattern(), 3);
    CHECK(g0.rows() == 3);
    CHECK(g0.cols() == 3);
    CHECK(g0.isIdentity(0.0));

    cplx f1(0.25, -0.5);
    auto g1 = generator_matrix(FilterPattern({cplx(1.0), f1}), 2);
    REQUIRE(g1.rows() == 3);
    CHECK(g1(0, 0) == cplx(1.0));
    CHECK(g1(1, 0) == f1);
    CHECK(g1(1, 1) == cplx(1.0));
    CHECK(g1(2, 1) == f1);
    CHECK(g1(0, 1) == cplx(0.0));
    CHECK(g1(2, 0) == cplx(0.0));

    CHECK_THROWS_AS(generator_matrix(FilterPattern(), 0), std::invalid_argument);

    Rng rng(11);
    for (int trial = 0; trial < 4; ++trial) {
        FilterPattern f = random_monic(rng, 2 + int(rng.next_below(3)));
        const int n = 16;
        std::vector<GaussInt> b(n);
        for (auto& s : b) s = {std::int64_t(rng.next_below(9)) - 4, std::int64_t(rng.next_below(9)) - 4};
        auto g = generator_matrix(f, n);
        Eigen::VectorXcd bv(n);
        for (int i = 0; i < n; ++i) bv(i) = b[std::size_t(i)].to_cplx();
        Eigen::VectorXcd xv = g * bv;
        auto x = encode_convolve(b, f);
        for (int i = 0; i < int(x.samples.size()); ++i) {
            CHECK(std::abs(xv(i) - x.samples[std::size_t(i)]) < 1e-12);
        }
    }
}

TEST_CASE("is_minimum_phase") {
    CHECK(is_minimum_phase(FilterPattern::from_name("table1:4")));
    CHECK_FALSE(is_minimum_phase(FilterPattern({cplx(1.0), cplx(-1.5)})));
    CHECK(is_minimum_phase(FilterPattern()));
    CHECK_FALSE(is_minimum_phase(FilterPattern({cplx(1.0), cplx(-1.0)})));
}

TEST_CASE("minimum_phase_equivalent") {
    SUBCASE("minimum phase input unchanged") {
        FilterPattern f = FilterPattern::from_name("table1:1");
        auto [fmp, ap] = minimum_phase_equivalent(f);
        CHECK(fmp == f);
        CHECK(ap.is_identity());
    }
    SUBCASE("zero reflection") {
        FilterPattern f({cplx(1.0), cplx(-2.0)});  // zero at 2
        auto [fmp, ap] = minimum_phase_equivalent(f);
        REQUIRE(fmp.taps().size() == 2);
        CHECK(std::abs(fmp.taps()[1] - cplx(-0.5)) < 1e-12);
        // magnitude responses match up to the constant |gain| of A = F/F_mp
        for (int i = 0; i < 64; ++i) {
            double w = 2.0 * M_PI * i / 64.0;
            CHECK(std::abs(f.numer_at(w)) ==
                  doctest::Approx(2.0 * std::abs(fmp.numer_at(w))).epsilon(1e-12));
        }
    }
    SUBCASE("random mixed phase, 1024-point grid") {
        Rng rng(23);
        for (int trial = 0; trial < 4; ++trial) {
            FilterPattern f = random_monic(rng, 3, 1.6);
            std::pair<FilterPattern, AllpassSpec> mp;
            try {
                mp = minimum_phase_equivalent(f);
            } catch (const NotInvertibleError&) {
                continue;
            }
            CHECK(is_minimum_phase(mp.first, 1e-12));
            double gain = std::abs(mp.second.at(0.0));
            for (int i = 0; i < 1024; ++i) {
                double w = 2.0 * M_PI * i / 1024.0;
                double lhs = std::abs(f.numer_at(w));
                double rhs = gain * std::abs(mp.first.numer_at(w));
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
            }
        }
    }
    SUBCASE("unit-circle zero rejected") {
        CHECK_THROWS_AS(minimum_phase_equivalent(FilterPattern({cplx(1.0), cplx(-1.0)})),
                        NotInvertibleError);
    }
}

TEST_CASE("unit allpass from poles") {
    std::vector<cplx> poles{cplx(0.4, 0.2), cplx(-0.1, 0.35)};
    auto ap = AllpassSpec::unit_from_poles(poles);
    for (int i = 0; i < 32; ++i) {
        double w = 2.0 * M_PI * i / 32.0;
        CHECK(std::abs(ap.at(w)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    auto h = ap.impulse_response(1e-12);
    for (int i = 0; i < 16; ++i) {
        double w = 2.0 * M_PI * i / 16.0;
        cplx acc = 0.0;
        cplx z = std::polar(1.0, -w), zp = 1.0;
        for (auto v : h) {
            acc += v * zp;
            zp *= z;
        }
        CHECK(std::abs(acc - ap.at(w)) < 1e-9);
    }
}

TEST_CASE("backward_code_transform") {
    SUBCASE("identity filter reverses") {
        std::vector<cplx> y{{1, 1}, {2, 0}, {3, -1}};
        auto bt = backward_code_transform(FilterPattern(), y);
        REQUIRE(bt.y_bwd.size() == 3);
        CHECK(bt.y_bwd[0] == y[2]);
        CHECK(bt.y_bwd[2] == y[0]);
        CHECK(bt.f_bwd.taps().size() == 1);
    }
    SUBCASE("noiseless codeword maps to the reversed code with conjugate taps") {
        FilterPattern f = FilterPattern::from_name("table1:1");
        Rng rng(5);
        const int n = 40;
        std::vector<GaussInt> b(n);
        for (auto& s : b) s = rng.next_qam(8);
        auto x = encode_convolve(b, f);
        auto bt = backward_code_transform(f, x.samples);
        std::vector<GaussInt> b_rev(b.rbegin(), b.rend());
        auto x_rev = encode_convolve(b_rev, bt.f_bwd);
        REQUIRE(bt.y_bwd.size() == x_rev.samples.size());
        for (std::size_t i = 0; i < bt.y_bwd.size(); ++i) {
            CHECK(std::abs(bt.y_bwd[i] - x_rev.samples[i]) < 1e-9);
        }
    }
    SUBCASE("white noise keeps its power through the transform") {
        FilterPattern f = FilterPattern::from_name("table1:4");
        Rng rng(99);
        const int n = 100000;
        std::vector<cplx> y(n);
        for (auto& v : y) v = rng.next_cgauss(1.0);
        auto bt = backward_code_transform(f, y);
        double p = 0.0;
        int count = 0;
        // skip the block edges where the allpass memory is cut off
        for (int i = 3000; i < n - 3000; ++i) {
            p += std::norm(bt.y_bwd[std::size_t(i)]);
            ++count;
        }
        CHECK(p / count == doctest::Approx(1.0).epsilon(0.01));
    }
    SUBCASE("non minimum phase rejected") {
        std::vector<cplx> y(8, cplx(0.0));
        CHECK_THROWS_AS(backward_code_transform(FilterPattern({cplx(1.0), cplx(-1.5)}), y),
                        std::invalid_argument);
    }
}

TEST_CASE("arma_encode") {
    SUBCASE("H = 1 reduces to FIR") {
        FilterPattern f({cplx(1.0), cplx(0.5, 0.25)});
        auto a = arma_encode(gi({{2, 0}, {-1, 1}}), f);
        auto b = encode_convolve(gi({{2, 0}, {-1, 1}}), f);
        REQUIRE(a.samples.size() == b.samples.size());
        for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
    }
    SUBCASE("pure pole recursion") {
        FilterPattern f({cplx(1.0)}, {cplx(1.0), cplx(-0.5)});
        auto x = arma_encode(gi({{2, 0}}), f, 3);
        REQUIRE(x.samples.size() >= 4);
        CHECK(std::abs(x.samples[0] - cplx(2.0)) < 1e-12);
        CHECK(std::abs(x.samples[1] - cplx(1.0)) < 1e-12);
        CHECK(std::abs(x.samples[2] - cplx(0.5)) < 1e-12);
        CHECK(std::abs(x.samples[3] - cplx(0.25)) < 1e-12);
    }
    SUBCASE("matches truncated FIR expansion of G/H") {
        Rng rng(31);
        FilterPattern g = random_monic(rng, 2, 0.8);
        std::vector<cplx> poles{cplx(0.3, 0.4), cplx(-0.2, 0.1)};
        std::vector<cplx> h{1.0};
        for (cplx p : poles) {
            std::vector<cplx> next(h.size() + 1, 0.0);
            for (std::size_t i = 0; i < h.size(); ++i) {
                next[i] += h[i];
                next[i + 1] -= h[i] * p;
            }
            h = std::move(next);
        }
        FilterPattern arma(g.taps(), h);
        std::vector<GaussInt> b(20);
        for (auto& s : b) s = rng.next_qam(4);
        auto x = arma_encode(b, arma);

        std::vector<cplx> fir;
        {
            std::vector<cplx> num = g.taps();
            num.resize(4000, 0.0);
            for (std::size_t k = 0; k < num.size(); ++k) {
                cplx v = num[k];
                for (std::size_t j = 1; j < h.size() && j <= k; ++j) v -= h[j] * fir[k - j];
                fir.push_back(v);
                if (k > 50 && std::abs(v) < 1e-12) break;
            }
        }
        std::vector<cplx> bc(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) bc[i] = b[i].to_cplx();
        auto ref = encode_convolve(std::span<const cplx>(bc), std::span<const cplx>(fir));
        for (std::size_t i = 0; i < std::min(x.samples.size(), ref.samples.size()); ++i) {
            CHECK(std::abs(x.samples[i] - ref.samples[i]) < 1e-9);
        }
    }
    SUBCASE("unstable denominator rejected") {
        FilterPattern arma({cplx(1.0)}, {cplx(1.0), cplx(-1.4)});
        CHECK_THROWS_AS(arma_encode(gi({{2, 0}}), arma), std::invalid_argument);
    }
}

TEST_CASE("preequalization_filter") {
    FilterPattern f = FilterPattern::from_name("table1:1");
    SUBCASE("identity channel") {
        std::vector<cplx> ch{cplx(1.0)};
        auto pe = preequalization_filter(f, ch);
        CHECK(pe.encoder_filter == f);
        CHECK(pe.allpass.is_identity());
        CHECK(std::abs(pe.gain - cplx(1.0)) < 1e-12);
    }
    SUBCASE("minimum-phase channel folds exactly") {
        std::vector<cplx> ch{cplx(0.5), cplx(0.15)};  // 0.5*(1 + 0.3 z^-1)
        auto pe = preequalization_filter(f, ch);
        for (int i = 0; i < 1024; ++i) {
            double w = 2.0 * M_PI * i / 1024.0;
            cplx hw = ch[0] + ch[1] * std::polar(1.0, -w);
            cplx composed = pe.encoder_filter.response(w) * pe.allpass.at(w) * hw;
            CHECK(std::abs(composed - 0.5 * f.numer_at(w)) < 1e-9);
        }
    }
    SUBCASE("maximum-phase zero reflected into the allpass") {
        std::vector<cplx> ch{cplx(1.0), cplx(-1.25)};  // zero at 1.25
        auto pe = preequalization_filter(f, ch);
        CHECK(pe.advance == 1);
        for (int i = 0; i < 1024; ++i) {
            double w = 2.0 * M_PI * i / 1024.0;
            cplx hw = ch[0] + ch[1] * std::polar(1.0, -w);
            cplx composed = pe.encoder_filter.response(w) * pe.allpass.at(w) * hw;
            CHECK(std::abs(std::abs(composed) - std::abs(pe.gain * f.numer_at(w))) < 1e-9);
        }
        CHECK(is_minimum_phase(pe.encoder_filter));
    }
    SUBCASE("unit-circle channel zero rejected") {
        std::vector<cplx> ch{cplx(1.0), cplx(0.0, 1.0)};
        CHECK_THROWS_AS(preequalization_filter(f, ch), NotInvertibleError);
    }
}

TEST_CASE("constellation energy") {
    CHECK(constellation_energy(2, false) == doctest::Approx(1.0));
    CHECK(constellation_energy(8, true) == doctest::Approx(42.0));
    double sum = 0.0;
    int count = 0;
    for (int re = -7; re <= 7; re += 2) {
        for (int im = -7; im <= 7; im += 2) {
            sum += re * re + im * im;
            ++count;
        }
    }
    CHECK(sum / count == doctest::Approx(constellation_energy(8, true)).epsilon(1e-12));
    CHECK_THROWS_AS(constellation_energy(1, true), std::invalid_argument);
}

TEST_CASE("distance sandwich over 4-QAM pairs of length <= 4") {
    // differences of two 4-QAM sequences have components in {-2, 0, 2}
    Rng rng(17);
    std::vector<FilterPattern> pats{FilterPattern(), FilterPattern::from_name("table1:1"),
                                    random_monic(rng, 1), random_monic(rng, 2)};
    for (const auto& f : pats) {
        double da2 = 1e300, dx2 = 1e300;
        std::vector<GaussInt> e;
        const int vals[3] = {-2, 0, 2};
        auto rec = [&](auto&& self, int depth) -> void {
            if (depth > 0) {
                bool nonzero = false;
                for (auto s : e) {
                    if (!s.is_zero()) nonzero = true;
                }
                if (nonzero) {
                    double na = 0;
                    for (auto s : e) na += double(s.norm2());
                    da2 = std::min(da2, na);
                    dx2 = std::min(dx2, error_weight(e, f));
                }
            }
            if (depth == 4) return;
            for (int r : vals) {
                for (int i : vals) {
                    e.push_back({r, i});
                    self(self, depth + 1);
                    e.pop_back();
                }
            }
        };
        rec(rec, 0);
        double ratio = dx2 / da2;
        CHECK(ratio >= 1.0 - 1e-12);
        CHECK(ratio <= f.sum_tap_energy() + 1e-12);
    }
}

TEST_CASE("volume preservation of the generator matrix") {
    FilterPattern f = FilterPattern::from_name("table1:4");
    double prev = 1e300;
    for (int n : {50, 100, 200}) {
        auto g = generator_matrix(f, n);
        Eigen::MatrixXcd gram = g.adjoint() * g;
        Eigen::LLT<Eigen::MatrixXcd> llt(gram);
        REQUIRE(llt.info() == Eigen::Success);
        double logdet = 0.0;
        Eigen::MatrixXcd lmat = llt.matrixL();
        for (int i = 0; i < gram.rows(); ++i) logdet += 2.0 * std::log(std::abs(lmat(i, i)));
        double v = std::exp(logdet / (2.0 * n));
        CHECK(v > 1.0);
        CHECK(v < 1.0 + 16.0 / n);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("filter pattern JSON round trips") {
    auto f = FilterPattern::from_json_text(R"({"zero": [0.98, 0.09], "multiplicity": 3})");
    CHECK(f == FilterPattern::from_name("table1:4"));
    auto fm = FilterPattern::from_json_text(R"({"zero": [0.5, 0.0], "multiplicity": 1, "sign": "-"})");
    CHECK(std::abs(fm.taps()[1] - cplx(-0.5)) < 1e-15);
    auto ft = FilterPattern::from_json_text(R"({"taps": [[1,0],[0.25,-0.5]]})");
    CHECK(ft.taps()[1] == cplx(0.25, -0.5));
    CHECK_THROWS(FilterPattern::from_json_text(R"({"taps": [[0.5,0]]})"));  // non-monic
    CHECK_THROWS(FilterPattern::from_name("table1:9"));
}

TEST_CASE("rounding conventions") {
    CHECK(round_half_up(0.5) == 1);
    CHECK(round_half_up(-0.5) == 0);
    CHECK(round_half_up(1.5) == 2);
    CHECK(round_half_up(-1.5) == -1);
    CHECK(round_to_odd(0.0) == 1);  // midpoint goes toward +inf
    CHECK(round_to_odd(0.9) == 1);
    CHECK(round_to_odd(-0.9) == -1);
    CHECK(round_to_odd(2.1) == 3);
    CHECK(round_to_odd(1.999) == 1);
}
