#include "convlat/filter_analysis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace convlat {

std::vector<cplx> poly_roots(std::span<const cplx> taps) {
    if (taps.empty() || taps[0] == cplx(0.0)) {
        throw std::invalid_argument("poly_roots: leading tap must be nonzero");
    }
    // strip trailing zero taps; they contribute zeros at z = 0
    std::size_t deg = taps.size() - 1;
    int zeros_at_origin = 0;
    while (deg > 0 && taps[deg] == cplx(0.0)) {
        --deg;
        ++zeros_at_origin;
    }
    std::vector<cplx> roots(std::size_t(zeros_at_origin), cplx(0.0));
    if (deg == 0) return roots;

    // zeros of sum f_l z^-l are the roots of z^deg + (f1/f0) z^{deg-1} + ... + fdeg/f0
    Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(Eigen::Index(deg), Eigen::Index(deg));
    for (std::size_t i = 0; i + 1 < deg; ++i) comp(Eigen::Index(i + 1), Eigen::Index(i)) = 1.0;
    for (std::size_t i = 0; i < deg; ++i) comp(Eigen::Index(i), Eigen::Index(deg - 1)) = -taps[deg - i] / taps[0];

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(comp, false);
    if (solver.info() != Eigen::Success) {
        throw RootFindingError("companion-matrix eigensolver did not converge");
    }
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) roots.push_back(solver.eigenvalues()[i]);
    return roots;
}

namespace {

std::vector<cplx> poly_from_roots(std::span<const cplx> roots) {
    std::vector<cplx> taps{1.0};
    for (cplx r : roots) {
        std::vector<cplx> next(taps.size() + 1, 0.0);
        for (std::size_t k = 0; k < taps.size(); ++k) {
            next[k] += taps[k];
            next[k + 1] -= taps[k] * r;  // factor (1 - r z^-1)
        }
        taps = std::move(next);
    }
    return taps;
}

bool all_inside(std::span<const cplx> taps, double tol) {
    if (taps.size() <= 1) return true;
    for (cplx r : poly_roots(taps)) {
        if (std::abs(r) >= 1.0 - tol) return false;
    }
    return true;
}

}  // namespace

cplx AllpassSpec::at(double w) const {
    cplx zi = std::polar(1.0, -w);
    cplx num = gain, den = 1.0;
    for (cplx z : zeros) num *= (1.0 - z * zi);
    for (cplx p : poles) den *= (1.0 - p * zi);
    return num / den * std::polar(1.0, w * advance);
}

std::vector<cplx> AllpassSpec::impulse_response(double eps, std::size_t max_len) const {
    if (advance != 0) throw std::invalid_argument("impulse_response: anticausal allpass");
    for (cplx p : poles) {
        if (std::abs(p) >= 1.0) throw std::invalid_argument("impulse_response: unstable pole");
    }
    std::vector<cplx> num = poly_from_roots(zeros);
    for (auto& v : num) v *= gain;
    std::vector<cplx> den = poly_from_roots(poles);

    // long division num/den, stop when |a| stays below eps for a full window
    std::size_t window = std::max<std::size_t>(den.size(), 8);
    std::vector<cplx> a;
    std::size_t quiet = 0;
    for (std::size_t k = 0; k < max_len; ++k) {
        cplx v = k < num.size() ? num[k] : cplx(0.0);
        for (std::size_t j = 1; j < den.size() && j <= k; ++j) v -= den[j] * a[k - j];
        a.push_back(v);
        if (std::abs(v) < eps && k >= num.size()) {
            if (++quiet >= window) break;
        } else {
            quiet = 0;
        }
    }
    while (!a.empty() && std::abs(a.back()) < eps) a.pop_back();
    if (a.empty()) a.push_back(0.0);
    return a;
}

AllpassSpec AllpassSpec::unit_from_poles(std::span<const cplx> poles) {
    AllpassSpec spec;
    for (cplx p : poles) {
        if (std::abs(p) >= 1.0) throw std::invalid_argument("unit_from_poles: pole outside unit circle");
        if (p == cplx(0.0)) continue;
        spec.poles.push_back(p);
        spec.zeros.push_back(1.0 / std::conj(p));
        spec.gain *= -std::conj(p);
    }
    return spec;
}

bool is_minimum_phase(const FilterPattern& f, double tol) {
    if (!all_inside(f.taps(), tol)) return false;
    if (f.is_arma() && !all_inside(f.denom(), tol)) return false;
    return true;
}

std::pair<FilterPattern, AllpassSpec> minimum_phase_equivalent(const FilterPattern& f, double tol) {
    if (f.is_arma()) throw std::invalid_argument("minimum_phase_equivalent: FIR patterns only");
    auto roots = poly_roots(f.taps());
    std::vector<cplx> inside, outside;
    for (cplx r : roots) {
        double m = std::abs(r);
        if (std::abs(m - 1.0) <= tol) {
            throw NotInvertibleError("filter has a zero on the unit circle");
        }
        (m < 1.0 ? inside : outside).push_back(r);
    }
    if (outside.empty()) return {f, AllpassSpec::identity()};

    AllpassSpec spec;
    std::vector<cplx> mp_roots = inside;
    for (cplx r : outside) {
        cplx refl = 1.0 / std::conj(r);
        mp_roots.push_back(refl);
        spec.zeros.push_back(r);
        spec.poles.push_back(refl);
    }
    return {FilterPattern(poly_from_roots(mp_roots)), spec};
}

BackwardTransform backward_code_transform(const FilterPattern& f, std::span<const cplx> y) {
    if (f.is_arma()) throw std::invalid_argument("backward_code_transform: FIR patterns only");
    if (!is_minimum_phase(f)) {
        throw std::invalid_argument("backward_code_transform: pattern must be minimum phase");
    }
    const auto& taps = f.taps();
    const int order = f.order();
    const int ny = int(y.size());
    if (ny < order) throw std::invalid_argument("backward_code_transform: block shorter than filter order");
    const int n_data = ny - order;

    // s = y / F(z), causal and stable; the signal part of s has finite
    // support so no extension beyond the block is needed.
    std::vector<cplx> s(static_cast<std::size_t>(ny));
    for (int n = 0; n < ny; ++n) {
        cplx v = y[std::size_t(n)];
        for (int l = 1; l <= order; ++l) {
            if (n - l >= 0) v -= taps[std::size_t(l)] * s[std::size_t(n - l)];
        }
        s[std::size_t(n)] = v;
    }
    // v(n) = sum_l conj(f_l) s(n+l), then reverse around the data end:
    // y_bwd(m) = v(n_data - 1 - m) for m = 0..ny-1.
    std::vector<cplx> y_bwd(static_cast<std::size_t>(ny));
    for (int m = 0; m < ny; ++m) {
        int n = n_data - 1 - m;
        cplx v = 0.0;
        for (int l = 0; l <= order; ++l) {
            int idx = n + l;
            if (idx >= 0 && idx < ny) v += std::conj(taps[std::size_t(l)]) * s[std::size_t(idx)];
        }
        y_bwd[std::size_t(m)] = v;
    }

    std::vector<cplx> bwd_taps(taps.size());
    std::transform(taps.begin(), taps.end(), bwd_taps.begin(), [](cplx t) { return std::conj(t); });
    return {FilterPattern(std::move(bwd_taps)), std::move(y_bwd)};
}

Codeword arma_encode(std::span<const GaussInt> b, const FilterPattern& f, int tail_len) {
    if (!f.is_arma()) return encode_convolve(b, FilterPattern(f.taps()));
    if (!all_inside(f.denom(), kMinPhaseTol)) {
        throw std::invalid_argument("arma_encode: denominator must be minimum phase");
    }
    const auto& g = f.taps();
    const auto& h = f.denom();
    const int lg = f.order();
    const int kh = f.denom_order();
    const int n = int(b.size());

    auto step = [&](int i, const std::vector<cplx>& x) {
        cplx v = 0.0;
        for (int l = 0; l <= lg; ++l) {
            int j = i - l;
            if (j >= 0 && j < n) v += g[std::size_t(l)] * b[std::size_t(j)].to_cplx();
        }
        for (int k = 1; k <= kh; ++k) {
            int j = i - k;
            if (j >= 0) v -= h[std::size_t(k)] * x[std::size_t(j)];
        }
        return v;
    };

    Codeword out;
    out.data_len = n;
    std::vector<cplx>& x = out.samples;
    int fixed = n + lg + std::max(tail_len, 0);
    for (int i = 0; i < fixed; ++i) x.push_back(step(i, x));
    if (tail_len < 0) {
        // ring the recursion down to 1e-12 of the block peak
        double peak = 0.0;
        for (auto v : x) peak = std::max(peak, std::abs(v));
        const double floor_mag = 1e-12 * std::max(peak, 1.0);
        const std::size_t cap = std::size_t(fixed) + 200000;
        int quiet = 0;
        while (x.size() < cap && quiet < kh + 1) {
            cplx v = step(int(x.size()), x);
            x.push_back(v);
            quiet = std::abs(v) < floor_mag ? quiet + 1 : 0;
        }
        while (x.size() > std::size_t(n) && std::abs(x.back()) < floor_mag) x.pop_back();
    }
    return out;
}

PreEqualization preequalization_filter(const FilterPattern& f_target,
                                       std::span<const cplx> channel_taps,
                                       double tol) {
    if (channel_taps.empty() || channel_taps[0] == cplx(0.0)) {
        throw std::invalid_argument("preequalization_filter: channel leading tap must be nonzero");
    }
    cplx g0 = channel_taps[0];
    std::vector<cplx> monic(channel_taps.begin(), channel_taps.end());
    for (auto& t : monic) t /= g0;

    std::vector<cplx> inside, outside;
    if (monic.size() > 1) {
        for (cplx r : poly_roots(monic)) {
            double m = std::abs(r);
            if (std::abs(m - 1.0) <= tol) {
                throw NotInvertibleError("channel has a zero on the unit circle");
            }
            (m < 1.0 ? inside : outside).push_back(r);
        }
    }

    PreEqualization out;
    std::vector<cplx> mp_roots = inside;
    for (cplx r : outside) {
        cplx refl = 1.0 / std::conj(r);
        mp_roots.push_back(refl);
        out.allpass.zeros.push_back(refl);
        out.allpass.poles.push_back(r);
        out.allpass.gain *= -std::conj(r);
        out.gain *= -std::conj(r);
        out.advance += 1;
    }
    out.allpass.advance = out.advance;
    out.gain *= g0;

    std::vector<cplx> h_mp = poly_from_roots(mp_roots);
    if (h_mp.size() > 1) {
        out.encoder_filter = FilterPattern(f_target.taps(), std::move(h_mp));
    } else {
        out.encoder_filter = f_target;
    }
    return out;
}

}  // namespace convlat
