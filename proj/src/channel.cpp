#include "convlat/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace convlat {

std::vector<cplx> awgn_add(std::span<const cplx> x, double sigma2, Rng& rng) {
    if (sigma2 < 0.0) throw std::invalid_argument("awgn_add: sigma2 must be >= 0");
    std::vector<cplx> y(x.begin(), x.end());
    if (sigma2 == 0.0) return y;
    for (auto& v : y) v += rng.next_cgauss(sigma2);
    return y;
}

double snr_to_sigma2(double snr_db, double signal_power) {
    if (!(signal_power > 0.0)) throw std::invalid_argument("snr_to_sigma2: power must be positive");
    return signal_power / std::pow(10.0, snr_db / 10.0);
}

double sigma2_to_snr_db(double sigma2, double signal_power) {
    return 10.0 * std::log10(signal_power / sigma2);
}

double gaussian_capacity_bits(double snr_db) {
    return std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
}

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// density of U[-M,M) + N(0, s^2), one real dimension
double box_noise_pdf(double y, double m, double s) {
    return (phi((y + m) / s) - phi((y - m) / s)) / (2.0 * m);
}

// differential entropy (bits) of the above by composite Simpson
double box_noise_entropy_bits(double m, double s) {
    const double lo = -m - 10.0 * s;
    const double hi = m + 10.0 * s;
    const int n = 40000;  // even
    const double h = (hi - lo) / n;
    auto f = [&](double y) {
        double p = box_noise_pdf(y, m, s);
        return p > 1e-320 ? -p * std::log2(p) : 0.0;
    };
    double acc = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) acc += f(lo + h * i) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace

double uniform_input_capacity(double snr_db, int m) {
    const double power = 2.0 * m * m / 3.0;
    const double sigma2 = snr_to_sigma2(snr_db, power);
    const double s = std::sqrt(sigma2 / 2.0);  // per-component noise std
    double h_y = box_noise_entropy_bits(double(m), s);
    double h_n = 0.5 * std::log2(M_PI * M_E * sigma2);  // entropy of N(0, sigma2/2), bits
    return 2.0 * (h_y - h_n);
}

double uniform_input_cutoff(double snr_db, int m) {
    const double power = 2.0 * m * m / 3.0;
    const double sigma2 = snr_to_sigma2(snr_db, power);
    // D = (1/4M^2) \int_{-2M}^{2M} (2M-|d|) e^{-d^2/(4 sigma2)} dd, closed form
    const double a = 4.0 * sigma2;
    const double w = 2.0 * m;
    const double integral =
        w * std::sqrt(M_PI * a) * std::erf(w / std::sqrt(a)) - a * (1.0 - std::exp(-w * w / a));
    const double d = integral / (4.0 * m * m);
    return -2.0 * std::log2(d);
}

}  // namespace convlat
