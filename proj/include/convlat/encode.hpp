#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "convlat/filter_pattern.hpp"
#include "convlat/gauss.hpp"

namespace convlat {

/// Encoded block x_0..x_{N+L-1}; length is data length plus filter order.
struct Codeword {
    std::vector<cplx> samples;
    int data_len = 0;
};

/// x_n = b_n + sum_l f_l b_{n-l}, with b treated as zero outside its support.
inline Codeword encode_convolve(std::span<const GaussInt> b, const FilterPattern& f) {
    if (f.is_arma()) throw std::invalid_argument("encode_convolve requires a FIR pattern");
    const auto& taps = f.taps();
    const int n = int(b.size());
    const int order = f.order();
    Codeword out;
    out.data_len = n;
    out.samples.assign(std::size_t(n + order), cplx(0.0));
    for (int i = 0; i < n; ++i) {
        cplx bi = b[std::size_t(i)].to_cplx();
        for (int l = 0; l <= order; ++l) out.samples[std::size_t(i + l)] += taps[std::size_t(l)] * bi;
    }
    return out;
}

inline Codeword encode_convolve(std::span<const cplx> b, std::span<const cplx> taps) {
    const int n = int(b.size());
    const int order = int(taps.size()) - 1;
    Codeword out;
    out.data_len = n;
    out.samples.assign(std::size_t(n + order), cplx(0.0));
    for (int i = 0; i < n; ++i)
        for (int l = 0; l <= order; ++l) out.samples[std::size_t(i + l)] += taps[std::size_t(l)] * b[std::size_t(i)];
    return out;
}

/// Band-Toeplitz (N+L) x N generator matrix; columns are shifted tap vectors.
inline Eigen::MatrixXcd generator_matrix(const FilterPattern& f, int n) {
    if (n < 1) throw std::invalid_argument("generator_matrix: N must be >= 1");
    if (f.is_arma()) throw std::invalid_argument("generator_matrix requires a FIR pattern");
    const auto& taps = f.taps();
    const int order = f.order();
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n + order, n);
    for (int col = 0; col < n; ++col)
        for (int l = 0; l <= order; ++l) g(col + l, col) = taps[std::size_t(l)];
    return g;
}

/// x_n = b_n + sum_l g_l b_{n-l} - sum_k h_k x_{n-k}; H must be minimum phase
/// or the recursion is unstable.  Declared here, defined with the root finder.
Codeword arma_encode(std::span<const GaussInt> b, const FilterPattern& f, int tail_len = -1);

/// Average energy of an M-PAM / M^2-QAM constellation.
inline double constellation_energy(int m, bool qam) {
    if (m < 2) throw std::invalid_argument("constellation_energy: M must be >= 2");
    double pam = double(std::int64_t(m) * m - 1) / 3.0;
    return qam ? 2.0 * pam : pam;
}

}  // namespace convlat
