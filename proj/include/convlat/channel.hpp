#pragma once

#include <span>
#include <vector>

#include "convlat/gauss.hpp"
#include "convlat/rng.hpp"

namespace convlat {

/// y_n = x_n + w_n with circularly symmetric complex Gaussian noise of total
/// variance sigma2 (sigma2/2 per component).
std::vector<cplx> awgn_add(std::span<const cplx> x, double sigma2, Rng& rng);

/// sigma2 = signal_power / 10^(snr_db/10)
double snr_to_sigma2(double snr_db, double signal_power);
double sigma2_to_snr_db(double sigma2, double signal_power);

/// log2(1 + P/sigma2) at the given SNR (complex channel, Gaussian input)
double gaussian_capacity_bits(double snr_db);

/// Mutual information of the complex AWGN channel with input uniform on the
/// [-M, M)^2 box, in bits per complex symbol.  SNR is referenced to the box
/// power 2M^2/3.  Numerical integration, accurate to well under 0.02 bits.
double uniform_input_capacity(double snr_db, int m = 8);

/// Cutoff rate R0 of the same channel/input, bits per complex symbol.
double uniform_input_cutoff(double snr_db, int m = 8);

/// SNR (dB) where a monotone rate curve crosses the target rate.
template <typename F>
double solve_snr_for_rate(F rate_fn, double target_bits, double lo_db, double hi_db,
                          double tol_db = 1e-4) {
    double flo = rate_fn(lo_db) - target_bits;
    for (int it = 0; it < 200 && hi_db - lo_db > tol_db; ++it) {
        double mid = 0.5 * (lo_db + hi_db);
        double fmid = rate_fn(mid) - target_bits;
        if ((fmid < 0) == (flo < 0)) {
            lo_db = mid;
            flo = fmid;
        } else {
            hi_db = mid;
        }
    }
    return 0.5 * (lo_db + hi_db);
}

}  // namespace convlat
