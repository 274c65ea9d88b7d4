#pragma once

#include <cstdint>
#include <cmath>

#include "convlat/gauss.hpp"

namespace convlat {

/// splitmix64, used to derive independent per-block streams from a master
/// seed so that results do not depend on thread scheduling.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s = h ^ (a * 0xd1342543de82ef95ULL + 1);
    h = splitmix64(s);
    s = h ^ (b * 0xaf251af3b0f025b5ULL + 1);
    return splitmix64(s);
}

/// xoshiro256** with fully pinned output; the standard distributions are
/// implementation-defined, so Gaussians are generated here by Box-Muller to
/// keep runs reproducible across compilers.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// uniform in [0,1)
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    /// standard normal (Box-Muller; one value cached)
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// circularly symmetric complex Gaussian with total variance sigma2
    cplx next_cgauss(double sigma2) {
        double s = std::sqrt(sigma2 / 2.0);
        return {s * next_normal(), s * next_normal()};
    }

    /// random QAM symbol for constellation half-width m
    GaussInt next_qam(int m) {
        auto pick = [&] { return 2 * std::int64_t(next_below(std::uint64_t(m))) - (m - 1); };
        return {pick(), pick()};
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4] = {};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace convlat
