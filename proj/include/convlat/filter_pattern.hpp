#pragma once

#include <complex>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "convlat/gauss.hpp"

namespace convlat {

struct FactoredForm {
    cplx zero_coeff;   // c in (1 + c z^-1)^mult; the zero of the factor is at -c
    int multiplicity;
};

/// Monic filter pattern defining the code lattice.  FIR by default
/// (taps f0..fL with f0 == 1); an optional monic denominator h0..hK makes it
/// an ARMA pattern G(z)/H(z).
class FilterPattern {
  public:
    FilterPattern() : taps_{1.0} {}

    explicit FilterPattern(std::vector<cplx> taps, std::vector<cplx> denom = {});

    /// (1 + c z^-1)^mult, the factored form used by the built-in registry.
    static FilterPattern factored(cplx c, int mult);

    /// built-in registry: "identity", "table1:1" .. "table1:5"
    static FilterPattern from_name(const std::string& name);

    /// JSON description: {"taps": [[re,im],...], "denom": [[re,im],...]} or
    /// {"zero": [r, theta_over_pi], "multiplicity": L, "sign": "+"|"-"}.
    /// The factored form stores the coefficient c = sign * r * e^{j pi theta},
    /// i.e. "sign" is the printed sign in (1 +/- c z^-1)^L.
    static FilterPattern from_json_text(const std::string& text);
    static FilterPattern from_json_file(const std::string& path);

    const std::vector<cplx>& taps() const { return taps_; }
    const std::vector<cplx>& denom() const { return denom_; }
    bool is_arma() const { return denom_.size() > 1; }
    int order() const { return int(taps_.size()) - 1; }  // L
    int denom_order() const { return denom_.empty() ? 0 : int(denom_.size()) - 1; }  // K
    const std::optional<FactoredForm>& factored_form() const { return factored_; }

    double sum_tap_energy() const;  // sum |f_l|^2

    /// F(e^{jw}) (numerator only for ARMA; use response() for G/H)
    cplx numer_at(double w) const;
    cplx denom_at(double w) const;
    cplx response(double w) const { return numer_at(w) / denom_at(w); }

    /// exact bit-pattern equality, for reproducible caches
    friend bool operator==(const FilterPattern& a, const FilterPattern& b) {
        return bits_equal(a.taps_, b.taps_) && bits_equal(a.denom_, b.denom_);
    }
    std::uint64_t hash() const;

    std::string to_json_text() const;

  private:
    static bool bits_equal(const std::vector<cplx>& a, const std::vector<cplx>& b);
    std::vector<cplx> taps_;
    std::vector<cplx> denom_;
    std::optional<FactoredForm> factored_;
};

/// binomial expansion of (1 + c z^-1)^mult
std::vector<cplx> expand_repeated_zero(cplx c, int mult);

}  // namespace convlat
