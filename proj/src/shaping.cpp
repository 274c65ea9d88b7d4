#include "convlat/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace convlat {

const char* to_string(ShapingScheme s) {
    switch (s) {
        case ShapingScheme::tomlinson: return "tomlinson";
        case ShapingScheme::flexible: return "flexible";
        case ShapingScheme::nested: return "nested";
    }
    return "?";
}

ShapingScheme shaping_scheme_from_string(const std::string& name) {
    if (name == "tomlinson") return ShapingScheme::tomlinson;
    if (name == "flexible") return ShapingScheme::flexible;
    if (name == "nested") return ShapingScheme::nested;
    throw std::invalid_argument("unknown shaping scheme: " + name);
}

ShaperState::ShaperState(const FilterPattern& f, ShapingScheme scheme, int m)
    : scheme_(scheme), m_(m) {
    if (m < 2) throw std::invalid_argument("ShaperState: M must be >= 2");
    last_b_.assign(std::size_t(std::max(f.order(), 0)), GaussInt{});
    last_x_.assign(std::size_t(std::max(f.denom_order(), 0)), cplx(0.0));
}

cplx ShaperState::feedback(const FilterPattern& f) const {
    const auto& g = f.taps();
    cplx v = 0.0;
    const int lg = f.order();
    for (int l = 1; l <= lg; ++l) {
        // newest symbol is at head_b_-1, so b_{n-l} sits l slots back
        int idx = (head_b_ - l + 2 * lg) % lg;
        v += g[std::size_t(l)] * last_b_[std::size_t(idx)].to_cplx();
    }
    if (f.is_arma()) {
        const auto& h = f.denom();
        const int kh = f.denom_order();
        for (int k = 1; k <= kh; ++k) {
            int idx = (head_x_ - k + 2 * kh) % kh;
            v -= h[std::size_t(k)] * last_x_[std::size_t(idx)];
        }
    }
    return v;
}

void ShaperState::push(GaussInt b, cplx x) {
    if (!last_b_.empty()) {
        last_b_[std::size_t(head_b_)] = b;
        head_b_ = (head_b_ + 1) % int(last_b_.size());
    }
    if (!last_x_.empty()) {
        last_x_[std::size_t(head_x_)] = x;
        head_x_ = (head_x_ + 1) % int(last_x_.size());
    }
}

std::vector<GaussInt> ShaperState::last_symbols() const {
    std::vector<GaussInt> out(last_b_.size());
    const int n = int(last_b_.size());
    for (int i = 0; i < n; ++i) out[std::size_t(i)] = last_b_[std::size_t((head_b_ + i) % n)];
    return out;
}

ShapeStep tomlinson_step(QamSymbol a, ShaperState& state, const FilterPattern& f) {
    cplx fb = state.feedback(f);
    cplx s = a.value.to_cplx() + fb;
    GaussInt k = round_gauss(s / double(2 * a.m));
    GaussInt b = a.value - scale(k, 2 * a.m);
    cplx x = s - cplx(double(2 * a.m), 0.0) * k.to_cplx();
    state.push(b, x);
    return {b, x, k};
}

ShapeStep flexible_step(QamSymbol a, ShaperState& state, const FilterPattern& f) {
    cplx fb = state.feedback(f);
    GaussInt k = round_gauss(fb / 2.0);
    GaussInt b = a.value - scale(k, 2);
    cplx x = b.to_cplx() + fb;
    state.push(b, x);
    return {b, x, k};
}

namespace {

std::int64_t centered_mod(std::int64_t v, std::int64_t m) {
    // representative of v mod 2m in [-m, m)
    std::int64_t two_m = 2 * m;
    std::int64_t r = ((v + m) % two_m + two_m) % two_m;
    return r - m;
}

// energy of the convolution tail after a block, given the last L symbols and
// (for ARMA) the last K outputs, oldest first; ARMA rings down to 1e-12
double block_tail_energy(const FilterPattern& f, const std::vector<cplx>& b_hist,
                         std::vector<cplx> x_hist) {
    const int lg = f.order();
    const int kh = f.denom_order();
    const auto& g = f.taps();
    const auto& h = f.denom();
    double energy = 0.0;
    int cap = f.is_arma() ? 10000 : lg;
    for (int t = 0; t < cap; ++t) {
        cplx v = 0.0;
        // x_{N+t} = sum_{l>t} g_l b_{N+t-l}, data beyond the block is zero
        for (int l = t + 1; l <= lg; ++l) v += g[std::size_t(l)] * b_hist[std::size_t(lg + t - l)];
        for (int k = 1; k <= kh; ++k) {
            int rel = int(x_hist.size()) - k;
            if (rel >= 0) v -= h[std::size_t(k)] * x_hist[std::size_t(rel)];
        }
        if (kh > 0) x_hist.push_back(v);
        energy += std::norm(v);
        if (f.is_arma() && t >= lg && std::abs(v) < 1e-12) break;
    }
    return energy;
}

}  // namespace

std::vector<GaussInt> nested_shape_block(std::span<const GaussInt> a, const FilterPattern& f,
                                         int m, int m_alg, int r_k, NestedStats* stats) {
    if (m_alg < 1) throw std::invalid_argument("nested_shape_block: m_alg must be >= 1");
    if (r_k < 0) throw std::invalid_argument("nested_shape_block: r_k must be >= 0");
    const int n = int(a.size());
    if (n == 0) return {};
    const int lg = f.order();
    const int kh = f.denom_order();
    const double two_m = double(2 * m);

    // arena of chosen symbols, linked by parent index
    struct Node {
        GaussInt b;
        cplx x;
        std::int32_t parent;
    };
    std::vector<Node> arena;
    arena.reserve(std::size_t(n) * std::size_t(m_alg + 1));

    struct Entry {
        double energy = 0.0;
        std::int32_t tail = -1;  // newest arena node
        bool is_tomlinson = false;
    };

    auto history = [&](const Entry& ent, int count, std::vector<cplx>& out_b, std::vector<cplx>& out_x) {
        out_b.assign(std::size_t(lg), cplx(0.0));
        out_x.assign(std::size_t(kh), cplx(0.0));
        std::int32_t cur = ent.tail;
        for (int i = 0; i < count && cur >= 0; ++i) {
            if (i < lg) out_b[std::size_t(i)] = arena[std::size_t(cur)].b.to_cplx();
            if (i < kh) out_x[std::size_t(i)] = arena[std::size_t(cur)].x;
            cur = arena[std::size_t(cur)].parent;
        }
    };

    // lexicographic compare of the k-sequences two entries chose (b = a - 2Mk
    // with shared a, so smaller k means larger b); used only on exact energy
    // ties, so the walk cost is irrelevant
    auto lex_chain_less = [&](std::int32_t ta, std::int32_t tb) {
        std::vector<GaussInt> pa, pb;
        for (std::int32_t c = ta; c >= 0; c = arena[std::size_t(c)].parent) pa.push_back(arena[std::size_t(c)].b);
        for (std::int32_t c = tb; c >= 0; c = arena[std::size_t(c)].parent) pb.push_back(arena[std::size_t(c)].b);
        std::reverse(pa.begin(), pa.end());
        std::reverse(pb.begin(), pb.end());
        for (std::size_t i = 0; i < std::min(pa.size(), pb.size()); ++i) {
            if (pa[i].re != pb[i].re) return pa[i].re > pb[i].re;
            if (pa[i].im != pb[i].im) return pa[i].im > pb[i].im;
        }
        return pa.size() < pb.size();
    };

    std::vector<Entry> beam{Entry{0.0, -1, true}};
    std::vector<cplx> hb, hx;

    struct Cand {
        double energy;
        GaussInt b;
        cplx x;
        std::int32_t parent;
        bool from_tomlinson_path;
        bool is_tomlinson_child;
        bool on_edge;
    };
    std::vector<Cand> cands;

    std::uint64_t edge_hits = 0;
    for (int pos = 0; pos < n; ++pos) {
        cands.clear();
        for (const Entry& ent : beam) {
            history(ent, std::max(lg, kh), hb, hx);
            cplx fb = 0.0;
            const auto& g = f.taps();
            for (int l = 1; l <= lg; ++l) fb += g[std::size_t(l)] * hb[std::size_t(l - 1)];
            if (f.is_arma()) {
                const auto& h = f.denom();
                for (int k = 1; k <= kh; ++k) fb -= h[std::size_t(k)] * hx[std::size_t(k - 1)];
            }
            cplx s = a[std::size_t(pos)].to_cplx() + fb;
            GaussInt k_tom = round_gauss(s / two_m);
            for (std::int64_t dr = -r_k; dr <= r_k; ++dr) {
                for (std::int64_t di = -r_k; di <= r_k; ++di) {
                    GaussInt k{k_tom.re + dr, k_tom.im + di};
                    cplx x = s - two_m * k.to_cplx();
                    GaussInt b = a[std::size_t(pos)] - scale(k, 2 * m);
                    bool edge = std::llabs(dr) == r_k || std::llabs(di) == r_k;
                    cands.push_back({ent.energy + std::norm(x), b, x, ent.tail,
                                     ent.is_tomlinson, dr == 0 && di == 0, edge});
                }
            }
        }
        auto better = [&](const Cand& ca, const Cand& cb) {
            if (ca.energy != cb.energy) return ca.energy < cb.energy;
            if (ca.parent == cb.parent) {
                if (ca.b.re != cb.b.re) return ca.b.re > cb.b.re;  // smaller k first
                return ca.b.im > cb.b.im;
            }
            return lex_chain_less(ca.parent, cb.parent);
        };
        std::size_t keep = std::min<std::size_t>(std::size_t(m_alg), cands.size());
        std::partial_sort(cands.begin(), cands.begin() + std::ptrdiff_t(keep), cands.end(), better);

        std::vector<Entry> next;
        next.reserve(keep + 1);
        std::int32_t tomlinson_tail = -1;
        double tomlinson_energy = 0.0;
        for (const Cand& c : cands) {
            if (c.from_tomlinson_path && c.is_tomlinson_child) {
                arena.push_back({c.b, c.x, c.parent});
                tomlinson_tail = std::int32_t(arena.size()) - 1;
                tomlinson_energy = c.energy;
                break;
            }
        }
        for (std::size_t i = 0; i < keep; ++i) {
            const Cand& c = cands[i];
            if (c.on_edge && !c.is_tomlinson_child) ++edge_hits;
            arena.push_back({c.b, c.x, c.parent});
            next.push_back({c.energy, std::int32_t(arena.size()) - 1, false});
        }
        // protected slot: the pure Tomlinson path always survives
        Entry prot{tomlinson_energy, tomlinson_tail, true};
        next.push_back(prot);
        beam = std::move(next);
    }

    // final selection by full-codeword energy, including the block tail
    auto full_energy = [&](const Entry& ent) {
        std::vector<cplx> rb(std::size_t(lg), cplx(0.0));
        std::vector<cplx> rx(std::size_t(kh), cplx(0.0));
        std::int32_t cur = ent.tail;
        for (int i = 0; i < lg && cur >= 0; ++i) {
            rb[std::size_t(lg - 1 - i)] = arena[std::size_t(cur)].b.to_cplx();
            cur = arena[std::size_t(cur)].parent;
        }
        cur = ent.tail;
        for (int i = 0; i < kh && cur >= 0; ++i) {
            rx[std::size_t(kh - 1 - i)] = arena[std::size_t(cur)].x;
            cur = arena[std::size_t(cur)].parent;
        }
        return ent.energy + block_tail_energy(f, rb, std::move(rx));
    };

    const Entry* winner = nullptr;
    double winner_energy = 0.0;
    double tom_energy = 0.0;
    for (const Entry& ent : beam) {
        double e = full_energy(ent);
        if (ent.is_tomlinson) tom_energy = e;
        if (!winner || e < winner_energy ||
            (e == winner_energy && lex_chain_less(ent.tail, winner->tail))) {
            winner = &ent;
            winner_energy = e;
        }
    }

    std::vector<GaussInt> out(static_cast<std::size_t>(n));
    std::int32_t cur = winner->tail;
    for (int i = n - 1; i >= 0; --i) {
        out[std::size_t(i)] = arena[std::size_t(cur)].b;
        cur = arena[std::size_t(cur)].parent;
    }
    if (stats) {
        stats->window_edge_hits = edge_hits;
        stats->energy = winner_energy;
        stats->tomlinson_energy = tom_energy;
    }
    return out;
}

InverseShapeResult inverse_shape(std::span<const GaussInt> b, ShapingScheme scheme,
                                 const FilterPattern& f, int m) {
    InverseShapeResult res;
    res.symbols.reserve(b.size());
    if (scheme == ShapingScheme::tomlinson || scheme == ShapingScheme::nested) {
        for (auto v : b) res.symbols.push_back({centered_mod(v.re, m), centered_mod(v.im, m)});
        return res;
    }
    // flexible: regenerate the codeword and slice to the QAM grid
    ShaperState st(f, ShapingScheme::flexible, m);
    for (auto v : b) {
        cplx x = v.to_cplx() + st.feedback(f);
        st.push(v, x);
        std::int64_t re = round_to_odd(x.real());
        std::int64_t im = round_to_odd(x.imag());
        if (std::llabs(re) > m - 1 || std::llabs(im) > m - 1) {
            res.ok = false;
            re = std::clamp<std::int64_t>(re, -(m - 1), m - 1);
            im = std::clamp<std::int64_t>(im, -(m - 1), m - 1);
        }
        res.symbols.push_back({re, im});
    }
    return res;
}

namespace {

int twos_complement_bits(std::int64_t v) {
    int w = 1;
    while (!(-(std::int64_t(1) << (w - 1)) <= v && v < (std::int64_t(1) << (w - 1)))) ++w;
    return w;
}

struct BitWriter {
    std::vector<std::uint8_t> bytes;
    int bit = 0;
    void put(std::uint64_t v, int width) {  // little-endian bit order
        for (int i = 0; i < width; ++i) {
            if (bit == 0) bytes.push_back(0);
            if ((v >> i) & 1) bytes.back() |= std::uint8_t(1u << bit);
            bit = (bit + 1) % 8;
        }
    }
};

struct BitReader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
    std::uint64_t get(int width) {
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            std::size_t byte = (pos + std::size_t(i)) / 8;
            int b = int((pos + std::size_t(i)) % 8);
            if (byte >= bytes.size()) throw std::invalid_argument("tail record truncated");
            if ((bytes[byte] >> b) & 1) v |= (1ULL << i);
        }
        pos += std::size_t(width);
        return v;
    }
    std::int64_t get_signed(int width) {
        std::uint64_t v = get(width);
        if (width < 64 && (v & (1ULL << (width - 1)))) v |= ~((1ULL << width) - 1);
        return std::int64_t(v);
    }
};

std::vector<cplx> predictor_coeffs(const FilterPattern& f, int stage) {
    // filter (1 + c z^-1)^(stage-1) for factored patterns, else F truncated
    // to degree stage-1; coefficients p_1..p_{stage-1}
    if (stage <= 1) return {};
    if (f.factored_form()) {
        auto taps = expand_repeated_zero(f.factored_form()->zero_coeff, stage - 1);
        return {taps.begin() + 1, taps.end()};
    }
    const auto& taps = f.taps();
    std::vector<cplx> out;
    for (int j = 1; j < stage && j < int(taps.size()); ++j) out.push_back(taps[std::size_t(j)]);
    return out;
}

GaussInt predict(const FilterPattern& f, std::span<const GaussInt> prev, int stage) {
    auto p = predictor_coeffs(f, stage);
    cplx s = 0.0;
    for (std::size_t j = 0; j < p.size() && j < prev.size(); ++j) {
        s += p[j] * prev[prev.size() - 1 - j].to_cplx();
    }
    return round_gauss(s);
}

constexpr int kWidthFieldBits = 6;

}  // namespace

int TailRecord::total_payload_bits() const {
    int total = 0;
    for (int w : bit_widths) total += 2 * w;
    return total;
}

TailRecord compress_tail(std::span<const GaussInt> raw, const FilterPattern& f) {
    TailRecord rec;
    rec.raw.assign(raw.begin(), raw.end());
    const int stages = int(raw.size());

    std::vector<GaussInt> residuals(static_cast<std::size_t>(stages));
    for (int k = 0; k < stages; ++k) {
        GaussInt pred = predict(f, raw.subspan(0, std::size_t(k)), k + 1);
        residuals[std::size_t(k)] = raw[std::size_t(k)] + pred;
    }
    rec.bit_widths.resize(std::size_t(stages));
    for (int k = 0; k < stages; ++k) {
        int w = std::max(twos_complement_bits(residuals[std::size_t(k)].re),
                         twos_complement_bits(residuals[std::size_t(k)].im));
        if (w >= (1 << kWidthFieldBits)) throw std::overflow_error("tail residual exceeds width field");
        rec.bit_widths[std::size_t(k)] = w;
    }
    BitWriter bw;
    bw.put(std::uint64_t(stages), 8);
    for (int k = 0; k < stages; ++k) bw.put(std::uint64_t(rec.bit_widths[std::size_t(k)]), kWidthFieldBits);
    for (int k = 0; k < stages; ++k) {
        int w = rec.bit_widths[std::size_t(k)];
        bw.put(std::uint64_t(residuals[std::size_t(k)].re) & ((w < 64 ? (1ULL << w) : 0) - 1), w);
        bw.put(std::uint64_t(residuals[std::size_t(k)].im) & ((w < 64 ? (1ULL << w) : 0) - 1), w);
    }
    rec.packed = std::move(bw.bytes);
    return rec;
}

std::vector<GaussInt> decompress_tail(std::span<const std::uint8_t> packed, const FilterPattern& f) {
    BitReader br{packed};
    int stages = int(br.get(8));
    std::vector<int> widths(static_cast<std::size_t>(stages));
    for (int k = 0; k < stages; ++k) widths[std::size_t(k)] = int(br.get(kWidthFieldBits));
    std::vector<GaussInt> out;
    for (int k = 0; k < stages; ++k) {
        int w = widths[std::size_t(k)];
        GaussInt r{br.get_signed(w), br.get_signed(w)};
        GaussInt pred = predict(f, out, k + 1);
        out.push_back(r - pred);
    }
    return out;
}

TailRecord terminate_block(const ShaperState& state, const FilterPattern& f) {
    auto raw = state.last_symbols();
    return compress_tail(raw, f);
}

}  // namespace convlat
