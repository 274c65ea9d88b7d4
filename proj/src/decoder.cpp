#include "convlat/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "convlat/filter_analysis.hpp"
#include "convlat/minmax_heap.hpp"

namespace convlat {

double fano_bias(double sigma2, bool complex_case) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("fano_bias: sigma2 must be positive");
    return sigma2 * std::log((complex_case ? 4.0 : 2.0) / (M_PI * sigma2));
}

double branch_metric(cplx y_n, GaussInt b, std::span<const GaussInt> prev, const FilterPattern& f,
                     double bias) {
    const auto& taps = f.taps();
    cplx p = 0.0;
    for (int l = 1; l <= f.order() && l <= int(prev.size()); ++l) {
        p += taps[std::size_t(l)] * prev[std::size_t(l - 1)].to_cplx();
    }
    return bias - std::norm(y_n - (b.to_cplx() + p));
}

std::uint64_t MergeKeyIndex::key_hash(int position, std::span<const GaussInt> window) {
    std::uint64_t h = hash_mix(0x6a09e667f3bcc908ULL, std::uint64_t(position));
    for (auto g : window) {
        h = hash_mix(h, std::uint64_t(g.re));
        h = hash_mix(h, std::uint64_t(g.im));
    }
    return h;
}

void MergeKeyIndex::insert(int position, std::span<const GaussInt> window, std::uint64_t id) {
    auto& bucket = buckets_[key_hash(position, window)];
    bucket.push_back({id, position, {window.begin(), window.end()}});
    ++count_;
}

void MergeKeyIndex::erase(int position, std::span<const GaussInt> window, std::uint64_t id) {
    auto it = buckets_.find(key_hash(position, window));
    if (it == buckets_.end()) return;
    auto& v = it->second;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i].id == id && v[i].position == position &&
            std::equal(v[i].window.begin(), v[i].window.end(), window.begin(), window.end())) {
            v[i] = std::move(v.back());
            v.pop_back();
            --count_;
            break;
        }
    }
    if (v.empty()) buckets_.erase(it);
}

std::vector<std::uint64_t> MergeKeyIndex::query(int position,
                                                std::span<const GaussInt> window) const {
    std::vector<std::uint64_t> out;
    auto it = buckets_.find(key_hash(position, window));
    if (it == buckets_.end()) return out;
    for (const auto& slot : it->second) {
        if (slot.position == position &&
            std::equal(slot.window.begin(), slot.window.end(), window.begin(), window.end())) {
            out.push_back(slot.id);
        }
    }
    return out;
}

std::uint32_t SymbolMemory::alloc(GaussInt sym, std::uint32_t parent) {
    std::uint32_t h;
    if (!freelist_.empty()) {
        h = freelist_.back();
        freelist_.pop_back();
        nodes_[h] = {sym, parent, 1};
    } else {
        h = std::uint32_t(nodes_.size());
        nodes_.push_back({sym, parent, 1});
    }
    if (parent != npos) ++nodes_[parent].refcount;
    ++allocs_;
    return h;
}

void SymbolMemory::add_ref(std::uint32_t h) {
    if (h != npos) ++nodes_[h].refcount;
}

void SymbolMemory::release(std::uint32_t h) {
    while (h != npos) {
        Node& n = nodes_[h];
        if (--n.refcount > 0) return;
        std::uint32_t parent = n.parent;
        freelist_.push_back(h);
        ++frees_;
        h = parent;
    }
}

void SymbolMemory::last_window(std::uint32_t h, int k, std::vector<GaussInt>& out) const {
    out.assign(std::size_t(k), GaussInt{});
    for (int i = 0; i < k && h != npos; ++i) {
        out[std::size_t(i)] = nodes_[h].sym;
        h = nodes_[h].parent;
    }
}

std::vector<GaussInt> SymbolMemory::path(std::uint32_t h) const {
    std::vector<GaussInt> out;
    while (h != npos) {
        out.push_back(nodes_[h].sym);
        h = nodes_[h].parent;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

namespace {

struct HeapItem {
    double score;
    std::int32_t len;
    std::uint64_t seq;
    std::uint32_t id;
};

// Total order of stack entries: higher score is better; on score ties the
// longer path is worse (evicted first), then the later insertion.
struct ItemWorse {
    bool operator()(const HeapItem& a, const HeapItem& b) const {
        if (a.score != b.score) return a.score < b.score;
        if (a.len != b.len) return a.len > b.len;
        return a.seq > b.seq;
    }
};

struct Entry {
    std::uint32_t sym = SymbolMemory::npos;
    std::int32_t len = 0;
    std::uint64_t merge_hash = 0;
    bool true_prefix = false;
};

class EntryPool {
  public:
    std::uint32_t alloc() {
        if (!freelist_.empty()) {
            std::uint32_t id = freelist_.back();
            freelist_.pop_back();
            return id;
        }
        entries_.push_back({});
        return std::uint32_t(entries_.size() - 1);
    }
    void free(std::uint32_t id) { freelist_.push_back(id); }
    Entry& operator[](std::uint32_t id) { return entries_[id]; }
    const Entry& operator[](std::uint32_t id) const { return entries_[id]; }

  private:
    std::vector<Entry> entries_;
    std::vector<std::uint32_t> freelist_;
};

// Hash buckets of live stack entries keyed by (position, state window).
// Queries verify candidates by full comparison, so hash collisions can never
// produce a false merge.
class MergeIndex {
  public:
    void insert(std::uint64_t h, std::uint32_t id) { buckets_[h].push_back(id); }
    void erase(std::uint64_t h, std::uint32_t id) {
        auto it = buckets_.find(h);
        if (it == buckets_.end()) return;
        auto& v = it->second;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] == id) {
                v[i] = v.back();
                v.pop_back();
                break;
            }
        }
        if (v.empty()) buckets_.erase(it);
    }
    const std::vector<std::uint32_t>* find(std::uint64_t h) const {
        auto it = buckets_.find(h);
        return it == buckets_.end() ? nullptr : &it->second;
    }

  private:
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets_;
};

struct Successor {
    GaussInt b;
    double metric;
};

/// One direction of the tree search.  The backward decoder is the same
/// machine running on the allpass-transformed block with the conjugate
/// pattern, the reversed known tail forced at the head, and zeros forced past
/// the data end (the block boundary samples).
class StackDecoder {
  public:
    enum class XMode { direct, delayed };

    StackDecoder(std::vector<cplx> y, std::vector<cplx> taps, int n_data, int total_depth,
                 std::vector<GaussInt> forced_head, std::vector<GaussInt> forced_tail, XMode xmode,
                 std::vector<cplx> xtaps, const FanoConfig& cfg, std::vector<GaussInt> truth,
                 bool backward, int merge_len)
        : y_(std::move(y)),
          taps_(std::move(taps)),
          xtaps_(std::move(xtaps)),
          order_(int(taps_.size()) - 1),
          n_data_(n_data),
          total_depth_(total_depth),
          forced_head_(std::move(forced_head)),
          forced_tail_(std::move(forced_tail)),
          xmode_(xmode),
          cfg_(cfg),
          truth_(std::move(truth)),
          backward_(backward),
          merge_len_(merge_len),
          bias_(cfg.resolved_bias()),
          heap_(ItemWorse{}) {
        if (int(y_.size()) < total_depth_) throw std::invalid_argument("decoder: block too short");
        heap_.reserve(std::size_t(cfg.max_stack) + 1);
        std::uint32_t id = pool_.alloc();
        pool_[id] = {SymbolMemory::npos, 0, 0, !truth_.empty()};
        if (merge_len_ > 0) {
            pool_[id].merge_hash = merge_hash_of(SymbolMemory::npos, 0);
            index_.insert(pool_[id].merge_hash, id);
        }
        heap_.push({0.0, 0, seq_++, id});
    }

    bool alive() const { return !heap_.empty() && !done_; }
    bool done() const { return done_; }
    const std::vector<GaussInt>& result() const { return result_; }
    double result_score() const { return result_score_; }
    DecodeStats& stats() { return stats_; }
    const SymbolMemory& memory() const { return mem_; }
    int n_data() const { return n_data_; }
    const std::vector<GaussInt>& committed() const { return committed_; }

    struct Extracted {
        double score = 0.0;
        int len = 0;
        std::uint32_t id = 0;
        std::uint32_t sym = SymbolMemory::npos;
    };

    /// Pop the best path.  Returns false when the stack is empty.  A full
    /// length path finishes the decoder; otherwise the entry stays alive
    /// until extend() or drop_extracted().
    bool extract(Extracted& out) {
        if (heap_.empty() || done_) return false;
        HeapItem item = heap_.pop_top();
        Entry& e = pool_[item.id];
        ++stats_.entries_processed;
        if (merge_len_ > 0) index_.erase(e.merge_hash, item.id);
        out = {item.score, int(item.len), item.id, e.sym};
        if (item.len == total_depth_) {
            finish(e.sym, item.score);
            release_entry(item.id);
            out.sym = SymbolMemory::npos;
        }
        return true;
    }

    void extend(const Extracted& ex) {
        if (done_) return;
        successors(ex, succ_);
        if (succ_.empty()) {
            ++stats_.empty_successor_drops;
            if (pool_[ex.id].true_prefix) stats_.cpl = true;
            release_entry(ex.id);
            return;
        }
        const std::int32_t child_len = ex.len + 1;
        const bool parent_true = pool_[ex.id].true_prefix;
        for (const Successor& s : succ_) {
            double score = ex.score + s.metric;
            if (int(heap_.size()) >= cfg_.max_stack) {
                HeapItem incoming{score, child_len, seq_, 0};
                if (!ItemWorse{}(heap_.bottom(), incoming)) {
                    ++stats_.insert_rejects;
                    if (parent_true && is_true_child(ex.len, s.b)) stats_.cpl = true;
                    continue;
                }
                evict_bottom();
            }
            std::uint32_t cid = pool_.alloc();
            Entry& ce = pool_[cid];
            ce.sym = mem_.alloc(s.b, ex.sym);
            ce.len = child_len;
            ce.true_prefix = parent_true && is_true_child(ex.len, s.b);
            if (merge_len_ > 0) {
                ce.merge_hash = merge_hash_of(ce.sym, child_len);
                index_.insert(ce.merge_hash, cid);
            } else {
                ce.merge_hash = 0;
            }
            heap_.push({score, child_len, seq_++, cid});
            stats_.max_occupancy = std::max(stats_.max_occupancy, heap_.size());
        }
        if (cfg_.path_memory_depth > 0 && child_len > cfg_.path_memory_depth) {
            commit_decisions(ex.sym, child_len);
        }
        release_entry(ex.id);
    }

    /// Forward-coordinate merge key of a path: the window covers block
    /// positions [p - merge_len, p).
    void key_of(std::uint32_t sym, int len, int& position, std::vector<GaussInt>& window) const {
        mem_.last_window(sym, merge_len_, window);
        if (backward_) {
            position = n_data_ + merge_len_ - len;
        } else {
            position = len;
            std::reverse(window.begin(), window.end());
        }
    }

    std::uint64_t merge_hash_of(std::uint32_t sym, int len) const {
        int position;
        key_of(sym, len, position, hash_win_);
        std::uint64_t h = hash_mix(0x6a09e667f3bcc908ULL, std::uint64_t(position));
        for (auto g : hash_win_) {
            h = hash_mix(h, std::uint64_t(g.re));
            h = hash_mix(h, std::uint64_t(g.im));
        }
        return h;
    }

    /// Entry matching the given forward-coordinate key, or npos.
    std::uint32_t match(std::uint64_t hash, int position, const std::vector<GaussInt>& window,
                        std::vector<GaussInt>& scratch) const {
        const auto* bucket = index_.find(hash);
        if (!bucket) return SymbolMemory::npos;
        for (std::uint32_t id : *bucket) {
            const Entry& e = pool_[id];
            int pos2;
            key_of(e.sym, e.len, pos2, scratch);
            if (pos2 == position && scratch == window) return id;
        }
        return SymbolMemory::npos;
    }

    const Entry& entry(std::uint32_t id) const { return pool_[id]; }
    std::vector<GaussInt> path_of(std::uint32_t sym) const { return mem_.path(sym); }

    void drop_extracted(const Extracted& ex) {
        if (!done_) release_entry(ex.id);
    }

    void finalize_stats() {
        stats_.symmem_allocs = mem_.allocs();
        stats_.symmem_frees = mem_.frees();
        stats_.symmem_live_at_end = mem_.live();
    }

  private:
    void finish(std::uint32_t sym, double score) {
        done_ = true;
        result_score_ = score;
        result_ = mem_.path(sym);
        result_.resize(std::size_t(n_data_));  // strip forced boundary zeros
    }

    void release_entry(std::uint32_t id) {
        if (pool_[id].sym != SymbolMemory::npos) mem_.release(pool_[id].sym);
        pool_.free(id);
    }

    void evict_bottom() {
        HeapItem worst = heap_.pop_bottom();
        Entry& e = pool_[worst.id];
        if (e.true_prefix) stats_.cpl = true;
        if (merge_len_ > 0) index_.erase(e.merge_hash, worst.id);
        ++stats_.evictions;
        release_entry(worst.id);
    }

    bool is_true_child(int depth, GaussInt b) const {
        if (truth_.empty()) return false;
        if (depth >= int(truth_.size())) return b.is_zero();
        return truth_[std::size_t(depth)] == b;
    }

    std::optional<GaussInt> forced_at(int depth) const {
        if (depth < int(forced_head_.size())) return forced_head_[std::size_t(depth)];
        int from_tail = depth - (total_depth_ - int(forced_tail_.size()));
        if (from_tail >= 0) return forced_tail_[std::size_t(from_tail)];
        return std::nullopt;
    }

    cplx predicted(std::uint32_t sym, int depth) {
        mem_.last_window(sym, std::max(order_, 1), win_);
        cplx p = 0.0;
        for (int l = 1; l <= order_ && l <= depth; ++l) {
            p += taps_[std::size_t(l)] * win_[std::size_t(l - 1)].to_cplx();
        }
        return p;
    }

    void successors(const Extracted& ex, std::vector<Successor>& out) {
        out.clear();
        const int depth = ex.len;
        const cplx p = predicted(ex.sym, depth);
        const cplx yd = y_[std::size_t(depth)];
        auto metric_of = [&](GaussInt b) { return bias_ - std::norm(yd - (b.to_cplx() + p)); };

        if (auto forced = forced_at(depth)) {
            if (x_ok(depth, *forced, ex.sym, p)) out.push_back({*forced, metric_of(*forced)});
            return;
        }

        cand_.clear();
        if (cfg_.x_range_test && xmode_ == XMode::direct && depth < n_data_) {
            // x = b + p componentwise in [-M, M): exactly M odd values per axis
            const double m = double(cfg_.m);
            std::int64_t re0 = first_odd_at_least(-m - p.real());
            std::int64_t im0 = first_odd_at_least(-m - p.imag());
            for (std::int64_t a = re0; double(a) + p.real() < m; a += 2) {
                for (std::int64_t b = im0; double(b) + p.imag() < m; b += 2) {
                    cand_.push_back({a, b});
                }
            }
        } else if (cfg_.x_range_test && xmode_ == XMode::delayed && depth >= order_) {
            delayed_box_candidates(ex.sym);
        } else {
            GaussInt c{round_to_odd(yd.real() - p.real()), round_to_odd(yd.imag() - p.imag())};
            for (std::int64_t a = -cfg_.r_b; a <= cfg_.r_b; ++a) {
                for (std::int64_t b = -cfg_.r_b; b <= cfg_.r_b; ++b) {
                    GaussInt v{c.re + 2 * a, c.im + 2 * b};
                    if (x_ok(depth, v, ex.sym, p)) cand_.push_back(v);
                }
            }
        }

        double best = -std::numeric_limits<double>::infinity();
        for (GaussInt b : cand_) {
            double mtr = metric_of(b);
            best = std::max(best, mtr);
            out.push_back({b, mtr});
        }
        if (std::isfinite(cfg_.branch_delta)) {
            double cutoff = best - cfg_.branch_delta;
            out.erase(std::remove_if(out.begin(), out.end(),
                                     [&](const Successor& s) { return s.metric < cutoff; }),
                      out.end());
        }
        std::stable_sort(out.begin(), out.end(),
                         [](const Successor& a, const Successor& b) { return a.metric > b.metric; });
    }

    static std::int64_t first_odd_at_least(double x) {
        std::int64_t v = std::int64_t(std::ceil(x));
        if ((v & 1) == 0) ++v;
        while (double(v) < x) v += 2;
        while (double(v - 2) >= x) v -= 2;
        return v;
    }

    // x-range admission for a single candidate (forced steps and window mode)
    bool x_ok(int depth, GaussInt b, std::uint32_t parent_sym, cplx p) {
        if (!cfg_.x_range_test) return true;
        const double m = double(cfg_.m);
        if (xmode_ == XMode::direct) {
            if (depth >= n_data_) return true;  // block tail samples are unconstrained
            cplx x = b.to_cplx() + p;
            return in_box(x, m);
        }
        if (depth < order_) return true;  // no complete original-domain sample yet
        cplx x = xtaps_[std::size_t(order_)] * b.to_cplx();
        mem_.last_window(parent_sym, order_, xwin_);
        for (int l = 0; l < order_; ++l) {
            x += xtaps_[std::size_t(l)] * xwin_[std::size_t(order_ - 1 - l)].to_cplx();
        }
        return in_box(x, m);
    }

    static bool in_box(cplx x, double m) {
        return x.real() >= -m && x.real() < m && x.imag() >= -m && x.imag() < m;
    }

    // enumerate odd pairs whose delayed original-domain sample
    // x = xtaps[L]*b + rest lands in the box
    void delayed_box_candidates(std::uint32_t parent_sym) {
        cplx rest = 0.0;
        mem_.last_window(parent_sym, order_, xwin_);
        for (int l = 0; l < order_; ++l) {
            rest += xtaps_[std::size_t(l)] * xwin_[std::size_t(order_ - 1 - l)].to_cplx();
        }
        const cplx fl = xtaps_[std::size_t(order_)];
        const double m = double(cfg_.m);
        const cplx center = -rest / fl;
        const double rad = m * std::sqrt(2.0) / std::abs(fl);
        std::int64_t alo = 2 * std::int64_t(std::floor((center.real() - rad) / 2.0)) - 1;
        std::int64_t ahi = 2 * std::int64_t(std::ceil((center.real() + rad) / 2.0)) + 1;
        std::int64_t blo = 2 * std::int64_t(std::floor((center.imag() - rad) / 2.0)) - 1;
        std::int64_t bhi = 2 * std::int64_t(std::ceil((center.imag() + rad) / 2.0)) + 1;
        for (std::int64_t a = alo; a <= ahi; a += 2) {
            for (std::int64_t b = blo; b <= bhi; b += 2) {
                if (in_box(fl * cplx(double(a), double(b)) + rest, m)) cand_.push_back({a, b});
            }
        }
    }

    // truncated path memory: freeze decisions older than the window by
    // back-tracking the path being extended (the current best)
    void commit_decisions(std::uint32_t sym, int child_len) {
        int want = child_len - cfg_.path_memory_depth;
        if (want <= int(committed_.size())) return;
        auto full = mem_.path(sym);
        while (int(committed_.size()) < want && committed_.size() < full.size()) {
            committed_.push_back(full[committed_.size()]);
        }
    }

    std::vector<cplx> y_;
    std::vector<cplx> taps_;
    std::vector<cplx> xtaps_;
    int order_;
    int n_data_;
    int total_depth_;
    std::vector<GaussInt> forced_head_;
    std::vector<GaussInt> forced_tail_;
    XMode xmode_;
    FanoConfig cfg_;
    std::vector<GaussInt> truth_;
    bool backward_;
    int merge_len_;
    double bias_;

    SymbolMemory mem_;
    EntryPool pool_;
    MergeIndex index_;
    MinMaxHeap<HeapItem, ItemWorse> heap_;
    std::uint64_t seq_ = 0;
    bool done_ = false;
    std::vector<GaussInt> result_;
    double result_score_ = 0.0;
    DecodeStats stats_;
    std::vector<GaussInt> committed_;

    std::vector<GaussInt> win_;
    std::vector<GaussInt> xwin_;
    std::vector<GaussInt> cand_;
    std::vector<Successor> succ_;
    mutable std::vector<GaussInt> hash_win_;
};

std::vector<GaussInt> overlay_committed(std::vector<GaussInt> symbols,
                                        const std::vector<GaussInt>& committed) {
    for (std::size_t i = 0; i < committed.size() && i < symbols.size(); ++i) {
        symbols[i] = committed[i];
    }
    return symbols;
}

}  // namespace

DecodeResult stack_decode(std::span<const cplx> y, const FilterPattern& f,
                          std::span<const GaussInt> tail, const FanoConfig& cfg,
                          std::span<const GaussInt> truth) {
    if (f.is_arma()) throw std::invalid_argument("stack_decode: FIR patterns only");
    const int order = f.order();
    const int n = int(y.size()) - order;
    if (n < 1) throw std::invalid_argument("stack_decode: block too short");
    if (int(tail.size()) != order) throw std::invalid_argument("stack_decode: tail must hold L symbols");

    StackDecoder dec(std::vector<cplx>(y.begin(), y.end()), f.taps(), n, n, {},
                     std::vector<GaussInt>(tail.begin(), tail.end()), StackDecoder::XMode::direct,
                     f.taps(), cfg, std::vector<GaussInt>(truth.begin(), truth.end()),
                     /*backward=*/false, /*merge_len=*/0);

    DecodeResult res;
    StackDecoder::Extracted ex;
    while (dec.alive()) {
        if (dec.stats().entries_processed >= cfg.max_entries) {
            dec.stats().budget_exhausted = true;
            break;
        }
        if (!dec.extract(ex)) break;
        if (dec.done()) break;
        dec.extend(ex);
    }
    dec.finalize_stats();
    res.stats = dec.stats();
    if (dec.done()) {
        res.ok = true;
        res.symbols = cfg.path_memory_depth > 0 ? overlay_committed(dec.result(), dec.committed())
                                                : dec.result();
        res.score = dec.result_score();
    }
    return res;
}

DecodeResult bidirectional_decode(std::span<const cplx> y, const FilterPattern& f,
                                  std::span<const GaussInt> tail, const FanoConfig& cfg,
                                  std::span<const GaussInt> truth) {
    if (f.is_arma()) throw std::invalid_argument("bidirectional_decode: FIR patterns only");
    const int order = f.order();
    const int n = int(y.size()) - order;
    if (n < 1) throw std::invalid_argument("bidirectional_decode: block too short");
    if (int(tail.size()) != order) {
        throw std::invalid_argument("bidirectional_decode: tail must hold L symbols");
    }
    const int merge_len = cfg.merge_len > 0 ? std::max(cfg.merge_len, order) : std::max(order, 1);

    StackDecoder fwd(std::vector<cplx>(y.begin(), y.end()), f.taps(), n, n, {},
                     std::vector<GaussInt>(tail.begin(), tail.end()), StackDecoder::XMode::direct,
                     f.taps(), cfg, std::vector<GaussInt>(truth.begin(), truth.end()),
                     /*backward=*/false, merge_len);

    auto bt = backward_code_transform(f, y);
    std::vector<GaussInt> head_rev(tail.rbegin(), tail.rend());
    std::vector<GaussInt> bwd_truth;
    if (!truth.empty()) {
        bwd_truth.assign(truth.rbegin(), truth.rend());
        bwd_truth.resize(std::size_t(n + order), GaussInt{});
    }
    StackDecoder bwd(std::move(bt.y_bwd), bt.f_bwd.taps(), n, n + order, std::move(head_rev),
                     std::vector<GaussInt>(std::size_t(order), GaussInt{}),
                     StackDecoder::XMode::delayed, f.taps(), cfg, std::move(bwd_truth),
                     /*backward=*/true, merge_len);

    DecodeResult res;
    auto finish_stats = [&]() {
        fwd.finalize_stats();
        bwd.finalize_stats();
        res.stats = fwd.stats();
        res.stats_bwd = bwd.stats();
    };

    auto assemble = [&](const std::vector<GaussInt>& f_path, const std::vector<GaussInt>& b_path,
                        int n_f) {
        std::vector<GaussInt> out(f_path.begin(), f_path.begin() + n_f);
        out.resize(std::size_t(n));
        for (int pos = n_f; pos < n; ++pos) {
            out[std::size_t(pos)] = b_path[std::size_t(n - 1 - pos)];
        }
        return out;
    };

    StackDecoder::Extracted ex;
    std::vector<GaussInt> window, scratch;
    bool fwd_turn = true;
    while (true) {
        std::uint64_t total = fwd.stats().entries_processed + bwd.stats().entries_processed;
        if (total >= cfg.max_entries) {
            fwd.stats().budget_exhausted = true;
            bwd.stats().budget_exhausted = true;
            break;
        }
        StackDecoder& side = fwd_turn ? fwd : bwd;
        StackDecoder& other = fwd_turn ? bwd : fwd;
        bool side_is_fwd = fwd_turn;
        fwd_turn = !fwd_turn;
        if (!side.alive()) {
            if (!other.alive()) break;
            continue;
        }
        if (!side.extract(ex)) continue;
        if (side.done()) {
            // a full path on either side is a complete decode
            res.ok = true;
            if (side_is_fwd) {
                res.symbols = side.result();
                res.merge_position = n;
            } else {
                res.symbols = std::vector<GaussInt>(side.result().rbegin(), side.result().rend());
                res.merge_position = 0;
            }
            res.score = side.result_score();
            finish_stats();
            return res;
        }
        // merge check against the other stack before extending
        int position;
        side.key_of(ex.sym, ex.len, position, window);
        std::uint64_t h = side.merge_hash_of(ex.sym, ex.len);
        std::uint32_t mid = other.match(h, position, window, scratch);
        if (mid != SymbolMemory::npos) {
            const auto& me = other.entry(mid);
            auto other_path = other.path_of(me.sym);
            auto side_path = side.path_of(ex.sym);
            int n_f;
            std::vector<GaussInt> fpath, bpath;
            if (side_is_fwd) {
                n_f = ex.len;
                fpath = std::move(side_path);
                bpath = std::move(other_path);
            } else {
                n_f = position;  // forward partner length = merge position
                fpath = std::move(other_path);
                bpath = std::move(side_path);
            }
            res.ok = true;
            res.symbols = assemble(fpath, bpath, n_f);
            res.merge_position = n_f;
            res.score = ex.score;  // not re-verified; first merge wins
            side.drop_extracted(ex);
            finish_stats();
            return res;
        }
        side.extend(ex);
    }
    finish_stats();
    return res;
}

std::string DecodeResult::to_json_text() const {
    nlohmann::json j;
    j["frame_ok"] = ok;
    j["entries_processed"] = total_entries();
    j["max_occupancy"] = std::max(stats.max_occupancy, stats_bwd.max_occupancy);
    j["evictions"] = stats.evictions + stats_bwd.evictions;
    j["cpl"] = stats.cpl || stats_bwd.cpl;
    if (merge_position >= 0) j["merge_position"] = merge_position;
    return j.dump();
}

}  // namespace convlat
