#include "convlat/spectrum.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <json.hpp>

namespace convlat {

double error_weight(std::span<const GaussInt> e, std::span<const cplx> taps) {
    const int n = int(e.size());
    const int order = int(taps.size()) - 1;
    double w = 0.0;
    for (int i = 0; i < n + order; ++i) {
        cplx acc = 0.0;
        int lo = std::max(0, i - n + 1);
        int hi = std::min(order, i);
        for (int l = lo; l <= hi; ++l) acc += taps[std::size_t(l)] * e[std::size_t(i - l)].to_cplx();
        w += std::norm(acc);
    }
    return w;
}

double error_weight(std::span<const GaussInt> e, const FilterPattern& f) {
    if (f.is_arma()) throw std::invalid_argument("error_weight: FIR patterns only");
    return error_weight(e, std::span<const cplx>(f.taps()));
}

namespace {

struct Cand {
    double inc;
    std::int64_t re, im;
};

struct VecHash {
    std::size_t operator()(const std::vector<std::int64_t>& v) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (auto x : v) h = hash_mix(h, std::uint64_t(x));
        return h;
    }
};

/// Database of tail-fragment prefixes for the backward-forward search.
class TailsDb {
  public:
    explicit TailsDb(int window) : window_(window) {}
    int window() const { return window_; }

    void insert(std::span<const GaussInt> newest_first) {
        key_.clear();
        for (auto g : newest_first) {
            key_.push_back(g.re);
            key_.push_back(g.im);
        }
        set_.insert(key_);
    }
    bool contains_key(const std::vector<std::int64_t>& key) const {
        return set_.find(key) != set_.end();
    }
    std::size_t size() const { return set_.size(); }

  private:
    int window_;
    std::vector<std::int64_t> key_;
    std::unordered_set<std::vector<std::int64_t>, VecHash> set_;
};

struct SharedState {
    std::atomic<double> bound;          // current d2_search (shrinks in dynamic mode)
    std::atomic<std::uint64_t> nodes{0};
    std::atomic<bool> out_of_budget{false};
    std::uint64_t budget = 0;
};

void bound_update_min(std::atomic<double>& b, double w) {
    double cur = b.load(std::memory_order_relaxed);
    while (w < cur && !b.compare_exchange_weak(cur, w, std::memory_order_relaxed)) {
    }
}

struct BestEvent {
    double weight = std::numeric_limits<double>::infinity();
    std::vector<GaussInt> symbols;
};

bool lex_less(const std::vector<GaussInt>& a, const std::vector<GaussInt>& b) {
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        if (a[i].re != b[i].re) return a[i].re < b[i].re;
        if (a[i].im != b[i].im) return a[i].im < b[i].im;
    }
    return a.size() < b.size();
}

bool better_event(double w, const std::vector<GaussInt>& e, const BestEvent& best) {
    if (w != best.weight) return w < best.weight;
    if (e.size() != best.symbols.size()) return e.size() < best.symbols.size();
    return lex_less(e, best.symbols);
}

class Searcher {
  public:
    Searcher(std::span<const cplx> taps, int n_max, bool dynamic, bool keep_events,
             SharedState& shared, const TailsDb* db, double fwd_threshold)
        : taps_(taps.begin(), taps.end()),
          order_(int(taps.size()) - 1),
          f0_(taps[0]),
          n_max_(n_max),
          dynamic_(dynamic),
          keep_events_(keep_events),
          shared_(shared),
          db_(db),
          fwd_threshold_(fwd_threshold) {
        // lower bound on the convolution tail of any completed event; the
        // last tail sample is f_L * e(last) with |e(last)|^2 >= 4
        margin_ = order_ >= 1 ? 4.0 * std::norm(taps_.back()) : 0.0;
        scratch_.resize(std::size_t(n_max) + 1);
        e_.reserve(std::size_t(n_max));
    }

    // worker runs the subset of first-symbol candidates with index % step == offset
    void run(std::size_t offset, std::size_t step) {
        std::vector<Cand> first = first_candidates();
        for (std::size_t i = offset; i < first.size(); i += step) {
            const Cand& c = first[i];
            if (c.inc >= bound() - margin_) continue;  // bound may have shrunk
            if (!count_node()) return;
            e_.push_back({c.re, c.im});
            double w = c.inc + tail_weight();
            if (w < bound()) record(w);
            if (!gate_ok(c.inc)) {
                e_.pop_back();
                continue;
            }
            dfs(1, c.inc, 0);
            e_.pop_back();
            if (stop_) return;
        }
    }

    void flush_nodes() {
        shared_.nodes.fetch_add(local_nodes_, std::memory_order_relaxed);
        local_nodes_ = 0;
    }

    std::vector<ErrorEvent> events;
    std::map<std::int64_t, std::uint64_t> histogram;
    BestEvent best;

  private:
    double bound() const { return shared_.bound.load(std::memory_order_relaxed); }

    bool count_node() {
        if (++local_nodes_ >= 8192) {
            flush_nodes();
            if (shared_.nodes.load(std::memory_order_relaxed) >= shared_.budget) {
                shared_.out_of_budget.store(true, std::memory_order_relaxed);
            }
        }
        if (shared_.out_of_budget.load(std::memory_order_relaxed)) {
            stop_ = true;
            return false;
        }
        return true;
    }

    // candidates for e(0): one representative per 90-degree rotation class
    // (re > 0, im >= 0), zero excluded; shifts are never generated because
    // e(0) is the first nonzero symbol by construction.
    std::vector<Cand> first_candidates() const {
        std::vector<Cand> out;
        double rem = bound() - margin_;
        if (rem <= 0) return out;
        double r = std::sqrt(rem / std::norm(f0_));
        for (std::int64_t a = 2; a <= std::int64_t(r); a += 2) {
            for (std::int64_t b = 0; b <= std::int64_t(r); b += 2) {
                double inc = std::norm(f0_ * cplx(double(a), double(b)));
                if (inc < rem) out.push_back({inc, a, b});
            }
        }
        std::sort(out.begin(), out.end(), [](const Cand& x, const Cand& y) { return x.inc < y.inc; });
        return out;
    }

    void dfs(int depth, double partial, int trailing) {
        if (depth >= n_max_ || stop_) return;
        cplx p = 0.0;
        for (int l = 1; l <= std::min(order_, depth); ++l) {
            p += taps_[std::size_t(l)] * e_[std::size_t(depth - l)].to_cplx();
        }
        double rem = bound() - margin_ - partial;
        if (rem <= 0) return;

        std::vector<Cand>& cands = scratch_[std::size_t(depth)];
        cands.clear();
        double r = std::sqrt(rem / std::norm(f0_));
        cplx center = -p / f0_;
        std::int64_t alo = 2 * std::int64_t(std::ceil((center.real() - r) / 2.0));
        std::int64_t ahi = 2 * std::int64_t(std::floor((center.real() + r) / 2.0));
        std::int64_t blo = 2 * std::int64_t(std::ceil((center.imag() - r) / 2.0));
        std::int64_t bhi = 2 * std::int64_t(std::floor((center.imag() + r) / 2.0));
        for (std::int64_t a = alo; a <= ahi; a += 2) {
            for (std::int64_t b = blo; b <= bhi; b += 2) {
                double inc = std::norm(p + f0_ * cplx(double(a), double(b)));
                if (inc < rem) cands.push_back({inc, a, b});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.inc < y.inc; });

        for (const Cand& c : cands) {
            if (dynamic_ && c.inc >= bound() - margin_ - partial) break;  // radius shrank
            bool zero = (c.re == 0 && c.im == 0);
            if (zero && trailing + 1 >= order_) continue;  // would split into two events
            if (!count_node()) return;
            e_.push_back({c.re, c.im});
            double child_partial = partial + c.inc;
            if (!zero) {
                double w = child_partial + tail_weight();
                if (w < bound()) record(w);
            }
            if (gate_ok(child_partial)) dfs(depth + 1, child_partial, zero ? trailing + 1 : 0);
            e_.pop_back();
            if (stop_) return;
        }
    }

    // backward-forward gate: branches past the threshold survive only if the
    // last L-1 symbols are a known tail prefix
    bool gate_ok(double child_partial) {
        if (!db_ || child_partial < fwd_threshold_) return true;
        int window = db_->window();
        if (window <= 0) return true;
        key_.clear();
        int m = int(e_.size()) - 1;
        for (int i = m - window + 1; i <= m; ++i) {
            if (i >= 0) {
                key_.push_back(e_[std::size_t(i)].re);
                key_.push_back(e_[std::size_t(i)].im);
            } else {
                key_.push_back(0);
                key_.push_back(0);
            }
        }
        return db_->contains_key(key_);
    }

    // weight of the convolution tail beyond the last symbol
    double tail_weight() const {
        int nc = int(e_.size()) - 1;
        double s = 0.0;
        for (int i = nc + 1; i <= nc + order_; ++i) {
            cplx acc = 0.0;
            for (int l = i - nc; l <= std::min(order_, i); ++l) {
                acc += taps_[std::size_t(l)] * e_[std::size_t(i - l)].to_cplx();
            }
            s += std::norm(acc);
        }
        return s;
    }

    void record(double w) {
        if (better_event(w, e_, best)) {
            best.weight = w;
            best.symbols = e_;
        }
        if (dynamic_) {
            bound_update_min(shared_.bound, w);
            return;  // events recorded under a shrinking radius go stale; keep best only
        }
        histogram[std::int64_t(std::floor(w))] += 1;
        if (keep_events_) events.push_back({e_, w});
    }

    std::vector<cplx> taps_;
    int order_;
    cplx f0_;
    int n_max_;
    bool dynamic_;
    bool keep_events_;
    SharedState& shared_;
    const TailsDb* db_;
    double fwd_threshold_;
    double margin_;
    bool stop_ = false;
    std::uint64_t local_nodes_ = 0;
    std::vector<GaussInt> e_;
    std::vector<std::vector<Cand>> scratch_;
    std::vector<std::int64_t> key_;
};

// Backward enumeration of all event tails below d2_tail.  Runs the same tree
// search in reversed time (reversed taps, leading tap f_L), no rotation
// dilution, and inserts the newest window-1 symbols at every node: these are
// exactly the forward-order prefixes of candidate tail fragments, including
// fragments padded with up to L-1 zeros past the event start.
class TailEnumerator {
  public:
    TailEnumerator(std::span<const cplx> taps, double d2_tail, int max_depth, SharedState& shared,
                   TailsDb& db)
        : d2_tail_(d2_tail), max_depth_(max_depth), shared_(shared), db_(db) {
        rt_.assign(taps.rbegin(), taps.rend());
        order_ = int(rt_.size()) - 1;
        r0_ = rt_[0];
        if (std::norm(r0_) == 0.0) {
            throw std::invalid_argument("backward_forward_search: last tap must be nonzero");
        }
    }

    void run() {
        // first (in reversed time, i.e. last) symbol of a tail: nonzero, all quadrants
        double r = std::sqrt(d2_tail_ / std::norm(r0_));
        std::int64_t hw = 2 * std::int64_t(std::floor(r / 2.0)) + 2;
        for (std::int64_t a = -hw; a <= hw; a += 2) {
            for (std::int64_t b = -hw; b <= hw; b += 2) {
                if (a == 0 && b == 0) continue;
                double inc = std::norm(r0_ * cplx(double(a), double(b)));
                if (inc >= d2_tail_) continue;
                if (!count_node()) return;
                e_.push_back({a, b});
                note();
                dfs(1, inc, 0);
                e_.pop_back();
                if (stop_) return;
            }
        }
    }

    void flush_nodes() {
        shared_.nodes.fetch_add(local_nodes_, std::memory_order_relaxed);
        local_nodes_ = 0;
    }

  private:
    bool count_node() {
        if (++local_nodes_ >= 8192) {
            flush_nodes();
            if (shared_.nodes.load(std::memory_order_relaxed) >= shared_.budget) {
                shared_.out_of_budget.store(true, std::memory_order_relaxed);
            }
        }
        if (shared_.out_of_budget.load(std::memory_order_relaxed)) {
            stop_ = true;
            return false;
        }
        return true;
    }

    void note() {
        int window = db_.window();
        if (window <= 0 || int(e_.size()) < window) return;
        win_.clear();
        for (int i = 0; i < window; ++i) win_.push_back(e_[e_.size() - 1 - std::size_t(i)]);
        db_.insert(win_);
    }

    void dfs(int depth, double partial, int trailing) {
        if (depth >= max_depth_ || stop_) return;
        cplx p = 0.0;
        for (int l = 1; l <= std::min(order_, depth); ++l) {
            p += rt_[std::size_t(l)] * e_[std::size_t(depth - l)].to_cplx();
        }
        double rem = d2_tail_ - partial;
        if (rem <= 0) return;
        double r = std::sqrt(rem / std::norm(r0_));
        cplx center = -p / r0_;
        std::int64_t alo = 2 * std::int64_t(std::ceil((center.real() - r) / 2.0));
        std::int64_t ahi = 2 * std::int64_t(std::floor((center.real() + r) / 2.0));
        std::int64_t blo = 2 * std::int64_t(std::ceil((center.imag() - r) / 2.0));
        std::int64_t bhi = 2 * std::int64_t(std::floor((center.imag() + r) / 2.0));
        for (std::int64_t a = alo; a <= ahi; a += 2) {
            for (std::int64_t b = blo; b <= bhi; b += 2) {
                double inc = std::norm(p + r0_ * cplx(double(a), double(b)));
                if (inc >= rem) continue;
                bool zero = (a == 0 && b == 0);
                if (zero && trailing + 1 >= order_) continue;
                if (!count_node()) return;
                e_.push_back({a, b});
                note();
                dfs(depth + 1, partial + inc, zero ? trailing + 1 : 0);
                e_.pop_back();
                if (stop_) return;
            }
        }
    }

    std::vector<cplx> rt_;
    int order_;
    cplx r0_;
    double d2_tail_;
    int max_depth_;
    SharedState& shared_;
    TailsDb& db_;
    bool stop_ = false;
    std::uint64_t local_nodes_ = 0;
    std::vector<GaussInt> e_;
    std::vector<GaussInt> win_;
};

SpectrumReport run_search(std::span<const cplx> taps, double d2_search, int n_max,
                          const SearchOptions& opts, const TailsDb* db, double fwd_threshold,
                          SharedState& shared) {
    int jobs = std::max(1, opts.jobs);
    std::vector<Searcher> workers;
    workers.reserve(std::size_t(jobs));
    for (int i = 0; i < jobs; ++i) {
        workers.emplace_back(taps, n_max, false, opts.keep_events, shared, db, fwd_threshold);
    }
    if (jobs == 1) {
        workers[0].run(0, 1);
        workers[0].flush_nodes();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < jobs; ++i) {
            threads.emplace_back([&, i] {
                workers[std::size_t(i)].run(std::size_t(i), std::size_t(jobs));
                workers[std::size_t(i)].flush_nodes();
            });
        }
        for (auto& t : threads) t.join();
    }

    SpectrumReport report;
    report.d2_search = d2_search;
    report.n_max = n_max;
    report.complete = !shared.out_of_budget.load();
    report.nodes_examined = shared.nodes.load();
    BestEvent best;
    for (auto& w : workers) {
        for (auto& [bin, count] : w.histogram) report.histogram[bin] += count;
        if (opts.keep_events) {
            report.events.insert(report.events.end(), std::make_move_iterator(w.events.begin()),
                                 std::make_move_iterator(w.events.end()));
        }
        if (better_event(w.best.weight, w.best.symbols, best)) best = std::move(w.best);
    }
    if (best.weight < std::numeric_limits<double>::infinity()) {
        report.d_min2 = best.weight;
        report.n_min = int(best.symbols.size());
    }
    return report;
}

}  // namespace

SpectrumReport search_spectrum(std::span<const cplx> taps, double d2_search, int n_max,
                               const SearchOptions& opts) {
    if (taps.empty() || taps[0] == cplx(0.0)) {
        throw std::invalid_argument("search_spectrum: leading tap must be nonzero");
    }
    if (d2_search <= 0 || n_max < 1) throw std::invalid_argument("search_spectrum: bad radius or length");
    SharedState shared;
    shared.bound.store(d2_search);
    shared.budget = opts.node_budget;
    return run_search(taps, d2_search, n_max, opts, nullptr, 0.0, shared);
}

SpectrumReport search_spectrum(const FilterPattern& f, double d2_search, int n_max,
                               const SearchOptions& opts) {
    if (f.is_arma()) throw std::invalid_argument("search_spectrum: FIR patterns only");
    return search_spectrum(std::span<const cplx>(f.taps()), d2_search, n_max, opts);
}

MinDistanceResult min_distance(const FilterPattern& f, int n_max, const SearchOptions& opts) {
    if (f.is_arma()) throw std::invalid_argument("min_distance: FIR patterns only");
    if (n_max < 1) throw std::invalid_argument("min_distance: N_max must be >= 1");
    const auto& taps = f.taps();

    // The single-symbol event e = [2] seeds the radius.  The search runs with
    // iterative deepening: a plain depth-first pass at the full depth would
    // sink into the huge subtree of near-silent sequences under the loose
    // initial radius, while shallow passes shrink the radius cheaply and the
    // deep passes then run tightly pruned.
    double w0 = 4.0 * f.sum_tap_energy();
    SharedState shared;
    shared.bound.store(w0);
    shared.budget = opts.node_budget;

    BestEvent best;
    best.weight = w0;
    best.symbols = {GaussInt{2, 0}};

    const int jobs = std::max(1, opts.jobs);
    for (int depth = 1; depth <= n_max && !shared.out_of_budget.load(); ++depth) {
        std::vector<Searcher> workers;
        workers.reserve(std::size_t(jobs));
        for (int i = 0; i < jobs; ++i) {
            workers.emplace_back(std::span<const cplx>(taps), depth, true, false, shared, nullptr, 0.0);
        }
        if (jobs == 1) {
            workers[0].run(0, 1);
            workers[0].flush_nodes();
        } else {
            std::vector<std::thread> threads;
            for (int i = 0; i < jobs; ++i) {
                threads.emplace_back([&, i] {
                    workers[std::size_t(i)].run(std::size_t(i), std::size_t(jobs));
                    workers[std::size_t(i)].flush_nodes();
                });
            }
            for (auto& t : threads) t.join();
        }
        for (auto& w : workers) {
            if (w.best.weight < std::numeric_limits<double>::infinity() &&
                better_event(w.best.weight, w.best.symbols, best)) {
                best = std::move(w.best);
            }
        }
    }

    MinDistanceResult res;
    res.complete = !shared.out_of_budget.load();
    res.nodes_examined = shared.nodes.load();
    res.d_min2 = best.weight;
    res.n_min = int(best.symbols.size());
    res.event = std::move(best.symbols);
    return res;
}

SpectrumReport backward_forward_search(const FilterPattern& f, double d2_search, double d2_tail,
                                       int n_max, const SearchOptions& opts) {
    if (f.is_arma()) throw std::invalid_argument("backward_forward_search: FIR patterns only");
    if (!(d2_tail > 0.0) || d2_tail >= d2_search) {
        throw std::invalid_argument("backward_forward_search: need 0 < d2_tail < d2_search");
    }
    const auto& taps = f.taps();
    SharedState shared;
    shared.bound.store(d2_search);
    shared.budget = opts.node_budget;

    TailsDb db(f.order() - 1);
    if (db.window() > 0) {
        TailEnumerator bwd(taps, d2_tail, n_max + f.order(), shared, db);
        bwd.run();
        bwd.flush_nodes();
    }
    return run_search(taps, d2_search, n_max, opts, &db, d2_search - d2_tail, shared);
}

double union_bound_eer(const SpectrumReport& report, double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("union_bound_eer: sigma2 must be positive");
    double sum = 0.0;
    for (const auto& ev : report.events) {
        double q = 0.5 * std::erfc(std::sqrt(ev.weight / (2.0 * sigma2)) / std::sqrt(2.0));
        sum += 4.0 * q;  // each canonical event stands for its 4 rotations
    }
    return sum;
}

CartesianSpectrum cartesian_spectrum(int k_max) {
    if (k_max < 1) throw std::invalid_argument("cartesian_spectrum: k_max must be >= 1");
    CartesianSpectrum out;
    out.b.resize(std::size_t(k_max) + 1, 0);
    for (int k = 1; k <= k_max; ++k) {
        std::uint64_t cnt = 0;
        int r = int(std::sqrt(double(k))) + 1;
        for (int x = -r; x <= r; ++x) {
            for (int y = -r; y <= r; ++y) {
                if (x * x + y * y == k && !(x == 0 && y == 0)) ++cnt;
            }
        }
        out.b[std::size_t(k)] = cnt;
    }
    out.a.resize(std::size_t(k_max) + 1, 0);
    for (int k = 1; k <= k_max; ++k) {
        unsigned __int128 acc = out.b[std::size_t(k)];
        for (int i = 1; i < k; ++i) {
            acc += (unsigned __int128)(out.a[std::size_t(i)]) * out.b[std::size_t(k - i)];
        }
        if (acc > (unsigned __int128)UINT64_MAX) {
            throw std::overflow_error("cartesian_spectrum: a(k) exceeds 64 bits, reduce k_max");
        }
        out.a[std::size_t(k)] = std::uint64_t(acc);
    }
    // drop the unused index 0
    out.a.erase(out.a.begin());
    out.b.erase(out.b.begin());
    return out;
}

HistogramFit histogram_fit(const SpectrumReport& report, double min_bin_lo) {
    double lo_edge = min_bin_lo;
    if (lo_edge < 0.0) lo_edge = std::floor(report.d_min2) + 1.0;  // strictly above the d_min bin
    std::vector<double> xs, ys;
    for (const auto& [lo, count] : report.histogram) {
        if (double(lo) < lo_edge || count == 0) continue;
        xs.push_back(std::log10(double(lo) + 0.5));
        ys.push_back(std::log10(double(count)));
    }
    if (xs.size() < 3) throw std::invalid_argument("histogram_fit: need at least 3 nonempty bins");
    double n = double(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double beta = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double loga = (sy - beta * sx) / n;
    HistogramFit fit;
    fit.beta = beta;
    fit.alpha = std::pow(10.0, loga);
    fit.bins_used = int(xs.size());
    double ss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double r = ys[i] - (loga + beta * xs[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

std::string SpectrumReport::to_json_text() const {
    nlohmann::json j;
    j["d2_search"] = d2_search;
    j["n_max"] = n_max;
    j["d_min2"] = d_min2;
    j["n_min"] = n_min;
    j["nodes_examined"] = nodes_examined;
    j["complete"] = complete;
    j["event_count"] = events.size();
    nlohmann::json evs = nlohmann::json::array();
    for (const auto& ev : events) {
        nlohmann::json sym = nlohmann::json::array();
        for (auto g : ev.symbols) sym.push_back({g.re, g.im});
        evs.push_back({{"symbols", sym}, {"weight", ev.weight}});
    }
    j["events"] = evs;
    return j.dump(2);
}

std::string SpectrumReport::histogram_csv() const {
    std::ostringstream os;
    os << "bin_start,count\n";
    for (const auto& [lo, count] : histogram) os << lo << "," << count << "\n";
    return os.str();
}

}  // namespace convlat
