#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <span>
#include <string>
#include <vector>

#include "convlat/filter_pattern.hpp"
#include "convlat/gauss.hpp"

namespace convlat {

/// Fano metric bias B = sigma2 * ln(4/(pi sigma2)) (complex lattices) or
/// sigma2 * ln(2/(pi sigma2)) (real).  The correct-path score drifts upward
/// iff B > sigma2, i.e. sigma2 < 4/(pi e) in the complex case.
double fano_bias(double sigma2, bool complex_case = true);

/// Per-symbol score increment: B - |y_n - (b + sum_l f_l b_{n-l})|^2.
/// `prev` holds the hypothesis state, newest first.
double branch_metric(cplx y_n, GaussInt b, std::span<const GaussInt> prev, const FilterPattern& f,
                     double bias);

struct FanoConfig {
    double sigma2 = 1.0;
    std::optional<double> bias;  // default: fano_bias(sigma2)
    int max_stack = 10000;
    double branch_delta = std::numeric_limits<double>::infinity();
    bool x_range_test = true;
    int m = 8;          // shaping box half-width, used by x-range and successor generation
    int r_b = 2;        // odd-grid window radius when the box is not available
    int merge_len = 0;  // 0 -> filter order L
    int path_memory_depth = 0;  // 0 -> full path memory
    std::uint64_t max_entries = 4'000'000;  // extraction budget per decode

    double resolved_bias() const { return bias ? *bias : fano_bias(sigma2); }
};

struct DecodeStats {
    std::uint64_t entries_processed = 0;
    std::uint64_t evictions = 0;
    std::size_t max_occupancy = 0;
    std::uint64_t insert_rejects = 0;
    std::uint64_t empty_successor_drops = 0;
    bool cpl = false;  // the true-prefix entry fell out of the stack
    bool budget_exhausted = false;
    std::uint64_t symmem_allocs = 0;
    std::uint64_t symmem_frees = 0;
    std::uint64_t symmem_live_at_end = 0;
};

struct DecodeResult {
    bool ok = false;
    std::vector<GaussInt> symbols;  // decoded b, data positions only
    double score = 0.0;
    int merge_position = -1;  // bidirectional: forward length at the merge
    DecodeStats stats;        // forward decoder
    DecodeStats stats_bwd;    // backward decoder (bidirectional only)

    std::uint64_t total_entries() const { return stats.entries_processed + stats_bwd.entries_processed; }
    std::string to_json_text() const;
};

/// Heap-based stack decoder.  y holds at least N = |y| - L samples of data
/// plus the convolution tail; the last L data symbols are pinned to `tail`
/// (delivered error free).  Terminates when a full-length path is extracted.
/// `truth` is optional instrumentation for correct-path-loss detection.
DecodeResult stack_decode(std::span<const cplx> y, const FilterPattern& f,
                          std::span<const GaussInt> tail, const FanoConfig& cfg,
                          std::span<const GaussInt> truth = {});

/// Forward and time-reversed (allpass transformed) stack decoders in strict
/// alternation; each extracted path is checked against the other stack for a
/// state match at the complementary position, and the first merge (or a full
/// path on either side) wins.
DecodeResult bidirectional_decode(std::span<const cplx> y, const FilterPattern& f,
                                  std::span<const GaussInt> tail, const FanoConfig& cfg,
                                  std::span<const GaussInt> truth = {});

/// Hash index over (position, state window) tuples.  Buckets are verified by
/// full comparison on query, so a hash collision can never produce a false
/// merge.  The bidirectional decoder keeps one per direction.
class MergeKeyIndex {
  public:
    static std::uint64_t key_hash(int position, std::span<const GaussInt> window);

    void insert(int position, std::span<const GaussInt> window, std::uint64_t id);
    void erase(int position, std::span<const GaussInt> window, std::uint64_t id);
    /// ids whose exact (position, window) tuple matches
    std::vector<std::uint64_t> query(int position, std::span<const GaussInt> window) const;
    std::size_t size() const { return count_; }

  private:
    struct Slot {
        std::uint64_t id;
        int position;
        std::vector<GaussInt> window;
    };
    std::unordered_map<std::uint64_t, std::vector<Slot>> buckets_;
    std::size_t count_ = 0;
};

/// Shared arena of path symbols stored as reference-counted linked lists;
/// entries die exactly when the last reference drops.
class SymbolMemory {
  public:
    static constexpr std::uint32_t npos = 0xffffffffu;

    std::uint32_t alloc(GaussInt sym, std::uint32_t parent);
    void add_ref(std::uint32_t h);
    void release(std::uint32_t h);

    GaussInt symbol(std::uint32_t h) const { return nodes_[h].sym; }
    std::uint32_t parent(std::uint32_t h) const { return nodes_[h].parent; }

    /// newest-first window of up to k symbols ending at h; pads with zeros
    void last_window(std::uint32_t h, int k, std::vector<GaussInt>& out) const;
    /// full path, root first
    std::vector<GaussInt> path(std::uint32_t h) const;

    std::uint64_t allocs() const { return allocs_; }
    std::uint64_t frees() const { return frees_; }
    std::uint64_t live() const { return allocs_ - frees_; }

  private:
    struct Node {
        GaussInt sym;
        std::uint32_t parent;
        std::uint32_t refcount;
    };
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> freelist_;
    std::uint64_t allocs_ = 0;
    std::uint64_t frees_ = 0;
};

}  // namespace convlat
