#pragma once

#include <bit>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace convlat {

/// Min-max heap: complete binary tree in a flat array (root at 0, parent of i
/// at (i-1)/2, children at 2i+1 and 2i+2) with alternating max and min
/// levels, root on a max level.  Both extremes pop in O(log n).
///
/// Compare is a strict "less" over elements; top() is the greatest element,
/// bottom() the least.
template <typename T, typename Less>
class MinMaxHeap {
  public:
    explicit MinMaxHeap(Less less = Less{}) : less_(std::move(less)) {}

    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    void reserve(std::size_t n) { data_.reserve(n); }
    void clear() { data_.clear(); }

    void push(const T& v) {
        data_.push_back(v);
        bubble_up(data_.size() - 1);
    }

    const T& top() const { return data_.at(0); }

    const T& bottom() const { return data_[bottom_index()]; }

    T pop_top() { return remove_at(0); }

    T pop_bottom() { return remove_at(bottom_index()); }

    /// full-scan order check, for debug/tests
    bool invariant_ok() const {
        for (std::size_t i = 1; i < data_.size(); ++i) {
            std::size_t parent = (i - 1) / 2;
            if (on_max_level(parent)) {
                if (less_(data_[parent], data_[i])) return false;
            } else {
                if (less_(data_[i], data_[parent])) return false;
            }
            if (parent > 0) {
                std::size_t grand = (parent - 1) / 2;
                if (on_max_level(grand)) {
                    if (less_(data_[grand], data_[i])) return false;
                } else {
                    if (less_(data_[i], data_[grand])) return false;
                }
            }
        }
        return true;
    }

  private:
    static bool on_max_level(std::size_t i) {
        // depth of i is bit_width(i+1)-1; even depths are max levels
        return (std::bit_width(i + 1) - 1) % 2 == 0;
    }

    std::size_t bottom_index() const {
        if (data_.empty()) throw std::out_of_range("heap is empty");
        if (data_.size() == 1) return 0;
        if (data_.size() == 2) return 1;
        return less_(data_[1], data_[2]) ? 1 : 2;
    }

    T remove_at(std::size_t i) {
        if (i >= data_.size()) throw std::out_of_range("heap index out of range");
        T out = std::move(data_[i]);
        if (i + 1 != data_.size()) {
            data_[i] = std::move(data_.back());
            data_.pop_back();
            bubble_up(i);
            trickle_down(i);
        } else {
            data_.pop_back();
        }
        return out;
    }

    void bubble_up(std::size_t i) {
        if (i == 0) return;
        std::size_t parent = (i - 1) / 2;
        if (on_max_level(i)) {
            if (less_(data_[i], data_[parent])) {
                std::swap(data_[i], data_[parent]);
                bubble_up_dir(parent, /*max_dir=*/false);
            } else {
                bubble_up_dir(i, /*max_dir=*/true);
            }
        } else {
            if (less_(data_[parent], data_[i])) {
                std::swap(data_[i], data_[parent]);
                bubble_up_dir(parent, /*max_dir=*/true);
            } else {
                bubble_up_dir(i, /*max_dir=*/false);
            }
        }
    }

    // move up through grandparents on the same kind of level
    void bubble_up_dir(std::size_t i, bool max_dir) {
        while (i > 2) {
            std::size_t grand = ((i - 1) / 2 - 1) / 2;
            bool move = max_dir ? less_(data_[grand], data_[i]) : less_(data_[i], data_[grand]);
            if (!move) return;
            std::swap(data_[i], data_[grand]);
            i = grand;
        }
    }

    void trickle_down(std::size_t i) {
        if (on_max_level(i)) {
            trickle_down_dir(i, /*max_dir=*/true);
        } else {
            trickle_down_dir(i, /*max_dir=*/false);
        }
    }

    void trickle_down_dir(std::size_t i, bool max_dir) {
        const std::size_t n = data_.size();
        while (true) {
            std::size_t left = 2 * i + 1;
            if (left >= n) return;
            // extreme among children and grandchildren
            std::size_t best = left;
            auto consider = [&](std::size_t c) {
                if (c < n) {
                    bool b = max_dir ? less_(data_[best], data_[c]) : less_(data_[c], data_[best]);
                    if (b) best = c;
                }
            };
            consider(left + 1);
            for (std::size_t g = 2 * left + 1; g <= 2 * left + 4 && g > 2 * left; ++g) consider(g);

            bool improves = max_dir ? less_(data_[i], data_[best]) : less_(data_[best], data_[i]);
            if (!improves) return;
            std::swap(data_[i], data_[best]);
            if (best <= left + 1) return;  // was a child: done
            // was a grandchild: may need to fix against its parent
            std::size_t parent = (best - 1) / 2;
            bool fix = max_dir ? less_(data_[best], data_[parent]) : less_(data_[parent], data_[best]);
            if (fix) std::swap(data_[best], data_[parent]);
            i = best;
        }
    }

    std::vector<T> data_;
    Less less_;
};

}  // namespace convlat
