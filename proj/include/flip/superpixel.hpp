#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "flip/error.hpp"
#include "flip/image.hpp"

namespace flip {

struct SeedsParams {
    int requested = 40;    // approximate superpixel count; grid init rounds it
    int block_levels = 2;  // sub-block refinement levels between grid and pixel moves
    int histogram_bins = 16;
    int iterations = 8;  // hill-climb sweeps (block levels first, then pixel level)
};

// Partition of a bbox region into S 4-connected superpixels. Labels run
// 1..S. `order` is filled by assign_traversal: order[k] is the label with
// traversal index k+1.
struct SuperpixelMap {
    int w = 0;
    int h = 0;
    int count = 0;
    std::vector<int> labels;                           // w*h raster
    std::vector<std::vector<int>> pixels;              // [count+1] linear pixel indices
    std::vector<std::vector<int>> adjacency;           // [count+1] neighbouring labels
    std::vector<std::pair<double, double>> centroids;  // [count+1] (cx, cy)
    std::vector<int> order;                            // traversal permutation, size count
    int center_index = 0;                              // ceil(S/2) once traversal is assigned

    int label_at(int x, int y) const { return labels[static_cast<std::size_t>(y) * w + x]; }

    // agent 0 walks indices ceil(S/2)..S, agent 1 walks ceil(S/2)..1
    std::vector<int> schedule(int agent) const {
        std::vector<int> s;
        const int m = center_index;
        if (agent == 0) {
            for (int i = m; i <= count; ++i) s.push_back(order[i - 1]);
        } else {
            for (int i = m; i >= 1; --i) s.push_back(order[i - 1]);
        }
        return s;
    }
};

namespace detail {

class SeedsClimber {
public:
    SeedsClimber(const GrayImage& region, const SeedsParams& p, int gx, int gy)
        : img_(region), w_(region.width), h_(region.height), bins_(p.histogram_bins), gx_(gx), gy_(gy) {
        labels_.resize(static_cast<std::size_t>(w_) * h_);
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x)
                labels_[idx(x, y)] = cell_of(x, gx_, w_) + cell_of(y, gy_, h_) * gx_ + 1;
        const int S = gx_ * gy_;
        hist_.assign(static_cast<std::size_t>(S + 1) * bins_, 0);
        size_.assign(S + 1, 0);
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) {
                const int l = labels_[idx(x, y)];
                ++hist_[static_cast<std::size_t>(l) * bins_ + bin(img_.at(x, y))];
                ++size_[l];
            }
        visited_.assign(labels_.size(), 0);
    }

    void run(int iterations, int block_levels) {
        for (int it = 0; it < iterations; ++it) {
            if (it < block_levels)
                block_sweep(it + 1);
            else
                pixel_sweep();
        }
    }

    std::vector<int> take_labels() { return std::move(labels_); }

private:
    static int cell_of(int x, int cells, int extent) {
        return static_cast<int>(static_cast<long long>(x) * cells / extent);
    }

    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }
    int bin(std::uint8_t v) const { return static_cast<int>(v) * bins_ / 256; }

    double affinity(const std::vector<int>& block_bins, int label, int minus_size) const {
        // mean histogram probability of the block's pixels under the label
        const double denom = size_[label] - minus_size;
        if (denom <= 0) return -1.0;
        double s = 0;
        for (int b : block_bins) {
            double cnt = hist_[static_cast<std::size_t>(label) * bins_ + b];
            if (minus_size > 0) cnt -= block_bin_counts_[b];
            s += cnt;
        }
        return s / (denom * static_cast<double>(block_bins.size()));
    }

    // True when the pixels of `from` stay 4-connected after removing `block`
    // (block pixels already flagged in visited_ with the current stamp).
    bool stays_connected(int from, const std::vector<std::size_t>& block) {
        const int remaining = size_[from] - static_cast<int>(block.size());
        if (remaining <= 0) return false;
        // find a seed: a `from` pixel 4-adjacent to the block but not in it
        std::size_t seed = labels_.size();
        for (std::size_t p : block) {
            const int x = static_cast<int>(p % w_), y = static_cast<int>(p / w_);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || nx[k] >= w_ || ny[k] < 0 || ny[k] >= h_) continue;
                const std::size_t q = idx(nx[k], ny[k]);
                if (labels_[q] == from && visited_[q] != stamp_) {
                    seed = q;
                    break;
                }
            }
            if (seed != labels_.size()) break;
        }
        if (seed == labels_.size()) return false;
        stack_.clear();
        stack_.push_back(seed);
        visited_[seed] = stamp_;
        int reached = 1;
        while (!stack_.empty()) {
            const std::size_t p = stack_.back();
            stack_.pop_back();
            const int x = static_cast<int>(p % w_), y = static_cast<int>(p / w_);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || nx[k] >= w_ || ny[k] < 0 || ny[k] >= h_) continue;
                const std::size_t q = idx(nx[k], ny[k]);
                if (labels_[q] == from && visited_[q] != stamp_) {
                    visited_[q] = stamp_;
                    stack_.push_back(q);
                    ++reached;
                }
            }
        }
        return reached == remaining;
    }

    void apply_move(const std::vector<std::size_t>& block, int from, int to) {
        for (std::size_t p : block) {
            labels_[p] = to;
            const int b = bin(img_.data[p]);
            --hist_[static_cast<std::size_t>(from) * bins_ + b];
            ++hist_[static_cast<std::size_t>(to) * bins_ + b];
        }
        size_[from] -= static_cast<int>(block.size());
        size_[to] += static_cast<int>(block.size());
    }

    // Attempt to move `block` (all labelled `from`) to its best-affinity
    // 4-neighbouring label; connectivity-breaking moves are rejected.
    void try_move(const std::vector<std::size_t>& block, int from) {
        cand_.clear();
        block_pix_bins_.clear();
        std::fill(block_bin_counts_.begin(), block_bin_counts_.end(), 0);
        for (std::size_t p : block) {
            const int b = bin(img_.data[p]);
            block_pix_bins_.push_back(b);
            ++block_bin_counts_[b];
            const int x = static_cast<int>(p % w_), y = static_cast<int>(p / w_);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || nx[k] >= w_ || ny[k] < 0 || ny[k] >= h_) continue;
                const int l = labels_[idx(nx[k], ny[k])];
                if (l != from) cand_.push_back(l);
            }
        }
        if (cand_.empty()) return;
        std::sort(cand_.begin(), cand_.end());
        cand_.erase(std::unique(cand_.begin(), cand_.end()), cand_.end());

        const double keep = affinity(block_pix_bins_, from, static_cast<int>(block.size()));
        int best = -1;
        double best_gain = 0.0;
        for (int to : cand_) {
            const double gain = affinity(block_pix_bins_, to, 0) - keep;
            if (gain > best_gain) {
                best_gain = gain;
                best = to;
            }
        }
        if (best < 0) return;
        if (size_[from] == static_cast<int>(block.size())) return;  // would empty the label

        ++stamp_;
        for (std::size_t p : block) visited_[p] = stamp_;
        if (!stays_connected(from, block)) return;
        apply_move(block, from, best);
    }

    // [lo,hi) extent of cell c in a floor-partitioned axis
    static std::pair<int, int> cell_range(int c, int cells, int extent) {
        const auto lo = (static_cast<long long>(c) * extent + cells - 1) / cells;
        const auto hi = (static_cast<long long>(c + 1) * extent + cells - 1) / cells;
        return {static_cast<int>(lo), static_cast<int>(hi)};
    }

    void block_sweep(int level) {
        const int sx = std::min(w_, gx_ << level);
        const int sy = std::min(h_, gy_ << level);
        std::vector<std::size_t> block;
        for (int by = 0; by < sy; ++by) {
            const auto [y_lo, y_hi] = cell_range(by, sy, h_);
            for (int bx = 0; bx < sx; ++bx) {
                const auto [x_lo, x_hi] = cell_range(bx, sx, w_);
                block.clear();
                int from = 0;
                bool intact = true;
                for (int y = y_lo; y < y_hi && intact; ++y)
                    for (int x = x_lo; x < x_hi; ++x) {
                        const int l = labels_[idx(x, y)];
                        if (from == 0) from = l;
                        if (l != from) {
                            intact = false;
                            break;
                        }
                        block.push_back(idx(x, y));
                    }
                if (!intact || block.empty()) continue;
                try_move(block, from);
            }
        }
    }

    void pixel_sweep() {
        std::vector<std::size_t> block(1);
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) {
                const std::size_t p = idx(x, y);
                block[0] = p;
                try_move(block, labels_[p]);
            }
    }

    const GrayImage& img_;
    int w_, h_, bins_, gx_, gy_;
    std::vector<int> labels_;
    std::vector<int> hist_;
    std::vector<int> size_;
    std::vector<int> visited_;
    std::vector<std::size_t> stack_;
    std::vector<int> cand_;
    std::vector<int> block_pix_bins_;
    std::vector<int> block_bin_counts_ = std::vector<int>(256, 0);
    int stamp_ = 0;
};

}  // namespace detail

// SEEDS-style segmentation of a bbox region: regular-grid initialization,
// then hill climbing that moves boundary blocks/pixels towards the
// neighbouring superpixel whose intensity histogram fits them better.
// Deterministic; labels keep the grid's raster order.
inline SuperpixelMap seeds_segment(const GrayImage& region, const SeedsParams& params) {
    const int w = region.width, h = region.height;
    if (w < 16 || h < 16) throw ParamError("seeds_segment: region must be at least 16x16");
    if (params.requested < 1) throw ParamError("seeds_segment: requested superpixels must be >= 1");
    if (params.requested > w * h)
        throw ParamError("seeds_segment: requested superpixels exceed region pixel count");
    if (params.histogram_bins < 1 || params.histogram_bins > 256)
        throw ParamError("seeds_segment: histogram bins out of range");
    if (params.iterations < 0 || params.block_levels < 0)
        throw ParamError("seeds_segment: negative iterations/levels");

    int gx = static_cast<int>(std::lround(std::sqrt(static_cast<double>(params.requested) * w / h)));
    gx = std::clamp(gx, 1, params.requested);
    int gy = static_cast<int>(std::lround(static_cast<double>(params.requested) / gx));
    gy = std::max(gy, 1);
    if (gx > w || gy > h)
        throw ParamError("seeds_segment: requested count exceeds what grid init supports");

    detail::SeedsClimber climber(region, params, gx, gy);
    climber.run(params.iterations, params.block_levels);

    SuperpixelMap map;
    map.w = w;
    map.h = h;
    map.count = gx * gy;
    map.labels = climber.take_labels();
    map.pixels.assign(map.count + 1, {});
    map.adjacency.assign(map.count + 1, {});
    map.centroids.assign(map.count + 1, {0.0, 0.0});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int l = map.labels[static_cast<std::size_t>(y) * w + x];
            map.pixels[l].push_back(y * w + x);
            map.centroids[l].first += x;
            map.centroids[l].second += y;
            if (x + 1 < w) {
                const int r = map.labels[static_cast<std::size_t>(y) * w + x + 1];
                if (r != l) {
                    map.adjacency[l].push_back(r);
                    map.adjacency[r].push_back(l);
                }
            }
            if (y + 1 < h) {
                const int d = map.labels[static_cast<std::size_t>(y + 1) * w + x];
                if (d != l) {
                    map.adjacency[l].push_back(d);
                    map.adjacency[d].push_back(l);
                }
            }
        }
    for (int l = 1; l <= map.count; ++l) {
        auto& adj = map.adjacency[l];
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
        const double n = static_cast<double>(map.pixels[l].size());
        map.centroids[l].first /= n;
        map.centroids[l].second /= n;
    }
    return map;
}

// Indexing per the traversal contract: superpixels sorted by raster order of
// their centroids, then the whole cyclic sequence rotated so the superpixel
// containing the bbox centre lands on index ceil(S/2).
inline SuperpixelMap assign_traversal(SuperpixelMap map, const BoundingBox& b) {
    const int S = map.count;
    if (S < 1 || map.pixels.empty()) throw ParamError("assign_traversal: invalid map");

    std::vector<int> sorted(S);
    std::iota(sorted.begin(), sorted.end(), 1);
    std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int c) {
        const auto& ca = map.centroids[a];
        const auto& cc = map.centroids[c];
        if (ca.second != cc.second) return ca.second < cc.second;
        if (ca.first != cc.first) return ca.first < cc.first;
        return a < c;
    });

    const int cx = std::clamp(b.w / 2, 0, map.w - 1);
    const int cy = std::clamp(b.h / 2, 0, map.h - 1);
    const int center_label = map.label_at(cx, cy);
    int center_pos = 0;
    for (int j = 0; j < S; ++j)
        if (sorted[j] == center_label) {
            center_pos = j;
            break;
        }

    const int m = (S + 1) / 2;  // ceil(S/2), 1-based target index
    map.order.assign(S, 0);
    for (int j = 0; j < S; ++j) {
        const int traversal_idx = ((j - center_pos + (m - 1)) % S + S) % S;
        map.order[traversal_idx] = sorted[j];
    }
    map.center_index = m;
    return map;
}

}  // namespace flip
