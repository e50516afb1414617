#include "dmorse/spatial_grid.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "dmorse/errors.hpp"

namespace dmorse {

SpatialGrid::SpatialGrid(const PointCloud& cloud, double cell_side)
    : d_(cloud.dim()), side_(cell_side), n_(cloud.size()) {
    if (!(cell_side > 0.0) || !std::isfinite(cell_side)) throw ConfigError("cell_side", "must be positive and finite");
    origin_.assign(d_, 0.0);
    extent_.assign(d_, 1);
    stride_.assign(d_, 0);
    if (n_ == 0) {
        dense_begin_.assign(2, 0);
        return;
    }
    const auto [lo, hi] = cloud.bounding_box();
    for (int c = 0; c < d_; ++c) origin_[c] = lo[c];

    // Grow the side until the key space fits comfortably in 62 bits.
    for (;;) {
        long double total = 1.0L;
        for (int c = 0; c < d_; ++c) {
            extent_[c] = static_cast<std::int64_t>(std::floor((hi[c] - lo[c]) / side_)) + 1;
            total *= static_cast<long double>(extent_[c]);
        }
        if (total < 0x1.0p62L) break;
        side_ *= 2.0;
    }
    std::uint64_t total = 1;
    for (int c = 0; c < d_; ++c) {
        stride_[c] = total;
        total *= static_cast<std::uint64_t>(extent_[c]);
    }

    std::vector<std::uint64_t> keys(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        const double* p = cloud.row(i);
        std::uint64_t key = 0;
        for (int c = 0; c < d_; ++c) {
            auto cell = static_cast<std::int64_t>(std::floor((p[c] - origin_[c]) / side_));
            cell = std::clamp<std::int64_t>(cell, 0, extent_[c] - 1);
            key += static_cast<std::uint64_t>(cell) * stride_[c];
        }
        keys[i] = key;
    }
    ids_.resize(n_);
    std::iota(ids_.begin(), ids_.end(), 0u);
    std::stable_sort(ids_.begin(), ids_.end(), [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
    coords_.resize(n_ * static_cast<std::size_t>(d_));
    for (std::size_t s = 0; s < n_; ++s) {
        const double* p = cloud.row(ids_[s]);
        std::copy(p, p + d_, coords_.begin() + static_cast<std::ptrdiff_t>(s * d_));
    }

    dense_ = total <= std::max<std::uint64_t>(4 * n_, 1u << 16);
    if (dense_) {
        dense_begin_.assign(total + 1, 0);
        for (std::size_t i = 0; i < n_; ++i) ++dense_begin_[keys[i] + 1];
        std::partial_sum(dense_begin_.begin(), dense_begin_.end(), dense_begin_.begin());
    } else {
        for (std::size_t s = 0; s < n_; ++s) {
            const std::uint64_t key = keys[ids_[s]];
            if (sparse_keys_.empty() || sparse_keys_.back() != key) {
                sparse_keys_.push_back(key);
                sparse_begin_.push_back(static_cast<std::uint32_t>(s));
            }
        }
        sparse_begin_.push_back(static_cast<std::uint32_t>(n_));
    }
}

std::uint32_t SpatialGrid::lookup(std::uint64_t key, std::uint32_t& end) const {
    if (dense_) {
        end = dense_begin_[key + 1];
        return dense_begin_[key];
    }
    const auto it = std::lower_bound(sparse_keys_.begin(), sparse_keys_.end(), key);
    if (it == sparse_keys_.end() || *it != key) {
        end = 0;
        return 0;
    }
    const auto slot = static_cast<std::size_t>(it - sparse_keys_.begin());
    end = sparse_begin_[slot + 1];
    return sparse_begin_[slot];
}

std::pair<std::uint32_t, double> SpatialGrid::nearest(const double* q) const {
    if (n_ == 0) throw DegenerateInput("nearest query on an empty grid");
    double r = side_;
    for (;;) {
        std::uint32_t best = 0;
        double best2 = std::numeric_limits<double>::infinity();
        visit_ball(q, r, [&](std::uint32_t id, double d2) {
            if (d2 < best2 || (d2 == best2 && id < best)) {
                best2 = d2;
                best = id;
            }
            return true;
        });
        if (best2 <= r * r) return {best, std::sqrt(best2)};
        r *= 2.0;
    }
}

}  // namespace dmorse
