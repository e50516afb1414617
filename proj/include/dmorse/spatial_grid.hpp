#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "dmorse/point_process.hpp"

namespace dmorse {

/// Uniform bucket grid over a point cloud for fixed-radius queries.
///
/// Cells are addressed by a mixed-radix key over the cloud's bounding box.
/// When the cell count is small relative to the cloud, starts are stored
/// densely; otherwise the occupied keys are kept sorted and looked up by
/// binary search. If the requested side would overflow the key space the side
/// is enlarged, which keeps every query exact.
class SpatialGrid {
public:
    SpatialGrid(const PointCloud& cloud, double cell_side);

    double cell_side() const { return side_; }
    int dim() const { return d_; }

    /// Calls f(index, squared_distance) for every point within distance r of q.
    /// f returns false to stop early; visit_ball then returns false.
    template <class F>
    bool visit_ball(const double* q, double r, F&& f) const;

    /// Index and distance of a nearest point. Requires a nonempty cloud.
    std::pair<std::uint32_t, double> nearest(const double* q) const;

private:
    std::uint32_t lookup(std::uint64_t key, std::uint32_t& end) const;

    int d_ = 0;
    double side_ = 0.0;
    std::size_t n_ = 0;
    std::vector<double> origin_;
    std::vector<std::int64_t> extent_;   // cells per dimension
    std::vector<std::uint64_t> stride_;  // mixed-radix strides
    bool dense_ = true;
    std::vector<std::uint32_t> dense_begin_;   // size total+1
    std::vector<std::uint64_t> sparse_keys_;   // sorted occupied keys
    std::vector<std::uint32_t> sparse_begin_;  // size keys+1
    std::vector<std::uint32_t> ids_;           // point indices in cell order
    std::vector<double> coords_;               // coordinates in cell order
};

template <class F>
bool SpatialGrid::visit_ball(const double* q, double r, F&& f) const {
    if (n_ == 0) return true;
    std::int64_t lo[kMaxDim];
    std::int64_t hi[kMaxDim];
    for (int c = 0; c < d_; ++c) {
        const double a = std::floor((q[c] - r - origin_[c]) / side_);
        const double b = std::floor((q[c] + r - origin_[c]) / side_);
        if (b < 0.0 || a > static_cast<double>(extent_[c] - 1)) return true;
        lo[c] = a < 0.0 ? 0 : static_cast<std::int64_t>(a);
        hi[c] = b > static_cast<double>(extent_[c] - 1) ? extent_[c] - 1 : static_cast<std::int64_t>(b);
    }
    const double r2 = r * r;
    std::int64_t cur[kMaxDim];
    for (int c = 0; c < d_; ++c) cur[c] = lo[c];
    for (;;) {
        std::uint64_t key = 0;
        for (int c = 0; c < d_; ++c) key += static_cast<std::uint64_t>(cur[c]) * stride_[c];
        std::uint32_t end = 0;
        for (std::uint32_t s = lookup(key, end); s < end; ++s) {
            const double* p = coords_.data() + static_cast<std::size_t>(s) * d_;
            double d2 = 0.0;
            for (int c = 0; c < d_; ++c) {
                const double diff = p[c] - q[c];
                d2 += diff * diff;
            }
            if (d2 <= r2 && !f(ids_[s], d2)) return false;
        }
        int c = 0;
        while (c < d_ && cur[c] == hi[c]) {
            cur[c] = lo[c];
            ++c;
        }
        if (c == d_) break;
        ++cur[c];
    }
    return true;
}

}  // namespace dmorse
