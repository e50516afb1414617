#pragma once

// Candidate evaluation shared by the brute, grid and global enumerators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/SVD>

#include "dmorse/critical.hpp"

namespace dmorse::detail {

using DiffMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, Eigen::Dynamic, kMaxDim>;

/// Singular-value general position test on rows[0..count).
bool rows_in_general_position(const double* const* rows, int count, int d, double tol = kGeomTol);

/// Tie rule for a centre with more than k+1 points on its sphere.
/// `sphere` holds every cloud index within tol of the sphere, sorted.
/// Returns the Morse index (affine dimension of the sphere points) when the
/// centre lies in the relative interior of their hull and `subset` is the
/// lexicographically first affinely independent basis of them; -1 otherwise.
int degenerate_index(const PointCloud& cloud, const Point& center, const std::vector<std::uint32_t>& sphere,
                     const std::uint32_t* subset, int count);

inline bool contains_id(const std::uint32_t* ids, int count, std::uint32_t id) {
    for (int i = 0; i < count; ++i)
        if (ids[i] == id) return true;
    return false;
}

class Evaluator {
public:
    Evaluator(const PointCloud& cloud, double eps) : cloud_(cloud), eps_(eps), d_(cloud.dim()) {}

    /// Evaluates the sorted subset ids[0..count) whose circumsphere fit is
    /// `fit`. `visit(center, radius, f)` must report every cloud point within
    /// `radius` of `center`; f(id, squared distance) returns false to stop.
    template <class Visit>
    void evaluate(const std::uint32_t* ids, const double* const* rows, int count, const SimplexFit& fit, Visit&& visit,
                  std::vector<CriticalPoint>& out) {
        const double r = std::sqrt(fit.radius_sq);
        if (!is_global(eps_) && r > eps_ + kGeomTol) return;
        sphere_extra_.clear();
        bool empty = true;
        const double inner = r - kGeomTol;
        visit(fit.center.data(), r + kGeomTol, [&](std::uint32_t id, double d2) {
            if (inner > 0.0 && d2 < inner * inner) {
                empty = false;
                return false;
            }
            if (!contains_id(ids, count, id)) sphere_extra_.push_back(id);
            return true;
        });
        if (!empty) return;
        int index = count - 1;
        if (sphere_extra_.empty()) {
            for (int i = 0; i < count; ++i)
                if (!(fit.barycentric[i] > kHullTol)) return;
            if (!rows_in_general_position(rows, count, d_)) return;
        } else {
            sphere_.assign(ids, ids + count);
            sphere_.insert(sphere_.end(), sphere_extra_.begin(), sphere_extra_.end());
            std::sort(sphere_.begin(), sphere_.end());
            if (sphere_.front() != ids[0]) return;  // canonical basis starts at the smallest index
            index = degenerate_index(cloud_, fit.center, sphere_, ids, count);
            if (index < 0) return;
        }
        CriticalPoint cp;
        cp.index = index;
        cp.center = fit.center;
        cp.value = r;
        cp.generators.assign(ids, ids + count);
        out.push_back(std::move(cp));
    }

private:
    const PointCloud& cloud_;
    double eps_;
    int d_;
    std::vector<std::uint32_t> sphere_extra_;
    std::vector<std::uint32_t> sphere_;
};

/// Appends the n index-0 records.
void append_minima(const PointCloud& cloud, std::vector<CriticalPoint>& out);

/// Sort then drop records with equal (index, quantized centre, quantized value).
void dedupe(std::vector<CriticalPoint>& points);

inline int resolve_k_max(const EnumOptions& opt, int d) {
    return opt.k_max < 0 ? d : std::min(opt.k_max, d);
}

}  // namespace dmorse::detail
