#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "critical_eval.hpp"
#include "dmorse/critical.hpp"
#include "dmorse/errors.hpp"
#include "dmorse/spatial_grid.hpp"

namespace dmorse {

namespace {

// Cells whose candidate set stays above this size are split.
constexpr std::size_t kLeafSize = 12;
constexpr int kMaxDepth = 40;

// Every critical point inside a box with centre c and half-diagonal h has value
// R <= d_P(c) + h, and its circumball lies within d_P(c) + 2h of c. So the
// points within that distance decide everything about the box.
class BranchAndBound {
public:
    BranchAndBound(const PointCloud& cloud, int k_max, std::vector<CriticalPoint>& out)
        : cloud_(cloud), d_(cloud.dim()), k_max_(k_max), eval_(cloud, kGlobal), out_(out) {}

    void process(const Point& lo, const Point& hi, const std::vector<std::uint32_t>& parent, int depth) {
        const Point c = 0.5 * (lo + hi);
        const double h = 0.5 * (hi - lo).norm();
        double d0 = kGlobal;
        for (auto id : parent) d0 = std::min(d0, distance(id, c));
        const double reach = d0 + 2.0 * h + 2.0 * kGeomTol;
        std::vector<std::uint32_t> set;
        for (auto id : parent)
            if (distance(id, c) <= reach) set.push_back(id);
        if (set.size() < 2) return;
        if (set.size() > kLeafSize && depth < kMaxDepth && h > 1e-9) {
            const int children = 1 << d_;
            for (int mask = 0; mask < children; ++mask) {
                Point clo = lo;
                Point chi = hi;
                for (int a = 0; a < d_; ++a) {
                    if (mask & (1 << a))
                        clo[a] = c[a];
                    else
                        chi[a] = c[a];
                }
                process(clo, chi, set, depth + 1);
            }
            return;
        }
        leaf(lo, hi, set, d0 + h + kGeomTol);
    }

private:
    double distance(std::uint32_t id, const Point& c) const {
        const double* p = cloud_.row(id);
        double d2 = 0.0;
        for (int a = 0; a < d_; ++a) d2 += (p[a] - c[a]) * (p[a] - c[a]);
        return std::sqrt(d2);
    }

    void leaf(const Point& lo, const Point& hi, const std::vector<std::uint32_t>& set, double bound) {
        auto scan = [&](const double* c, double r, auto&& f) {
            const double r2 = r * r;
            for (auto id : set) {
                const double* p = cloud_.row(id);
                double d2 = 0.0;
                for (int a = 0; a < d_; ++a) d2 += (p[a] - c[a]) * (p[a] - c[a]);
                if (d2 <= r2 && !f(id, d2)) return;
            }
        };
        auto inside = [&](const Point& x) {
            for (int a = 0; a < d_; ++a)
                if (!(x[a] >= lo[a] && x[a] < hi[a])) return false;
            return true;
        };
        const double bound2 = bound * bound;
        const std::size_t m = set.size();
        std::array<std::size_t, kMaxDim + 1> pos{};
        auto extend = [&](auto&& self, int size) -> void {
            for (std::size_t q = pos[size - 1] + 1; q < m; ++q) {
                pos[size] = q;
                ids_[size] = set[q];
                rows_[size] = cloud_.row(set[q]);
                if (!fit_circumsphere(rows_.data(), size + 1, d_, fit_)) continue;
                if (fit_.radius_sq > bound2) continue;
                if (inside(fit_.center)) eval_.evaluate(ids_.data(), rows_.data(), size + 1, fit_, scan, out_);
                if (size + 1 <= k_max_) self(self, size + 1);
            }
        };
        for (std::size_t q = 0; q < m; ++q) {
            pos[0] = q;
            ids_[0] = set[q];
            rows_[0] = cloud_.row(set[q]);
            extend(extend, 1);
        }
    }

    const PointCloud& cloud_;
    int d_;
    int k_max_;
    detail::Evaluator eval_;
    std::vector<CriticalPoint>& out_;
    std::array<std::uint32_t, kMaxDim + 1> ids_{};
    std::array<const double*, kMaxDim + 1> rows_{};
    SimplexFit fit_;
};

}  // namespace

std::vector<CriticalPoint> enumerate_global(const PointCloud& cloud, const EnumOptions& opt) {
    const std::size_t n = cloud.size();
    if (n > opt.global_cap)
        throw GlobalCapExceeded("global enumeration limited to " + std::to_string(opt.global_cap) + " points, got " +
                                std::to_string(n));
    const int d = cloud.dim();
    const int k_max = detail::resolve_k_max(opt, d);
    std::vector<CriticalPoint> out;
    detail::append_minima(cloud, out);
    if (n < 2 || k_max < 1) return out;

    auto [lo, hi] = cloud.bounding_box();
    const double diam = (hi - lo).norm();
    const double floor_span = std::max(diam * 1e-3, 1e-12);
    double vol = 1.0;
    for (int a = 0; a < d; ++a) {
        hi[a] += floor_span * 1e-3;
        vol *= std::max(hi[a] - lo[a], floor_span);
    }
    const double side = std::pow(vol / static_cast<double>(n), 1.0 / d);
    std::array<long, kMaxDim> cells{};
    for (int a = 0; a < d; ++a) cells[a] = std::max(1L, static_cast<long>(std::ceil((hi[a] - lo[a]) / side)));

    const SpatialGrid grid(cloud, side);
    BranchAndBound bnb(cloud, k_max, out);
    std::array<long, kMaxDim> cur{};
    std::vector<std::uint32_t> set;
    for (;;) {
        Point clo(d), chi(d);
        for (int a = 0; a < d; ++a) {
            const double w = (hi[a] - lo[a]) / static_cast<double>(cells[a]);
            clo[a] = lo[a] + w * static_cast<double>(cur[a]);
            chi[a] = cur[a] + 1 == cells[a] ? hi[a] : lo[a] + w * static_cast<double>(cur[a] + 1);
        }
        const Point c = 0.5 * (clo + chi);
        const double h = 0.5 * (chi - clo).norm();
        const double d0 = grid.nearest(c.data()).second;
        set.clear();
        grid.visit_ball(c.data(), d0 + 2.0 * h + 4.0 * kGeomTol, [&](std::uint32_t id, double) {
            set.push_back(id);
            return true;
        });
        std::sort(set.begin(), set.end());
        bnb.process(clo, chi, set, 0);
        int a = 0;
        while (a < d && cur[a] + 1 == cells[a]) {
            cur[a] = 0;
            ++a;
        }
        if (a == d) break;
        ++cur[a];
    }
    detail::dedupe(out);
    return out;
}

std::vector<CriticalPoint> enumerate_critical(const PointCloud& cloud, double eps, const EnumOptions& opt) {
    if (is_global(eps)) return enumerate_global(cloud, opt);
    const std::size_t n = cloud.size();
    if (n < 2) return enumerate_grid(cloud, eps, opt);
    const int d = cloud.dim();
    const auto [lo, hi] = cloud.bounding_box();
    double vol = 1.0;
    for (int a = 0; a < d; ++a) vol *= std::max(hi[a] - lo[a], 2.0 * eps);
    const double neighbours = static_cast<double>(n) * unit_ball_volume(d) * std::pow(2.0 * eps, d) / vol;
    if (neighbours < 40.0 || n > opt.global_cap) return enumerate_grid(cloud, eps, opt);
    auto all = enumerate_global(cloud, opt);
    std::erase_if(all, [&](const CriticalPoint& p) { return p.index > 0 && p.value > eps + kGeomTol; });
    return all;
}

}  // namespace dmorse
