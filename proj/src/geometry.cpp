#include "dmorse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "dmorse/errors.hpp"

namespace dmorse {

namespace {

using DiffMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMaxDim + 1, kMaxDim>;
using GramMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim + 1, kMaxDim + 1>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim + 1, 1>;

DiffMatrix difference_matrix(std::span<const Point> pts) {
    const int d = static_cast<int>(pts[0].size());
    const int k = static_cast<int>(pts.size()) - 1;
    DiffMatrix a(k, d);
    for (int i = 0; i < k; ++i) a.row(i) = (pts[i + 1] - pts[0]).transpose();
    return a;
}

SmallVector singular_values(std::span<const Point> pts) {
    const DiffMatrix a = difference_matrix(pts);
    Eigen::JacobiSVD<DiffMatrix> svd(a);
    return svd.singularValues();
}

}  // namespace

double unit_ball_volume(int d) {
    if (d < 1) throw ConfigError("d", "unit_ball_volume requires d >= 1");
    return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

int affine_dimension(std::span<const Point> pts, double tol) {
    if (pts.size() <= 1) return 0;
    const SmallVector sv = singular_values(pts);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] >= tol) ++rank;
    return rank;
}

bool general_position(std::span<const Point> pts, double tol) {
    if (pts.empty()) return false;
    for (const auto& p : pts)
        if (!p.allFinite()) return false;
    const int k = static_cast<int>(pts.size()) - 1;
    if (k == 0) return true;
    if (k > pts[0].size() || k > kMaxDim) return false;
    return affine_dimension(pts, tol) == k;
}

bool fit_circumsphere(const double* const* rows, int count, int d, SimplexFit& out) {
    out.k = count - 1;
    out.ok = false;
    out.center.resize(d);
    if (count <= 0 || count > kMaxDim + 1) return false;
    const double* p0 = rows[0];
    if (count == 1) {
        for (int c = 0; c < d; ++c) out.center[c] = p0[c];
        out.radius_sq = 0.0;
        out.barycentric[0] = 1.0;
        out.ok = true;
        return true;
    }
    if (count == 2) {
        double r2 = 0.0;
        for (int c = 0; c < d; ++c) {
            out.center[c] = 0.5 * (p0[c] + rows[1][c]);
            const double diff = rows[1][c] - p0[c];
            r2 += diff * diff;
        }
        if (!(r2 > 0.0)) return false;
        out.radius_sq = 0.25 * r2;
        out.barycentric[0] = 0.5;
        out.barycentric[1] = 0.5;
        out.ok = true;
        return true;
    }
    const int k = count - 1;
    DiffMatrix a(k, d);
    for (int i = 0; i < k; ++i)
        for (int c = 0; c < d; ++c) a(i, c) = rows[i + 1][c] - p0[c];
    GramMatrix g = a * a.transpose();
    SmallVector rhs(k);
    for (int i = 0; i < k; ++i) rhs[i] = 0.5 * g(i, i);
    Eigen::LLT<GramMatrix> llt(g);
    if (llt.info() != Eigen::Success) return false;
    const SmallVector lambda = llt.solve(rhs);
    if (!lambda.allFinite()) return false;
    double sum = 0.0;
    Point offset = Point::Zero(d);
    for (int i = 0; i < k; ++i) {
        offset += lambda[i] * a.row(i).transpose();
        out.barycentric[i + 1] = lambda[i];
        sum += lambda[i];
    }
    out.barycentric[0] = 1.0 - sum;
    for (int c = 0; c < d; ++c) out.center[c] = p0[c] + offset[c];
    out.radius_sq = offset.squaredNorm();
    out.ok = std::isfinite(out.radius_sq);
    return out.ok;
}

bool fit_circumsphere(std::span<const Point> pts, SimplexFit& out) {
    std::array<const double*, kMaxDim + 1> rows{};
    if (pts.empty() || pts.size() > rows.size()) {
        out.ok = false;
        return false;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) rows[i] = pts[i].data();
    return fit_circumsphere(rows.data(), static_cast<int>(pts.size()), static_cast<int>(pts[0].size()), out);
}

CircumSphere circumsphere(std::span<const Point> pts, double tol) {
    if (pts.empty()) throw DegenerateConfiguration("circumsphere of an empty set");
    const int k = static_cast<int>(pts.size()) - 1;
    if (k > 0) {
        if (k > pts[0].size()) throw DegenerateConfiguration("more than d+1 points cannot be in general position");
        const SmallVector sv = singular_values(pts);
        const double smax = sv[0];
        const double smin = sv[sv.size() - 1];
        if (!(smin >= tol) || smax > smin / tol)
            throw DegenerateConfiguration("points are not in general position within tolerance");
    }
    SimplexFit fit;
    if (!fit_circumsphere(pts, fit)) throw DegenerateConfiguration("circumcentre system could not be solved");
    CircumSphere s;
    s.center = fit.center;
    s.radius = std::sqrt(fit.radius_sq);
    s.affine_dim = k;
    return s;
}

std::vector<double> barycentric_coordinates(const Point& c, std::span<const Point> pts) {
    const int k = static_cast<int>(pts.size()) - 1;
    std::vector<double> w(pts.size(), 0.0);
    if (k == 0) {
        w[0] = 1.0;
        return w;
    }
    const DiffMatrix a = difference_matrix(pts);
    const Point rhs = c - pts[0];
    using ColMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim + 1>;
    const ColMat at = a.transpose();
    Eigen::JacobiSVD<ColMat> svd(at, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const SmallVector lambda = svd.solve(rhs);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        w[i + 1] = lambda[i];
        sum += lambda[i];
    }
    w[0] = 1.0 - sum;
    return w;
}

bool in_open_convex_hull(const Point& c, std::span<const Point> pts, double hull_tol) {
    if (pts.empty()) return false;
    for (double w : barycentric_coordinates(c, pts))
        if (!(w > hull_tol)) return false;
    return true;
}

namespace {

Ball support_ball(const std::vector<Point>& support, int d) {
    Ball b;
    if (support.empty()) {
        b.center = Point::Zero(d);
        b.radius = -1.0;
        return b;
    }
    SimplexFit fit;
    if (fit_circumsphere(std::span<const Point>(support), fit)) {
        b.center = fit.center;
        b.radius = std::sqrt(fit.radius_sq);
        return b;
    }
    // Rank-deficient support: least-squares centre in the affine hull.
    const int k = static_cast<int>(support.size()) - 1;
    DiffMatrix a(k, d);
    for (int i = 0; i < k; ++i) a.row(i) = (support[i + 1] - support[0]).transpose();
    GramMatrix g = a * a.transpose();
    SmallVector rhs(k);
    for (int i = 0; i < k; ++i) rhs[i] = 0.5 * g(i, i);
    Eigen::JacobiSVD<GramMatrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    const SmallVector lambda = svd.solve(rhs);
    Point offset = Point::Zero(d);
    for (int i = 0; i < k; ++i) offset += lambda[i] * a.row(i).transpose();
    b.center = support[0] + offset;
    b.radius = 0.0;
    for (const auto& p : support) b.radius = std::max(b.radius, (p - b.center).norm());
    return b;
}

struct MoveToFront {
    std::span<const Point> pts;
    int d;
    std::list<int> order;
    std::vector<Point> support;

    Ball run(std::list<int>::iterator end) {
        Ball b = support_ball(support, d);
        if (static_cast<int>(support.size()) == d + 1) return b;
        for (auto it = order.begin(); it != end;) {
            auto cur = it++;
            if (!b.contains(pts[*cur])) {
                support.push_back(pts[*cur]);
                b = run(cur);
                support.pop_back();
                order.splice(order.begin(), order, cur);
            }
        }
        return b;
    }
};

}  // namespace

Ball min_enclosing_ball(std::span<const Point> pts) {
    if (pts.empty()) throw DegenerateInput("min_enclosing_ball of an empty set");
    const int d = static_cast<int>(pts[0].size());
    MoveToFront mtf{pts, d, {}, {}};
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) mtf.order.push_back(i);
    mtf.support.reserve(d + 1);
    Ball b = mtf.run(mtf.order.end());
    b.radius = std::max(b.radius, 0.0);
    return b;
}

double cap_volume(int d, double radius, double height) {
    if (height <= 0.0 || radius <= 0.0) return 0.0;
    const double full = unit_ball_volume(d) * std::pow(radius, d);
    if (height >= 2.0 * radius) return full;
    if (height > radius) return full - cap_volume(d, radius, 2.0 * radius - height);
    const double x = std::clamp((2.0 * radius * height - height * height) / (radius * radius), 0.0, 1.0);
    return 0.5 * full * boost::math::ibeta(0.5 * (d + 1), 0.5, x);
}

double two_ball_intersection_volume(const Ball& b1, const Ball& b2, int d) {
    const double r1 = b1.radius;
    const double r2 = b2.radius;
    if (r1 <= 0.0 || r2 <= 0.0) return 0.0;
    const double t = (b1.center - b2.center).norm();
    if (t >= r1 + r2) return 0.0;
    if (t <= std::abs(r1 - r2)) return unit_ball_volume(d) * std::pow(std::min(r1, r2), d);
    const double x1 = (t * t + r1 * r1 - r2 * r2) / (2.0 * t);
    const double x2 = t - x1;
    return cap_volume(d, r1, r1 - x1) + cap_volume(d, r2, r2 - x2);
}

double two_ball_union_volume(const Ball& b1, const Ball& b2, int d) {
    const double w = unit_ball_volume(d);
    const double v1 = b1.radius > 0.0 ? w * std::pow(b1.radius, d) : 0.0;
    const double v2 = b2.radius > 0.0 ? w * std::pow(b2.radius, d) : 0.0;
    return v1 + v2 - two_ball_intersection_volume(b1, b2, d);
}

}  // namespace dmorse
