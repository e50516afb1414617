#include "dmorse/critical.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <tuple>

#include "critical_eval.hpp"
#include "dmorse/errors.hpp"
#include "dmorse/spatial_grid.hpp"

namespace dmorse {

namespace detail {

bool rows_in_general_position(const double* const* rows, int count, int d, double tol) {
    if (count <= 1) return true;
    const int k = count - 1;
    if (k > d) return false;
    DiffMat a(k, d);
    for (int i = 0; i < k; ++i)
        for (int c = 0; c < d; ++c) a(i, c) = rows[i + 1][c] - rows[0][c];
    Eigen::JacobiSVD<DiffMat> svd(a);
    const auto& sv = svd.singularValues();
    const double smin = sv[k - 1];
    return smin >= tol && sv[0] <= smin / tol;
}

int degenerate_index(const PointCloud& cloud, const Point& center, const std::vector<std::uint32_t>& sphere,
                     const std::uint32_t* subset, int count) {
    const int d = cloud.dim();
    std::array<const double*, kMaxDim + 1> rows{};
    std::array<std::uint32_t, kMaxDim + 1> basis{};
    int size = 0;
    for (std::uint32_t id : sphere) {
        rows[size] = cloud.row(id);
        if (rows_in_general_position(rows.data(), size + 1, d)) {
            basis[size] = id;
            if (size >= count || basis[size] != subset[size]) return -1;
            ++size;
            if (size == d + 1) break;
        }
    }
    if (size != count) return -1;
    const int m = size - 1;
    if (m < 1) return -1;

    // Orthonormal basis of the affine hull's direction space.
    DiffMat a(m, d);
    for (int i = 0; i < m; ++i)
        for (int c = 0; c < d; ++c) a(i, c) = rows[i + 1][c] - rows[0][c];
    Eigen::JacobiSVD<DiffMat> svd(a, Eigen::ComputeFullV);
    const Eigen::MatrixXd v = svd.matrixV().leftCols(m);

    const int z = static_cast<int>(sphere.size());
    Eigen::MatrixXd w(z, m);
    for (int i = 0; i < z; ++i) {
        const double* p = cloud.row(sphere[i]);
        Eigen::VectorXd diff(d);
        for (int c = 0; c < d; ++c) diff[c] = p[c] - center[c];
        w.row(i) = (v.transpose() * diff).transpose();
    }

    // The centre is on the relative boundary iff some nonzero direction has
    // nonpositive inner product with every w_z. Extreme rays of that cone are
    // normals to m-1 of the w_z.
    auto separates = [&](const Eigen::VectorXd& dir) {
        for (int s = -1; s <= 1; s += 2) {
            bool all = true;
            for (int i = 0; i < z && all; ++i)
                if (s * w.row(i).dot(dir) > kGeomTol) all = false;
            if (all) return true;
        }
        return false;
    };
    if (m == 1) return separates(Eigen::VectorXd::Ones(1)) ? -1 : 1;

    std::vector<int> pick(m - 1);
    for (int i = 0; i < m - 1; ++i) pick[i] = i;
    for (;;) {
        Eigen::MatrixXd sub(m - 1, m);
        for (int i = 0; i < m - 1; ++i) sub.row(i) = w.row(pick[i]);
        Eigen::JacobiSVD<Eigen::MatrixXd> s2(sub, Eigen::ComputeFullV);
        if (s2.singularValues()[m - 2] >= kGeomTol && separates(s2.matrixV().col(m - 1))) return -1;
        int i = m - 2;
        while (i >= 0 && pick[i] == z - (m - 1) + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < m - 1; ++j) pick[j] = pick[j - 1] + 1;
    }
    return m;
}

void append_minima(const PointCloud& cloud, std::vector<CriticalPoint>& out) {
    out.reserve(out.size() + cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CriticalPoint cp;
        cp.index = 0;
        cp.center = cloud.point(i);
        cp.value = 0.0;
        cp.generators = {static_cast<std::uint32_t>(i)};
        out.push_back(std::move(cp));
    }
}

void dedupe(std::vector<CriticalPoint>& points) {
    constexpr double q = 1e-7;
    auto key = [](const CriticalPoint& p) {
        std::array<long long, kMaxDim + 2> k{};
        k[0] = p.index;
        k[1] = std::llround(p.value / q);
        for (int c = 0; c < p.center.size(); ++c) k[c + 2] = std::llround(p.center[c] / q);
        return k;
    };
    std::vector<std::pair<std::array<long long, kMaxDim + 2>, std::size_t>> keyed;
    keyed.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) keyed.emplace_back(key(points[i]), i);
    std::sort(keyed.begin(), keyed.end());
    std::vector<CriticalPoint> kept;
    kept.reserve(points.size());
    for (std::size_t i = 0; i < keyed.size(); ++i)
        if (i == 0 || keyed[i].first != keyed[i - 1].first) kept.push_back(std::move(points[keyed[i].second]));
    points = std::move(kept);
    sort_canonical(points);
}

}  // namespace detail

using detail::Evaluator;

std::int64_t CriticalCounts::alternating_sum() const {
    std::int64_t s = 0;
    for (std::size_t k = 0; k < by_index.size(); ++k)
        s += (k % 2 == 0 ? 1 : -1) * static_cast<std::int64_t>(by_index[k]);
    return s;
}

bool is_generating(std::span<const std::uint32_t> subset, const PointCloud& cloud, double eps) {
    const int k = static_cast<int>(subset.size()) - 1;
    if (k < 1 || k > cloud.dim()) return false;
    std::vector<Point> y;
    for (std::uint32_t id : subset) {
        if (id >= cloud.size()) return false;
        y.push_back(cloud.point(id));
    }
    if (!general_position(y)) return false;
    CircumSphere s;
    try {
        s = circumsphere(y);
    } catch (const DegenerateConfiguration&) {
        return false;
    }
    if (!is_global(eps) && s.radius > eps + kGeomTol) return false;
    if (!in_open_convex_hull(s.center, y)) return false;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (std::find(subset.begin(), subset.end(), i) != subset.end()) continue;
        if ((cloud.point(i) - s.center).norm() < s.radius - kGeomTol) return false;
    }
    return true;
}

std::vector<CriticalPoint> enumerate_brute(const PointCloud& cloud, double eps, const EnumOptions& opt) {
    const std::size_t cap = opt.oracle_cap ? opt.oracle_cap : (is_global(eps) ? 25 : 300);
    const std::size_t n = cloud.size();
    if (n > cap)
        throw OracleCapExceeded("brute-force enumeration limited to " + std::to_string(cap) + " points, got " +
                                std::to_string(n));
    if (!is_global(eps) && !(eps > 0.0)) throw ConfigError("eps", "radius must be positive");
    const int d = cloud.dim();
    const int k_max = detail::resolve_k_max(opt, d);
    std::vector<CriticalPoint> out;
    detail::append_minima(cloud, out);
    if (n < 2 || k_max < 1) return out;

    const double pair_limit = is_global(eps) ? kGlobal : 2.0 * eps + 2.0 * kGeomTol;
    auto scan_all = [&](const double* c, double r, auto&& f) {
        const double r2 = r * r;
        for (std::size_t i = 0; i < n; ++i) {
            const double* p = cloud.row(i);
            double d2 = 0.0;
            for (int a = 0; a < d; ++a) d2 += (p[a] - c[a]) * (p[a] - c[a]);
            if (d2 <= r2 && !f(static_cast<std::uint32_t>(i), d2)) return;
        }
    };
    auto dist = [&](std::uint32_t i, std::uint32_t j) {
        double d2 = 0.0;
        for (int a = 0; a < d; ++a) d2 += (cloud.row(i)[a] - cloud.row(j)[a]) * (cloud.row(i)[a] - cloud.row(j)[a]);
        return std::sqrt(d2);
    };

    Evaluator eval(cloud, eps);
    std::array<std::uint32_t, kMaxDim + 1> ids{};
    std::array<const double*, kMaxDim + 1> rows{};
    SimplexFit fit;
    auto extend = [&](auto&& self, int size) -> void {
        for (std::uint32_t j = ids[size - 1] + 1; j < n; ++j) {
            bool close = true;
            for (int i = 0; i < size && close; ++i) close = dist(ids[i], j) <= pair_limit;
            if (!close) continue;
            ids[size] = j;
            rows[size] = cloud.row(j);
            if (fit_circumsphere(rows.data(), size + 1, d, fit))
                eval.evaluate(ids.data(), rows.data(), size + 1, fit, scan_all, out);
            if (size + 1 <= k_max) self(self, size + 1);
        }
    };
    for (std::uint32_t i = 0; i < n; ++i) {
        ids[0] = i;
        rows[0] = cloud.row(i);
        extend(extend, 1);
    }
    sort_canonical(out);
    return out;
}

std::vector<CriticalPoint> enumerate_grid(const PointCloud& cloud, double eps, const EnumOptions& opt) {
    if (!(eps > 0.0) || is_global(eps)) throw ConfigError("eps", "grid enumeration needs a finite positive radius");
    const std::size_t n = cloud.size();
    const int d = cloud.dim();
    const int k_max = detail::resolve_k_max(opt, d);
    std::vector<CriticalPoint> out;
    detail::append_minima(cloud, out);
    if (n < 2 || k_max < 1) return out;

    const SpatialGrid grid(cloud, eps);
    const double pair_limit = 2.0 * eps + 2.0 * kGeomTol;

    // Forward neighbour lists (j > i within 2 eps), CSR layout.
    std::vector<std::uint32_t> start(n + 1, 0);
    std::vector<std::uint32_t> adj;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t first = adj.size();
        grid.visit_ball(cloud.row(i), pair_limit, [&](std::uint32_t j, double) {
            if (j > i) adj.push_back(j);
            return true;
        });
        std::sort(adj.begin() + static_cast<std::ptrdiff_t>(first), adj.end());
        start[i + 1] = static_cast<std::uint32_t>(adj.size());
    }

    auto query = [&](const double* c, double r, auto&& f) { grid.visit_ball(c, r, f); };
    Evaluator eval(cloud, eps);
    std::array<std::uint32_t, kMaxDim + 1> ids{};
    std::array<const double*, kMaxDim + 1> rows{};
    std::array<std::vector<std::uint32_t>, kMaxDim + 2> cand;
    SimplexFit fit;
    auto extend = [&](auto&& self, int size) -> void {
        const auto& list = cand[size];
        for (std::size_t p = 0; p < list.size(); ++p) {
            const std::uint32_t j = list[p];
            ids[size] = j;
            rows[size] = cloud.row(j);
            if (!fit_circumsphere(rows.data(), size + 1, d, fit)) continue;
            if (fit.radius_sq > (eps + kGeomTol) * (eps + kGeomTol)) continue;
            eval.evaluate(ids.data(), rows.data(), size + 1, fit, query, out);
            if (size + 1 > k_max) continue;
            auto& next = cand[size + 1];
            next.clear();
            std::set_intersection(list.begin() + static_cast<std::ptrdiff_t>(p) + 1, list.end(), adj.begin() + start[j],
                                  adj.begin() + start[j + 1], std::back_inserter(next));
            if (!next.empty()) self(self, size + 1);
        }
    };
    for (std::uint32_t i = 0; i < n; ++i) {
        ids[0] = i;
        rows[0] = cloud.row(i);
        cand[1].assign(adj.begin() + start[i], adj.begin() + start[i + 1]);
        extend(extend, 1);
    }
    sort_canonical(out);
    return out;
}

CriticalCounts counts(const std::vector<CriticalPoint>& points, std::size_t n, int d, double eps) {
    CriticalCounts c;
    c.by_index.assign(static_cast<std::size_t>(d) + 1, 0);
    c.by_index[0] = n;
    c.radius = eps;
    c.n = n;
    for (const auto& p : points)
        if (p.index >= 1 && p.index <= d) ++c.by_index[p.index];
    return c;
}

void sort_canonical(std::vector<CriticalPoint>& points) {
    std::sort(points.begin(), points.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        return std::tie(a.index, a.value, a.generators) < std::tie(b.index, b.value, b.generators);
    });
}

std::vector<std::string> audit(const std::vector<CriticalPoint>& points, const PointCloud& cloud, double eps) {
    std::vector<std::string> issues;
    const int d = cloud.dim();
    auto fail = [&](std::size_t i, const std::string& what) {
        issues.push_back("record " + std::to_string(i) + ": " + what);
    };
    for (std::size_t r = 0; r < points.size(); ++r) {
        const auto& p = points[r];
        if (p.index < 0 || p.index > d) {
            fail(r, "index out of range");
            continue;
        }
        if (static_cast<int>(p.generators.size()) != p.index + 1) {
            fail(r, "generator count does not match index");
            continue;
        }
        if (!std::is_sorted(p.generators.begin(), p.generators.end()) ||
            std::adjacent_find(p.generators.begin(), p.generators.end()) != p.generators.end()) {
            fail(r, "generators not sorted and distinct");
            continue;
        }
        if (p.generators.back() >= cloud.size()) {
            fail(r, "generator index out of range");
            continue;
        }
        std::vector<Point> y;
        for (auto g : p.generators) y.push_back(cloud.point(g));
        if (p.index == 0) {
            if ((p.center - y[0]).norm() > kGeomTol || p.value != 0.0) fail(r, "minimum is not its own point");
            continue;
        }
        if (!general_position(y)) fail(r, "generators not in general position");
        for (const auto& q : y)
            if (std::abs((q - p.center).norm() - p.value) > kGeomTol) fail(r, "generator off the sphere");
        if (!is_global(eps) && p.value > eps + kGeomTol) fail(r, "value exceeds radius");
        std::size_t on_sphere = 0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double dist = (cloud.point(i) - p.center).norm();
            if (dist < p.value - kGeomTol) {
                fail(r, "point " + std::to_string(i) + " inside the circumball");
                break;
            }
            if (dist <= p.value + kGeomTol) ++on_sphere;
        }
        // Cospherical records follow the tie rule; the strict hull test applies otherwise.
        if (on_sphere == y.size() && !in_open_convex_hull(p.center, y)) fail(r, "centre not in the open hull");
    }
    for (std::size_t r = 1; r < points.size(); ++r)
        if (points[r].index == points[r - 1].index && points[r].generators == points[r - 1].generators)
            fail(r, "duplicate generator set");
    return issues;
}

void write_critical_csv(std::ostream& os, const std::vector<CriticalPoint>& points, int d) {
    os << "index,value";
    for (int c = 0; c < d; ++c) os << ",c" << c;
    os << ",generators\n";
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : points) {
        os << p.index << ',' << p.value;
        for (int c = 0; c < d; ++c) os << ',' << p.center[c];
        os << ',';
        for (std::size_t i = 0; i < p.generators.size(); ++i) os << (i ? "|" : "") << p.generators[i];
        os << '\n';
    }
    os.precision(old);
}

}  // namespace dmorse
