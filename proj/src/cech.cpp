#include "dmorse/cech.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dmorse/errors.hpp"
#include "dmorse/spatial_grid.hpp"

namespace dmorse {

std::size_t CechComplex::count(int j) const {
    if (j < 0 || j > top_dim()) return 0;
    return simplices[j].size() / static_cast<std::size_t>(j + 1);
}

std::span<const std::uint32_t> CechComplex::simplex(int j, std::size_t i) const {
    const std::size_t w = static_cast<std::size_t>(j) + 1;
    return {simplices[j].data() + i * w, w};
}

std::size_t CechComplex::total() const {
    std::size_t t = 0;
    for (int j = 0; j <= top_dim(); ++j) t += count(j);
    return t;
}

std::size_t CechComplex::find(std::span<const std::uint32_t> v) const {
    const int j = static_cast<int>(v.size()) - 1;
    std::size_t lo = 0;
    std::size_t hi = count(j);
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const auto s = simplex(j, mid);
        if (std::lexicographical_compare(s.begin(), s.end(), v.begin(), v.end()))
            lo = mid + 1;
        else
            hi = mid;
    }
    if (lo < count(j) && std::equal(v.begin(), v.end(), simplex(j, lo).begin())) return lo;
    return npos;
}

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t root(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = root(a);
        b = root(b);
        if (a == b) return false;
        parent_[std::max(a, b)] = std::min(a, b);
        return true;
    }

private:
    std::vector<std::size_t> parent_;
};

// Forward adjacency (j > i, |x_i - x_j| <= 2 eps) in CSR layout.
void pair_graph(const PointCloud& cloud, double eps, std::vector<std::uint32_t>& start,
                std::vector<std::uint32_t>& adj) {
    const std::size_t n = cloud.size();
    start.assign(n + 1, 0);
    adj.clear();
    if (n == 0) return;
    const SpatialGrid grid(cloud, 2.0 * eps);
    const double reach = 2.0 * eps + 2.0 * kGeomTol;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t first = adj.size();
        grid.visit_ball(cloud.row(i), reach, [&](std::uint32_t j, double) {
            if (j > i) adj.push_back(j);
            return true;
        });
        std::sort(adj.begin() + static_cast<std::ptrdiff_t>(first), adj.end());
        start[i + 1] = static_cast<std::uint32_t>(adj.size());
    }
}

}  // namespace

CechComplex build_cech(const PointCloud& cloud, double eps, const CechOptions& opt) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("eps", "radius must be positive and finite");
    const std::size_t n = cloud.size();
    const int d = cloud.dim();
    int cap = opt.dim_cap < 0 ? d + 1 : opt.dim_cap;
    cap = std::min<long>(cap, n == 0 ? 0 : static_cast<long>(n) - 1);

    CechComplex cx;
    cx.epsilon = eps;
    cx.dim_cap = cap;
    cx.n_vertices = n;
    cx.simplices.assign(static_cast<std::size_t>(cap) + 1, {});
    cx.simplices[0].resize(n);
    std::iota(cx.simplices[0].begin(), cx.simplices[0].end(), 0u);
    if (n > opt.budget) throw ComplexTooLarge("vertex count exceeds the simplex budget");
    if (cap < 1) {
        // Any pair in range would be an uncounted edge.
        if (n > 1) {
            std::vector<std::uint32_t> start, adj;
            pair_graph(cloud, eps, start, adj);
            cx.truncated = !adj.empty();
        }
        return cx;
    }

    std::vector<std::uint32_t> start, adj;
    pair_graph(cloud, eps, start, adj);
    std::size_t total = n;

    std::vector<std::uint32_t> verts;
    std::vector<Point> pts;
    std::vector<std::vector<std::uint32_t>> cand(static_cast<std::size_t>(cap) + 2);
    const double limit = eps + kGeomTol;

    auto emit = [&](int j) {
        auto& dst = cx.simplices[j];
        dst.insert(dst.end(), verts.begin(), verts.end());
        if (++total > opt.budget)
            throw ComplexTooLarge("Cech complex exceeds the budget of " + std::to_string(opt.budget) + " simplices");
    };

    // Cliques of the pair graph grown in lexicographic order; the miniball
    // radius is monotone under inclusion, so failing sets are not extended.
    auto extend = [&](auto&& self, int j, const Ball& ball) -> void {
        const auto& list = cand[j];
        for (std::size_t p = 0; p < list.size(); ++p) {
            const std::uint32_t v = list[p];
            const Point q = cloud.point(v);
            pts.push_back(q);
            Ball next = ball;
            if (!ball.contains(q, 0.0)) next = min_enclosing_ball(pts);
            if (next.radius <= limit) {
                if (j + 1 > cap) {
                    cx.truncated = true;
                    pts.pop_back();
                    return;
                }
                verts.push_back(v);
                emit(j + 1);
                auto& sub = cand[j + 1];
                sub.clear();
                std::set_intersection(list.begin() + static_cast<std::ptrdiff_t>(p) + 1, list.end(),
                                      adj.begin() + start[v], adj.begin() + start[v + 1], std::back_inserter(sub));
                if (!sub.empty()) self(self, j + 1, next);
                verts.pop_back();
            }
            pts.pop_back();
        }
    };
    for (std::uint32_t i = 0; i < n; ++i) {
        verts.assign(1, i);
        pts.assign(1, cloud.point(i));
        cand[0].assign(adj.begin() + start[i], adj.begin() + start[i + 1]);
        Ball b{pts[0], 0.0};
        extend(extend, 0, b);
    }
    while (cx.simplices.size() > 1 && cx.simplices.back().empty()) cx.simplices.pop_back();
    return cx;
}

std::int64_t euler_characteristic(const CechComplex& cx) {
    if (cx.truncated) throw TruncatedComplex("complex was truncated at dimension " + std::to_string(cx.dim_cap));
    std::int64_t chi = 0;
    for (int j = 0; j <= cx.top_dim(); ++j) chi += (j % 2 == 0 ? 1 : -1) * static_cast<std::int64_t>(cx.count(j));
    return chi;
}

std::int64_t euler_from_critical(const CriticalCounts& c) {
    std::int64_t chi = static_cast<std::int64_t>(c.n);
    for (std::size_t k = 1; k < c.by_index.size(); ++k)
        chi += (k % 2 == 0 ? 1 : -1) * static_cast<std::int64_t>(c.by_index[k]);
    return chi;
}

std::size_t ball_union_components(const PointCloud& cloud, double eps) {
    const std::size_t n = cloud.size();
    std::vector<std::uint32_t> start, adj;
    pair_graph(cloud, eps, start, adj);
    UnionFind uf(n);
    std::size_t comps = n;
    for (std::size_t i = 0; i < n; ++i)
        for (std::uint32_t e = start[i]; e < start[i + 1]; ++e)
            if (uf.unite(i, adj[e])) --comps;
    return comps;
}

std::vector<std::string> audit_complex(const CechComplex& cx, const PointCloud& cloud) {
    std::vector<std::string> issues;
    std::vector<std::uint32_t> face;
    for (int j = 0; j <= cx.top_dim(); ++j) {
        for (std::size_t i = 0; i < cx.count(j); ++i) {
            const auto s = cx.simplex(j, i);
            const std::string tag = "simplex " + std::to_string(j) + ":" + std::to_string(i);
            if (i > 0) {
                const auto prev = cx.simplex(j, i - 1);
                if (!std::lexicographical_compare(prev.begin(), prev.end(), s.begin(), s.end()))
                    issues.push_back(tag + " out of order or duplicated");
            }
            if (std::adjacent_find(s.begin(), s.end(), std::greater_equal<>()) != s.end())
                issues.push_back(tag + " vertices not strictly increasing");
            if (s.back() >= cloud.size()) {
                issues.push_back(tag + " vertex out of range");
                continue;
            }
            std::vector<Point> pts;
            for (auto v : s) pts.push_back(cloud.point(v));
            if (j > 0 && min_enclosing_ball(pts).radius > cx.epsilon + kGeomTol)
                issues.push_back(tag + " miniball exceeds the radius");
            if (j == 0) continue;
            for (int drop = 0; drop <= j; ++drop) {
                face.clear();
                for (int a = 0; a <= j; ++a)
                    if (a != drop) face.push_back(s[a]);
                if (cx.find(face) == CechComplex::npos) issues.push_back(tag + " missing a face");
            }
        }
    }
    return issues;
}

void write_complex(std::ostream& os, const CechComplex& cx) {
    for (int j = 0; j <= cx.top_dim(); ++j)
        for (std::size_t i = 0; i < cx.count(j); ++i) {
            os << j;
            for (auto v : cx.simplex(j, i)) os << ',' << v;
            os << '\n';
        }
}

CechComplex read_complex(std::istream& is) {
    CechComplex cx;
    cx.epsilon = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<std::uint32_t>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<long long> vals;
        while (std::getline(ls, field, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stoll(field, &used));
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw FormatError("line " + std::to_string(lineno) + ": bad integer '" + field + "'");
            }
        }
        if (vals.size() < 2 || vals[0] < 0 || static_cast<long long>(vals.size()) != vals[0] + 2)
            throw FormatError("line " + std::to_string(lineno) + ": expected dim followed by dim+1 vertices");
        const auto j = static_cast<std::size_t>(vals[0]);
        if (cx.simplices.size() <= j) cx.simplices.resize(j + 1);
        std::vector<std::uint32_t> s;
        for (std::size_t a = 1; a < vals.size(); ++a) {
            if (vals[a] < 0) throw FormatError("line " + std::to_string(lineno) + ": negative vertex");
            s.push_back(static_cast<std::uint32_t>(vals[a]));
        }
        std::sort(s.begin(), s.end());
        rows.push_back(std::move(s));
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    for (const auto& s : rows) {
        auto& dst = cx.simplices[s.size() - 1];
        dst.insert(dst.end(), s.begin(), s.end());
    }
    if (cx.simplices.empty()) cx.simplices.resize(1);
    cx.dim_cap = cx.top_dim();
    cx.n_vertices = cx.count(0);
    return cx;
}

}  // namespace dmorse
