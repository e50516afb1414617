#include <algorithm>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "dmorse/cech.hpp"
#include "dmorse/errors.hpp"

namespace dmorse {

namespace {

// Rank over Z/2 of the boundary map from dimension j to j-1. Columns are
// sorted row-index lists reduced left to right by their lowest entry.
std::size_t boundary_rank(const CechComplex& cx, int j) {
    const std::size_t cols = cx.count(j);
    std::unordered_map<std::size_t, std::size_t> pivot_of_low;
    std::vector<std::vector<std::size_t>> reduced(cols);
    std::vector<std::uint32_t> face;
    std::vector<std::size_t> merged;
    std::size_t rank = 0;
    for (std::size_t c = 0; c < cols; ++c) {
        auto& col = reduced[c];
        const auto s = cx.simplex(j, c);
        for (int drop = 0; drop <= j; ++drop) {
            face.clear();
            for (int a = 0; a <= j; ++a)
                if (a != drop) face.push_back(s[a]);
            const std::size_t row = cx.find(face);
            if (row == CechComplex::npos) throw Error("complex is not closed under faces");
            col.push_back(row);
        }
        std::sort(col.begin(), col.end());
        while (!col.empty()) {
            const auto it = pivot_of_low.find(col.back());
            if (it == pivot_of_low.end()) break;
            const auto& other = reduced[it->second];
            merged.clear();
            std::set_symmetric_difference(col.begin(), col.end(), other.begin(), other.end(),
                                          std::back_inserter(merged));
            col.swap(merged);
        }
        if (!col.empty()) {
            pivot_of_low.emplace(col.back(), c);
            ++rank;
        }
    }
    return rank;
}

std::size_t edge_components(const CechComplex& cx) {
    const std::size_t n = cx.count(0);
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::size_t comps = n;
    for (std::size_t e = 0; e < cx.count(1); ++e) {
        const auto s = cx.simplex(1, e);
        const std::uint32_t a[] = {s[0]};
        const std::uint32_t b[] = {s[1]};
        const std::size_t ra = root(cx.find(a));
        const std::size_t rb = root(cx.find(b));
        if (ra != rb) {
            parent[std::max(ra, rb)] = std::min(ra, rb);
            --comps;
        }
    }
    return comps;
}

}  // namespace

std::vector<std::size_t> betti_numbers(const CechComplex& cx, int max_k, std::size_t budget) {
    if (max_k < 0) throw ConfigError("max_k", "must be nonnegative");
    if (cx.truncated && max_k + 1 > cx.dim_cap)
        throw TruncatedComplex("Betti number " + std::to_string(max_k) + " needs dimension " +
                               std::to_string(max_k + 1) + " above the cap");
    for (int j = 0; j <= max_k + 1; ++j)
        if (cx.count(j) > budget)
            throw BudgetExceeded("dimension " + std::to_string(j) + " holds " + std::to_string(cx.count(j)) +
                                 " simplices, budget " + std::to_string(budget));
    std::vector<std::size_t> rank(static_cast<std::size_t>(max_k) + 2, 0);
    for (int j = 1; j <= max_k + 1; ++j) rank[j] = boundary_rank(cx, j);
    std::vector<std::size_t> betti(static_cast<std::size_t>(max_k) + 1);
    for (int k = 0; k <= max_k; ++k) betti[k] = cx.count(k) - rank[k] - rank[k + 1];
    if (betti[0] != edge_components(cx)) throw Error("b_0 disagrees with union-find on the edge graph");
    return betti;
}

}  // namespace dmorse
