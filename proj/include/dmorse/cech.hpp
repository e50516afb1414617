#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dmorse/critical.hpp"
#include "dmorse/point_process.hpp"

namespace dmorse {

struct CechOptions {
    /// Highest simplex dimension stored; -1 means d + 1. Clamped to n - 1.
    int dim_cap = -1;
    /// Total simplex budget; exceeding it throws ComplexTooLarge.
    std::size_t budget = 10'000'000;
};

/// Cech complex at radius eps: a simplex for every subset whose eps-balls
/// share a point, i.e. whose smallest enclosing ball has radius <= eps.
class CechComplex {
public:
    double epsilon = 0.0;
    int dim_cap = 0;
    std::size_t n_vertices = 0;
    /// True when some simplex above dim_cap exists and was not stored.
    bool truncated = false;
    /// simplices[j] holds the j-simplices as consecutive (j+1)-tuples in
    /// lexicographic order.
    std::vector<std::vector<std::uint32_t>> simplices;

    int top_dim() const { return static_cast<int>(simplices.size()) - 1; }
    std::size_t count(int j) const;
    std::span<const std::uint32_t> simplex(int j, std::size_t i) const;
    std::size_t total() const;
    /// Position of a sorted vertex tuple in its dimension, or npos.
    std::size_t find(std::span<const std::uint32_t> vertices) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

CechComplex build_cech(const PointCloud& cloud, double eps, const CechOptions& opt = {});

/// Alternating sum of simplex counts. Throws TruncatedComplex if the builder
/// dropped simplices.
std::int64_t euler_characteristic(const CechComplex& complex);

/// Mod-2 Betti numbers b_0..b_max_k by column reduction of the boundary
/// matrices. Throws BudgetExceeded when a needed dimension holds more than
/// `budget` simplices and TruncatedComplex when dimension max_k + 1 is missing.
std::vector<std::size_t> betti_numbers(const CechComplex& complex, int max_k, std::size_t budget = 20'000);

/// n + sum_{k>=1} (-1)^k N_k.
std::int64_t euler_from_critical(const CriticalCounts& counts);

/// Components of the union of eps-balls (union-find on pairs within 2 eps).
std::size_t ball_union_components(const PointCloud& cloud, double eps);

/// Checks downward closure, uniqueness, sortedness and the miniball condition.
std::vector<std::string> audit_complex(const CechComplex& complex, const PointCloud& cloud);

/// One line per simplex: "dim,v0,v1,...".
void write_complex(std::ostream& os, const CechComplex& complex);
/// Reads the format above; epsilon is NaN afterwards.
CechComplex read_complex(std::istream& is);

}  // namespace dmorse
