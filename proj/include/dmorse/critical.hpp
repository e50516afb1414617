#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dmorse/geometry.hpp"
#include "dmorse/point_process.hpp"

namespace dmorse {

/// Radius value meaning "no CP3 restriction".
inline constexpr double kGlobal = std::numeric_limits<double>::infinity();

inline bool is_global(double eps) { return std::isinf(eps); }

/// A critical point of the distance function, with the subset that generates it.
struct CriticalPoint {
    int index = 0;
    Point center;
    double value = 0.0;
    std::vector<std::uint32_t> generators;  // sorted, index + 1 entries
};

struct CriticalCounts {
    std::vector<std::uint64_t> by_index;  // N_0 .. N_d
    double radius = kGlobal;
    std::size_t n = 0;

    std::uint64_t operator[](int k) const {
        return k >= 0 && k < static_cast<int>(by_index.size()) ? by_index[k] : 0;
    }
    /// sum_k (-1)^k N_k
    std::int64_t alternating_sum() const;
};

struct EnumOptions {
    /// Largest Morse index to report; -1 means the ambient dimension.
    int k_max = -1;
    /// Size limit for the exhaustive oracle; 0 selects the default
    /// (300 with a finite radius, 25 without).
    std::size_t oracle_cap = 0;
    /// Size limit for global enumeration.
    std::size_t global_cap = 50000;
};

/// Literal generation test: general position, circumcentre in the open hull,
/// no other cloud point strictly inside the circumball, and R <= eps unless global.
bool is_generating(std::span<const std::uint32_t> subset, const PointCloud& cloud, double eps);

/// Exhaustive oracle over all subsets. Throws OracleCapExceeded above the cap.
std::vector<CriticalPoint> enumerate_brute(const PointCloud& cloud, double eps, const EnumOptions& opt = {});

/// Grid-accelerated enumeration for a finite radius.
std::vector<CriticalPoint> enumerate_grid(const PointCloud& cloud, double eps, const EnumOptions& opt = {});

/// All critical points regardless of value. Spatial branch and bound over the
/// location of the critical point. Throws GlobalCapExceeded above the cap.
std::vector<CriticalPoint> enumerate_global(const PointCloud& cloud, const EnumOptions& opt = {});

/// Picks the cheaper exact method for the given radius: the grid path when
/// neighbourhoods are small, otherwise global enumeration filtered by value.
std::vector<CriticalPoint> enumerate_critical(const PointCloud& cloud, double eps, const EnumOptions& opt = {});

/// Tallies by index. N_0 is always n; index-0 records in the list are ignored.
CriticalCounts counts(const std::vector<CriticalPoint>& points, std::size_t n, int d, double eps);

/// Sorts by (index, value, generators).
void sort_canonical(std::vector<CriticalPoint>& points);

/// Re-verifies every record against the cloud with the geometry predicates.
/// Returns one message per violated invariant; empty means clean.
std::vector<std::string> audit(const std::vector<CriticalPoint>& points, const PointCloud& cloud, double eps);

/// CSV with header "index,value,c0,..,c{d-1},generators"; generators joined by '|'.
void write_critical_csv(std::ostream& os, const std::vector<CriticalPoint>& points, int d);

}  // namespace dmorse
