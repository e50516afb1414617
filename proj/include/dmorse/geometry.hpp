#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace dmorse {

/// Largest ambient dimension supported. Points use inline storage of this size.
inline constexpr int kMaxDim = 8;

/// Absolute tolerance (model units) for rank tests, equidistance residuals and
/// conditioning cutoffs.
inline constexpr double kGeomTol = 1e-9;

/// Barycentric threshold for the open convex hull test (strict inequality).
inline constexpr double kHullTol = 0.0;

using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

struct CircumSphere {
    Point center;
    double radius = 0.0;
    int affine_dim = 0;
};

struct Ball {
    Point center;
    double radius = 0.0;

    bool contains(const Point& p, double tol = kGeomTol) const {
        return (p - center).norm() <= radius + tol;
    }
};

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

/// True iff the points do not lie in an affine space of dimension |pts|-2.
/// Singular values of the difference matrix below `tol` count as zero.
bool general_position(std::span<const Point> pts, double tol = kGeomTol);

/// Affine dimension of a point set, using the same singular-value cutoff.
int affine_dimension(std::span<const Point> pts, double tol = kGeomTol);

/// Circumsphere of k+1 points in general position: centre in their affine
/// hull, equidistant from all of them.
/// Throws DegenerateConfiguration when the system is rank deficient or its
/// condition number exceeds 1/tol.
CircumSphere circumsphere(std::span<const Point> pts, double tol = kGeomTol);

/// Barycentric coordinates of `c` relative to `pts` (least squares within the
/// affine hull). Entry 0 belongs to pts[0].
std::vector<double> barycentric_coordinates(const Point& c, std::span<const Point> pts);

/// True iff every barycentric coordinate of c is strictly greater than `hull_tol`.
bool in_open_convex_hull(const Point& c, std::span<const Point> pts, double hull_tol = kHullTol);

/// Smallest enclosing ball (move-to-front recursion). Accepts any nonempty set.
Ball min_enclosing_ball(std::span<const Point> pts);

/// Volume of a hyperspherical cap of height h (0 <= h <= 2r) cut from a d-ball of radius r.
double cap_volume(int d, double radius, double height);

/// Volume of the intersection of two d-balls.
double two_ball_intersection_volume(const Ball& b1, const Ball& b2, int d);

/// Volume of the union of two d-balls.
double two_ball_union_volume(const Ball& b1, const Ball& b2, int d);

/// Low-level circumcentre solve used on hot paths. No rank test: `ok` is
/// false only when the Gram system could not be factorised.
struct SimplexFit {
    Point center;
    double radius_sq = 0.0;
    int k = 0;
    std::array<double, kMaxDim + 1> barycentric{};
    bool ok = false;
};

/// Solves for the circumcentre of `count` points given as a contiguous
/// array of d-dimensional coordinate rows.
bool fit_circumsphere(const double* const* rows, int count, int d, SimplexFit& out);
bool fit_circumsphere(std::span<const Point> pts, SimplexFit& out);

}  // namespace dmorse
