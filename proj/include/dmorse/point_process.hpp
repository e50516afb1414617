#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmorse/geometry.hpp"
#include "dmorse/rng.hpp"

namespace dmorse {

/// A sampleable, evaluable probability density on R^d together with the
/// support properties the limit theorems are stated under.
class Density {
public:
    virtual ~Density() = default;

    virtual int dim() const = 0;
    virtual double pdf(const Point& x) const = 0;
    virtual Point sample(Rng& rng) const = 0;

    /// Supremum of f.
    virtual double f_max() const = 0;
    /// Infimum of f over supp(f); 0 when f is not bounded below.
    virtual double f_min() const = 0;
    virtual std::optional<double> support_volume() const = 0;
    virtual bool support_convex() const = 0;
    virtual std::optional<double> support_diameter() const = 0;

    /// Compact support and f_min > 0.
    bool lower_bounded() const { return support_volume().has_value() && f_min() > 0.0; }

    /// Closed form of the integral of f^m over R^d when one is known.
    virtual std::optional<double> integral_of_power(int m) const = 0;

    /// True for densities constant on their support.
    virtual bool is_uniform() const { return false; }

    /// Catalog identifier and parameters; round-trips through make_density().
    virtual std::string id() const = 0;
    virtual nlohmann::json params() const = 0;
    nlohmann::json describe() const;
};

using DensityPtr = std::shared_ptr<const Density>;

/// Uniform on [0, side]^d.
DensityPtr uniform_box(int d, double side = 1.0);
/// Uniform on the closed ball of the given radius centred at the origin.
DensityPtr uniform_ball(int d, double radius = 1.0);
/// Uniform on {r_in <= |x| <= r_out}.
DensityPtr uniform_annulus(int d, double r_in, double r_out);
/// Centred isotropic Gaussian with per-coordinate standard deviation sigma.
DensityPtr isotropic_gaussian(int d, double sigma = 1.0);

/// Builds a catalog density from its id and a JSON object of parameters
/// ("d" plus the density-specific keys). Throws ConfigError on bad input.
DensityPtr make_density(const std::string& id, const nlohmann::json& params);
DensityPtr make_density(const nlohmann::json& spec);

std::vector<std::string> builtin_density_ids();

enum class ProcessKind { iid, poisson };

std::string to_string(ProcessKind kind);
ProcessKind process_kind_from_string(const std::string& s);

/// n points in R^d stored as contiguous rows.
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(int dim, ProcessKind kind = ProcessKind::iid, std::uint64_t seed = 0);
    PointCloud(int dim, std::vector<double> coords, ProcessKind kind = ProcessKind::iid, std::uint64_t seed = 0);
    static PointCloud from_points(const std::vector<Point>& pts);

    int dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / static_cast<std::size_t>(dim_); }
    bool empty() const { return size() == 0; }

    const double* row(std::size_t i) const { return coords_.data() + i * static_cast<std::size_t>(dim_); }
    Point point(std::size_t i) const;
    const std::vector<double>& coords() const { return coords_; }

    void push_back(const Point& p);
    void reserve(std::size_t n) { coords_.reserve(n * static_cast<std::size_t>(dim_)); }

    ProcessKind process_kind() const { return kind_; }
    std::uint64_t seed() const { return seed_; }
    void set_provenance(ProcessKind kind, std::uint64_t seed) {
        kind_ = kind;
        seed_ = seed;
    }

    /// Axis-aligned bounding box (lo, hi). Requires a nonempty cloud.
    std::pair<Point, Point> bounding_box() const;
    /// Diagonal of the bounding box: an upper bound for every pairwise distance.
    double bounding_diameter() const;

    friend bool operator==(const PointCloud& a, const PointCloud& b) {
        return a.dim_ == b.dim_ && a.coords_ == b.coords_;
    }

private:
    int dim_ = 0;
    std::vector<double> coords_;
    ProcessKind kind_ = ProcessKind::iid;
    std::uint64_t seed_ = 0;
};

/// Exactly n independent draws from f.
PointCloud sample_iid(const Density& f, std::size_t n, Rng& rng);

/// Poisson process with intensity n f, realised as N ~ Poisson(n) followed by
/// N independent draws from f.
PointCloud sample_poisson(const Density& f, double n, Rng& rng);

// Serialization ---------------------------------------------------------------

/// CSV: header line "dim,<d>" followed by one comma-separated point per row.
void write_cloud_csv(std::ostream& os, const PointCloud& cloud);
PointCloud read_cloud_csv(std::istream& is);

/// Binary: "MCPC", version u8 (=1), d u16, count u64, then count*d f64, all little endian.
void write_cloud_binary(std::ostream& os, const PointCloud& cloud);
PointCloud read_cloud_binary(std::istream& is);

/// Picks the reader from the file contents (magic bytes vs text).
PointCloud load_cloud(const std::string& path);
void save_cloud(const std::string& path, const PointCloud& cloud);

}  // namespace dmorse
