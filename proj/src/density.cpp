#include <cmath>
#include <numbers>
#include <random>

#include "dmorse/errors.hpp"
#include "dmorse/point_process.hpp"

namespace dmorse {

nlohmann::json Density::describe() const {
    nlohmann::json j = params();
    j["id"] = id();
    return j;
}

namespace {

void check_dim(int d) {
    if (d < 1 || d > kMaxDim) throw ConfigError("density.d", "dimension must be in [1, " + std::to_string(kMaxDim) + "]");
}

Point gaussian_point(int d, double sigma, Rng& rng) {
    std::normal_distribution<double> normal(0.0, sigma);
    Point p(d);
    for (int i = 0; i < d; ++i) p[i] = normal(rng);
    return p;
}

Point unit_direction(int d, Rng& rng) {
    for (;;) {
        Point p = gaussian_point(d, 1.0, rng);
        const double n = p.norm();
        if (n > 1e-300) return p / n;
    }
}

class UniformBox final : public Density {
public:
    UniformBox(int d, double side) : d_(d), side_(side), value_(std::pow(side, -d)) {}

    int dim() const override { return d_; }
    double pdf(const Point& x) const override {
        for (int i = 0; i < d_; ++i)
            if (x[i] < 0.0 || x[i] > side_) return 0.0;
        return value_;
    }
    Point sample(Rng& rng) const override {
        Point p(d_);
        for (int i = 0; i < d_; ++i) p[i] = side_ * rng.uniform();
        return p;
    }
    double f_max() const override { return value_; }
    double f_min() const override { return value_; }
    std::optional<double> support_volume() const override { return std::pow(side_, d_); }
    bool support_convex() const override { return true; }
    std::optional<double> support_diameter() const override { return side_ * std::sqrt(static_cast<double>(d_)); }
    std::optional<double> integral_of_power(int m) const override { return std::pow(value_, m - 1); }
    bool is_uniform() const override { return true; }
    std::string id() const override { return "uniform_box"; }
    nlohmann::json params() const override { return {{"d", d_}, {"side", side_}}; }

private:
    int d_;
    double side_;
    double value_;
};

class UniformBall final : public Density {
public:
    UniformBall(int d, double radius)
        : d_(d), radius_(radius), volume_(unit_ball_volume(d) * std::pow(radius, d)) {}

    int dim() const override { return d_; }
    double pdf(const Point& x) const override { return x.norm() <= radius_ ? 1.0 / volume_ : 0.0; }
    Point sample(Rng& rng) const override {
        const double r = radius_ * std::pow(rng.uniform(), 1.0 / d_);
        return r * unit_direction(d_, rng);
    }
    double f_max() const override { return 1.0 / volume_; }
    double f_min() const override { return 1.0 / volume_; }
    std::optional<double> support_volume() const override { return volume_; }
    bool support_convex() const override { return true; }
    std::optional<double> support_diameter() const override { return 2.0 * radius_; }
    std::optional<double> integral_of_power(int m) const override { return std::pow(volume_, 1 - m); }
    bool is_uniform() const override { return true; }
    std::string id() const override { return "uniform_ball"; }
    nlohmann::json params() const override { return {{"d", d_}, {"radius", radius_}}; }

private:
    int d_;
    double radius_;
    double volume_;
};

class UniformAnnulus final : public Density {
public:
    UniformAnnulus(int d, double r_in, double r_out)
        : d_(d),
          r_in_(r_in),
          r_out_(r_out),
          volume_(unit_ball_volume(d) * (std::pow(r_out, d) - std::pow(r_in, d))) {}

    int dim() const override { return d_; }
    double pdf(const Point& x) const override {
        const double r = x.norm();
        return (r >= r_in_ && r <= r_out_) ? 1.0 / volume_ : 0.0;
    }
    Point sample(Rng& rng) const override {
        const double lo = std::pow(r_in_, d_);
        const double hi = std::pow(r_out_, d_);
        const double r = std::pow(lo + rng.uniform() * (hi - lo), 1.0 / d_);
        return r * unit_direction(d_, rng);
    }
    double f_max() const override { return 1.0 / volume_; }
    double f_min() const override { return 1.0 / volume_; }
    std::optional<double> support_volume() const override { return volume_; }
    bool support_convex() const override { return r_in_ <= 0.0; }
    std::optional<double> support_diameter() const override { return 2.0 * r_out_; }
    std::optional<double> integral_of_power(int m) const override { return std::pow(volume_, 1 - m); }
    bool is_uniform() const override { return true; }
    std::string id() const override { return "uniform_annulus"; }
    nlohmann::json params() const override { return {{"d", d_}, {"r_in", r_in_}, {"r_out", r_out_}}; }

private:
    int d_;
    double r_in_;
    double r_out_;
    double volume_;
};

class IsotropicGaussian final : public Density {
public:
    IsotropicGaussian(int d, double sigma)
        : d_(d), sigma_(sigma), peak_(std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * d)) {}

    int dim() const override { return d_; }
    double pdf(const Point& x) const override {
        return peak_ * std::exp(-0.5 * x.squaredNorm() / (sigma_ * sigma_));
    }
    Point sample(Rng& rng) const override { return gaussian_point(d_, sigma_, rng); }
    double f_max() const override { return peak_; }
    double f_min() const override { return 0.0; }
    std::optional<double> support_volume() const override { return std::nullopt; }
    bool support_convex() const override { return true; }
    std::optional<double> support_diameter() const override { return std::nullopt; }
    std::optional<double> integral_of_power(int m) const override {
        // int (peak e^{-|x|^2/2s^2})^m dx = peak^m (2 pi s^2 / m)^{d/2}
        return std::pow(peak_, m) * std::pow(2.0 * std::numbers::pi * sigma_ * sigma_ / m, 0.5 * d_);
    }
    std::string id() const override { return "isotropic_gaussian"; }
    nlohmann::json params() const override { return {{"d", d_}, {"sigma", sigma_}}; }

private:
    int d_;
    double sigma_;
    double peak_;
};

double positive_param(const nlohmann::json& p, const char* key, double fallback) {
    double v = fallback;
    if (p.contains(key)) {
        if (!p[key].is_number()) throw ConfigError(std::string("density.") + key, "must be a number");
        v = p[key].get<double>();
    }
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("density.") + key, "must be positive and finite");
    return v;
}

}  // namespace

DensityPtr uniform_box(int d, double side) {
    check_dim(d);
    if (!(side > 0.0)) throw ConfigError("density.side", "must be positive");
    return std::make_shared<UniformBox>(d, side);
}

DensityPtr uniform_ball(int d, double radius) {
    check_dim(d);
    if (!(radius > 0.0)) throw ConfigError("density.radius", "must be positive");
    return std::make_shared<UniformBall>(d, radius);
}

DensityPtr uniform_annulus(int d, double r_in, double r_out) {
    check_dim(d);
    if (!(r_in >= 0.0) || !(r_out > r_in)) throw ConfigError("density.r_out", "requires 0 <= r_in < r_out");
    return std::make_shared<UniformAnnulus>(d, r_in, r_out);
}

DensityPtr isotropic_gaussian(int d, double sigma) {
    check_dim(d);
    if (!(sigma > 0.0)) throw ConfigError("density.sigma", "must be positive");
    return std::make_shared<IsotropicGaussian>(d, sigma);
}

std::vector<std::string> builtin_density_ids() {
    return {"uniform_box", "uniform_ball", "uniform_annulus", "isotropic_gaussian"};
}

DensityPtr make_density(const std::string& id, const nlohmann::json& p) {
    if (!p.is_object()) throw ConfigError("density", "parameters must be an object");
    if (!p.contains("d") || !p["d"].is_number_integer()) throw ConfigError("density.d", "integer dimension required");
    const int d = p["d"].get<int>();
    check_dim(d);
    if (id == "uniform_box") return uniform_box(d, positive_param(p, "side", 1.0));
    if (id == "uniform_ball") return uniform_ball(d, positive_param(p, "radius", 1.0));
    if (id == "uniform_annulus") {
        double r_in = 1.0;
        if (p.contains("r_in")) {
            if (!p["r_in"].is_number()) throw ConfigError("density.r_in", "must be a number");
            r_in = p["r_in"].get<double>();
        }
        return uniform_annulus(d, r_in, positive_param(p, "r_out", 2.0));
    }
    if (id == "isotropic_gaussian") return isotropic_gaussian(d, positive_param(p, "sigma", 1.0));
    throw ConfigError("density.id", "unknown density '" + id + "'");
}

DensityPtr make_density(const nlohmann::json& spec) {
    if (!spec.is_object() || !spec.contains("id") || !spec["id"].is_string())
        throw ConfigError("density.id", "string id required");
    return make_density(spec["id"].get<std::string>(), spec);
}

std::string to_string(ProcessKind kind) { return kind == ProcessKind::iid ? "iid" : "poisson"; }

ProcessKind process_kind_from_string(const std::string& s) {
    if (s == "iid") return ProcessKind::iid;
    if (s == "poisson") return ProcessKind::poisson;
    throw ConfigError("process", "expected 'iid' or 'poisson', got '" + s + "'");
}

// PointCloud -------------------------------------------------------------------

PointCloud::PointCloud(int dim, ProcessKind kind, std::uint64_t seed) : dim_(dim), kind_(kind), seed_(seed) {
    check_dim(dim);
}

PointCloud::PointCloud(int dim, std::vector<double> coords, ProcessKind kind, std::uint64_t seed)
    : dim_(dim), coords_(std::move(coords)), kind_(kind), seed_(seed) {
    check_dim(dim);
    if (coords_.size() % static_cast<std::size_t>(dim) != 0)
        throw FormatError("coordinate count is not a multiple of the dimension");
}

PointCloud PointCloud::from_points(const std::vector<Point>& pts) {
    if (pts.empty()) throw DegenerateInput("from_points needs at least one point to fix the dimension");
    PointCloud c(static_cast<int>(pts[0].size()));
    c.reserve(pts.size());
    for (const auto& p : pts) c.push_back(p);
    return c;
}

Point PointCloud::point(std::size_t i) const {
    Point p(dim_);
    const double* r = row(i);
    for (int c = 0; c < dim_; ++c) p[c] = r[c];
    return p;
}

void PointCloud::push_back(const Point& p) {
    if (p.size() != dim_) throw DegenerateInput("point dimension does not match cloud dimension");
    if (!p.allFinite()) throw DegenerateInput("point coordinates must be finite");
    for (int c = 0; c < dim_; ++c) coords_.push_back(p[c]);
}

std::pair<Point, Point> PointCloud::bounding_box() const {
    if (empty()) throw DegenerateInput("bounding box of an empty cloud");
    Point lo = point(0);
    Point hi = lo;
    for (std::size_t i = 1; i < size(); ++i) {
        const double* r = row(i);
        for (int c = 0; c < dim_; ++c) {
            lo[c] = std::min(lo[c], r[c]);
            hi[c] = std::max(hi[c], r[c]);
        }
    }
    return {lo, hi};
}

double PointCloud::bounding_diameter() const {
    if (empty()) return 0.0;
    const auto [lo, hi] = bounding_box();
    return (hi - lo).norm();
}

PointCloud sample_iid(const Density& f, std::size_t n, Rng& rng) {
    PointCloud cloud(f.dim(), ProcessKind::iid, rng.key());
    cloud.reserve(n);
    for (std::size_t i = 0; i < n; ++i) cloud.push_back(f.sample(rng));
    return cloud;
}

PointCloud sample_poisson(const Density& f, double n, Rng& rng) {
    if (!(n > 0.0)) throw ConfigError("n", "Poisson intensity scale must be positive");
    std::poisson_distribution<std::uint64_t> count(n);
    const std::uint64_t m = count(rng);
    PointCloud cloud = sample_iid(f, static_cast<std::size_t>(m), rng);
    cloud.set_provenance(ProcessKind::poisson, cloud.seed());
    return cloud;
}

}  // namespace dmorse
