#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "dmorse/errors.hpp"
#include "dmorse/point_process.hpp"
#include "dmorse/stats.hpp"

using namespace dmorse;

TEST_CASE("rng streams") {
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) CHECK(a() == b());
    Rng s1 = Rng(5).substream(1), s2 = Rng(5).substream(2);
    CHECK(s1() != s2());
    CHECK(Rng(5).substream(3).key() == Rng(5).substream(3).key());
    RunningStats u;
    Rng r(1);
    for (int i = 0; i < 100000; ++i) u.add(r.uniform());
    CHECK(std::abs(u.mean() - 0.5) < 4 * std::sqrt(1.0 / 12 / 100000));
    CHECK(u.variance() == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("densities sample inside their support") {
    Rng rng(2);
    SUBCASE("box") {
        auto f = uniform_box(3, 2.0);
        CHECK(f->pdf(f->sample(rng)) == doctest::Approx(1.0 / 8));
        CHECK(f->lower_bounded());
        CHECK(f->support_convex());
        CHECK(*f->integral_of_power(2) == doctest::Approx(1.0 / 8));
        for (int i = 0; i < 1000; ++i) {
            const Point p = f->sample(rng);
            CHECK(p.minCoeff() >= 0.0);
            CHECK(p.maxCoeff() <= 2.0);
        }
    }
    SUBCASE("ball") {
        auto f = uniform_ball(2, 2.0);
        CHECK(*f->integral_of_power(2) == doctest::Approx(1.0 / (4 * std::numbers::pi)));
        int inner = 0;
        for (int i = 0; i < 20000; ++i) {
            const Point p = f->sample(rng);
            CHECK(p.norm() <= 2.0);
            inner += p.norm() < 1.0;
        }
        CHECK(inner / 20000.0 == doctest::Approx(0.25).epsilon(0.05));
    }
    SUBCASE("annulus") {
        auto f = uniform_annulus(2, 1.0, 2.0);
        CHECK_FALSE(f->support_convex());
        CHECK(f->pdf(Point::Zero(2)) == 0.0);
        int inner = 0;
        const int m = 20000;
        for (int i = 0; i < m; ++i) {
            const double r = f->sample(rng).norm();
            CHECK(r >= 1.0);
            CHECK(r <= 2.0);
            inner += r < 1.5;
        }
        // P(|X| < 1.5) = (1.5^2 - 1) / (2^2 - 1)
        const double p = 1.25 / 3.0;
        CHECK(std::abs(inner / double(m) - p) < 4 * std::sqrt(p * (1 - p) / m));
    }
    SUBCASE("gaussian") {
        auto f = isotropic_gaussian(2, 0.5);
        CHECK_FALSE(f->lower_bounded());
        RunningStats x;
        for (int i = 0; i < 20000; ++i) x.add(f->sample(rng)[1]);
        CHECK(x.variance() == doctest::Approx(0.25).epsilon(0.04));
        // int f^2 = 1 / (4 pi sigma^2) in d = 2.
        CHECK(*f->integral_of_power(2) == doctest::Approx(1.0 / (4 * std::numbers::pi * 0.25)));
    }
}

TEST_CASE("density catalog") {
    auto f = make_density({{"id", "uniform_annulus"}, {"d", 2}, {"r_in", 1.0}, {"r_out", 2.0}});
    CHECK(f->id() == "uniform_annulus");
    auto g = make_density(f->describe());
    CHECK(g->describe() == f->describe());
    CHECK_THROWS_AS(make_density({{"id", "nope"}, {"d", 2}}), ConfigError);
    CHECK_THROWS_AS(make_density({{"id", "uniform_box"}}), ConfigError);
    CHECK_THROWS_AS(make_density({{"id", "uniform_box"}, {"d", 2}, {"side", -1}}), ConfigError);
    try {
        make_density({{"id", "uniform_ball"}, {"d", 2}, {"radius", "x"}});
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "density.radius");
    }
    CHECK(builtin_density_ids().size() >= 4);
}

TEST_CASE("iid and poisson sampling") {
    auto f = uniform_box(2);
    Rng a(7), b(7);
    const PointCloud c1 = sample_iid(*f, 500, a);
    const PointCloud c2 = sample_iid(*f, 500, b);
    CHECK(c1.size() == 500);
    CHECK(c1 == c2);

    RunningStats sizes;
    for (int t = 0; t < 2000; ++t) {
        Rng r = Rng(3).substream(t);
        sizes.add(static_cast<double>(sample_poisson(*f, 200.0, r).size()));
    }
    CHECK(std::abs(sizes.mean() - 200.0) < 4 * std::sqrt(200.0 / 2000));
    CHECK(sizes.variance() == doctest::Approx(200.0).epsilon(0.1));
    Rng r(1);
    CHECK_THROWS_AS(sample_poisson(*f, 0.0, r), ConfigError);
}

TEST_CASE("cloud serialization round trips") {
    Rng rng(4);
    const PointCloud c = sample_iid(*uniform_box(3), 50, rng);
    std::stringstream csv;
    write_cloud_csv(csv, c);
    CHECK(read_cloud_csv(csv) == c);
    std::stringstream bin;
    write_cloud_binary(bin, c);
    CHECK(read_cloud_binary(bin) == c);

    const auto dir = std::filesystem::temp_directory_path();
    const auto p1 = (dir / "dm_cloud_test.csv").string();
    const auto p2 = (dir / "dm_cloud_test.bin").string();
    save_cloud(p1, c);
    save_cloud(p2, c);
    CHECK(load_cloud(p1) == c);
    CHECK(load_cloud(p2) == c);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);

    std::stringstream bad("dim,2\n0.1,0.2\n0.3\n");
    CHECK_THROWS_AS(read_cloud_csv(bad), FormatError);
    std::stringstream junk("XXXX");
    CHECK_THROWS_AS(read_cloud_binary(junk), FormatError);
}

TEST_CASE("cloud container") {
    PointCloud c(2);
    Point p(2);
    p << 0.0, 1.0;
    c.push_back(p);
    p << 3.0, -1.0;
    c.push_back(p);
    const auto [lo, hi] = c.bounding_box();
    CHECK(lo[0] == 0.0);
    CHECK(hi[1] == 1.0);
    CHECK(c.bounding_diameter() == doctest::Approx(std::sqrt(13.0)));
    Point bad(3);
    bad.setZero();
    CHECK_THROWS_AS(c.push_back(bad), DegenerateInput);
    CHECK_THROWS_AS(PointCloud(2).bounding_box(), DegenerateInput);
}
