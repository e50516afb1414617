#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dmorse/errors.hpp"
#include "dmorse/rng.hpp"
#include "dmorse/stats.hpp"

using namespace dmorse;

namespace {

std::vector<std::uint64_t> poisson_draws(double mean, std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    std::poisson_distribution<std::uint64_t> pois(mean);
    std::vector<std::uint64_t> v(m);
    for (auto& x : v) x = pois(rng);
    return v;
}

std::vector<double> normal_draws(std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(m);
    for (auto& x : v) x = nd(rng);
    return v;
}

}  // namespace

TEST_CASE("running stats") {
    RunningStats a, b, all;
    for (int i = 0; i < 50; ++i) {
        const double x = std::sin(i) * 3 + i * 0.1;
        (i < 20 ? a : b).add(x);
        all.add(x);
    }
    a.merge(b);
    CHECK(a.count() == 50);
    CHECK(a.mean() == doctest::Approx(all.mean()));
    CHECK(a.variance() == doctest::Approx(all.variance()));
    RunningStats one;
    one.add(2.0);
    CHECK(one.variance() == 0.0);
}

TEST_CASE("sample moments") {
    const std::vector<double> xs = {1, 2, 3, 4, 10};
    const Moments m = sample_moments(xs);
    CHECK(m.mean == doctest::Approx(4.0));
    CHECK(m.variance == doctest::Approx(12.5));
    CHECK(m.skewness > 1.0);
    const std::vector<double> sym = {-2, -1, 0, 1, 2};
    CHECK(sample_moments(sym).skewness == doctest::Approx(0.0));
}

TEST_CASE("poisson total variation") {
    SUBCASE("self test") {
        const auto v = poisson_draws(3.0, 10000, 1);
        CHECK(empirical_dtv_poisson(v, 3.0) < 0.03);
        const auto w = poisson_draws(3.0, 200000, 2);
        CHECK(empirical_dtv_poisson(w, 3.0) < 0.01);
    }
    SUBCASE("point mass") {
        const std::vector<std::uint64_t> zeros(100, 0);
        CHECK(empirical_dtv_poisson(zeros, 5.0) == doctest::Approx(1.0 - std::exp(-5.0)));
    }
    SUBCASE("bounded") {
        const std::vector<std::uint64_t> far(10, 1000);
        const double d = empirical_dtv_poisson(far, 1.0);
        CHECK(d <= 1.0);
        CHECK(d > 0.999);
    }
    CHECK(poisson_pmf(0, 2.0) == doctest::Approx(std::exp(-2.0)));
    CHECK(poisson_pmf(3, 2.0) == doctest::Approx(8.0 / 6.0 * std::exp(-2.0)));
}

TEST_CASE("normality diagnostics") {
    const auto z = normal_draws(10000, 3);
    const auto nd = normality_diagnostics(z);
    CHECK(std::abs(nd.skewness) < 0.08);
    CHECK(std::abs(nd.excess_kurtosis) < 0.15);
    CHECK(nd.ks_stat < 0.02);

    const std::vector<double> constant(500, 1.0);
    CHECK_THROWS_AS(normality_diagnostics(constant), DegenerateInput);
    const std::vector<double> few(100, 0.0);
    CHECK_THROWS_AS(normality_diagnostics(few), DegenerateInput);

    const auto p = poisson_draws(1.0, 10000, 4);
    const std::vector<double> pd(p.begin(), p.end());
    CHECK(normality_diagnostics(pd).skewness == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("kolmogorov tests") {
    CHECK(kolmogorov_q(1.3581) == doctest::Approx(0.05).epsilon(0.01));
    CHECK(kolmogorov_q(0.0) == doctest::Approx(1.0));
    const auto a = normal_draws(2000, 5);
    const auto b = normal_draws(2000, 6);
    CHECK(ks_two_sample(a, b).p_value > 0.001);
    CHECK(ks_two_sample(a, a).statistic == 0.0);
    auto c = normal_draws(2000, 7);
    for (auto& x : c) x += 0.3;
    CHECK(ks_two_sample(a, c).p_value < 1e-6);
}

TEST_CASE("chi-square against poisson") {
    const auto v = poisson_draws(6.0, 5000, 8);
    CHECK(chi_square_poisson(v, 6.0) > 0.001);
    CHECK(chi_square_poisson(v, 7.0) < 1e-6);
}
