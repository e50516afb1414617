#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmorse/point_process.hpp"
#include "dmorse/rng.hpp"

namespace dmorse {

enum class Regime { subcritical, critical, supercritical };

std::string to_string(Regime r);

/// Radius schedule r_n and its regime.
///   power: r_n = c n^{-beta}
///   log:   r_n = (D log n / n)^{1/d}
///   fixed: r_n = c
struct RegimeSpec {
    enum class Rule { power, log, fixed };

    Rule rule = Rule::power;
    int d = 2;
    double c = 1.0;
    double beta = 0.5;
    double D = 1.0;

    static RegimeSpec power_law(int d, double c, double beta);
    static RegimeSpec log_rule(int d, double D);
    static RegimeSpec fixed(int d, double r);

    double radius(double n) const;
    Regime classification() const;
    /// c^d for a critical power law; throws WrongRegime otherwise.
    double lambda() const;

    nlohmann::json to_json() const;
    /// Reads {"rule": "power"|"log"|"fixed", "c", "beta", "D"}; `path` prefixes field errors.
    static RegimeSpec from_json(const nlohmann::json& j, int d, const std::string& path = "regime");
};

struct CriticalIndex {
    int k_c = 0;
    double alpha = 0.0;  // 1 / (d beta - 1)
    bool clamped_high = false;
    bool clamped_low = false;
};

/// floor(1 / (d beta - 1)) clamped to [0, d]. Throws WrongRegime unless subcritical.
CriticalIndex critical_index(const RegimeSpec& spec);

/// Monte Carlo (or exact) value with its standard error.
struct Estimate {
    double value = 0.0;
    double std_err = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    /// Analytic bound on the truncation error, when the integral was truncated.
    double truncation = 0.0;

    nlohmann::json to_json() const;
};

inline constexpr double kInfLambda = std::numeric_limits<double>::infinity();

/// Integral of f^m: closed form when the density provides one, otherwise the
/// mean of f^{m-1}(X) over draws X ~ f.
Estimate integral_of_power(const Density& f, int m, std::uint64_t samples, Rng& rng);

/// A_k = integral of h_1(0, y) over y in (R^d)^k, by uniform sampling of B_2(0)^k.
/// Depends only on (k, d).
Estimate h1_volume(int k, int d, std::uint64_t samples, Rng& rng);

/// 2^{d-1} omega_d int f^2 (standard error nonzero only without a closed form).
Estimate mu_1_closed(const Density& f, std::uint64_t samples, Rng& rng);

/// mu_k = int f^{k+1} A_k / (k+1)!.
Estimate mu_k_estimate(int k, const Density& f, std::uint64_t samples, Rng& rng);

/// 2^{d-1} (1 - exp(-lambda omega_d / vol_D)).
double gamma_1_closed_uniform(int d, double lambda, double vol_d);

enum class GammaMethod {
    /// gamma_k(lambda) = A_k / ((k+1) omega_d^k) * E_f[P(k, lambda omega_d f(X))],
    /// P the regularized lower incomplete gamma. Covers lambda = inf too.
    radial,
    /// Finite lambda: x ~ f and y uniform on B_2(0)^k, averaging the integrand.
    direct,
    /// Infinite lambda: y uniform on B_M(0)^k, integrand h e^{-omega R^d}.
    envelope,
};

struct GammaOptions {
    GammaMethod method = GammaMethod::radial;
    /// Envelope radius M; 0 picks envelope_radius(k, d).
    double envelope_m = 0.0;
};

/// Smallest M in {4, 4.5, 5, ...} whose truncation bound is below 1e-6.
double envelope_radius(int k, int d);

Estimate gamma_k_estimate(int k, const Density& f, double lambda, std::uint64_t samples, Rng& rng,
                          const GammaOptions& opt = {});

/// Envelope truncation bound: k 2^{dk} Gamma(k, omega_d M^d / 2^d) / (k+1)!.
double gamma_inf_truncation_bound(int k, int d, double m);

struct VarianceConstants {
    int k = 1;
    double lambda = 1.0;
    Estimate gamma;                 // gamma_k(lambda)
    std::vector<Estimate> gamma_j;  // gamma_k^{(j)}, j = 0..k
    Estimate eta;
    Estimate alpha;       // (k+1) gamma - eta
    Estimate sigma2_hat;  // Poisson limit variance
    Estimate sigma2;      // binomial limit variance
    bool negative_variance = false;

    nlohmann::json to_json() const;
};

/// Limit variance constants for N_k / n in the critical (finite lambda) or
/// supercritical (lambda = inf) regime. `samples` is used per component.
VarianceConstants variance_constants_estimate(int k, const Density& f, double lambda, std::uint64_t samples,
                                              Rng& rng);

}  // namespace dmorse
