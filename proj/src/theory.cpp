#include "dmorse/theory.hpp"

#include <array>
#include <cmath>
#include <random>

#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "dmorse/errors.hpp"
#include "dmorse/stats.hpp"

namespace dmorse {

std::string to_string(Regime r) {
    switch (r) {
        case Regime::subcritical: return "subcritical";
        case Regime::critical: return "critical";
        case Regime::supercritical: return "supercritical";
    }
    return "unknown";
}

RegimeSpec RegimeSpec::power_law(int d, double c, double beta) {
    if (!(c > 0.0)) throw ConfigError("regime.c", "must be positive");
    if (!(beta > 0.0)) throw ConfigError("regime.beta", "must be positive");
    RegimeSpec s;
    s.rule = Rule::power;
    s.d = d;
    s.c = c;
    s.beta = beta;
    return s;
}

RegimeSpec RegimeSpec::log_rule(int d, double D) {
    if (!(D > 0.0)) throw ConfigError("regime.D", "must be positive");
    RegimeSpec s;
    s.rule = Rule::log;
    s.d = d;
    s.D = D;
    return s;
}

RegimeSpec RegimeSpec::fixed(int d, double r) {
    if (!(r > 0.0)) throw ConfigError("regime.c", "radius must be positive");
    RegimeSpec s;
    s.rule = Rule::fixed;
    s.d = d;
    s.c = r;
    return s;
}

double RegimeSpec::radius(double n) const {
    switch (rule) {
        case Rule::power: return c * std::pow(n, -beta);
        case Rule::log: return std::pow(D * std::log(n) / n, 1.0 / d);
        case Rule::fixed: return c;
    }
    return c;
}

Regime RegimeSpec::classification() const {
    if (rule != Rule::power) return Regime::supercritical;
    const double crit = 1.0 / d;
    if (std::abs(beta - crit) <= 1e-12) return Regime::critical;
    return beta > crit ? Regime::subcritical : Regime::supercritical;
}

double RegimeSpec::lambda() const {
    if (classification() != Regime::critical) throw WrongRegime("lambda is defined only for a critical power law");
    return std::pow(c, d);
}

nlohmann::json RegimeSpec::to_json() const {
    nlohmann::json j;
    switch (rule) {
        case Rule::power:
            j = {{"rule", "power"}, {"c", c}, {"beta", beta}};
            break;
        case Rule::log:
            j = {{"rule", "log"}, {"D", D}};
            break;
        case Rule::fixed:
            j = {{"rule", "fixed"}, {"c", c}};
            break;
    }
    j["d"] = d;
    j["classification"] = to_string(classification());
    if (classification() == Regime::critical) j["lambda"] = lambda();
    return j;
}

namespace {

double number_field(const nlohmann::json& j, const char* key, const std::string& path, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(path + "." + key, "must be a number");
    return j[key].get<double>();
}

}  // namespace

RegimeSpec RegimeSpec::from_json(const nlohmann::json& j, int d, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "must be an object");
    const std::string rule = j.value("rule", std::string("power"));
    try {
        if (rule == "power") return power_law(d, number_field(j, "c", path, 1.0), number_field(j, "beta", path, 0.5));
        if (rule == "log") return log_rule(d, number_field(j, "D", path, 1.0));
        if (rule == "fixed") return fixed(d, number_field(j, "c", path, 0.1));
    } catch (const ConfigError& e) {
        if (e.field().rfind("regime.", 0) == 0 && path != "regime")
            throw ConfigError(path + e.field().substr(6), e.what());
        throw;
    }
    throw ConfigError(path + ".rule", "expected 'power', 'log' or 'fixed'");
}

CriticalIndex critical_index(const RegimeSpec& spec) {
    if (spec.classification() != Regime::subcritical)
        throw WrongRegime("critical index is defined only in the subcritical regime");
    CriticalIndex ci;
    ci.alpha = 1.0 / (spec.d * spec.beta - 1.0);
    const double fl = std::floor(ci.alpha + 1e-12);
    if (fl > spec.d) {
        ci.k_c = spec.d;
        ci.clamped_high = true;
    } else if (fl < 1.0) {
        ci.k_c = 0;
        ci.clamped_low = true;
    } else {
        ci.k_c = static_cast<int>(fl);
    }
    return ci;
}

nlohmann::json Estimate::to_json() const {
    nlohmann::json j = {{"value", value}, {"std_err", std_err}, {"samples", samples}, {"seed", seed}};
    if (truncation > 0.0) j["truncation"] = truncation;
    return j;
}

namespace {

constexpr int kMaxTuple = kMaxDim + 1;

void uniform_in_ball(int d, double r, Rng& rng, double* out) {
    std::normal_distribution<double> normal;
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (int a = 0; a < d; ++a) {
            out[a] = normal(rng);
            n2 += out[a] * out[a];
        }
    } while (n2 < 1e-300);
    const double scale = r * std::pow(rng.uniform_open(), 1.0 / d) / std::sqrt(n2);
    for (int a = 0; a < d; ++a) out[a] *= scale;
}

Estimate from_stats(const RunningStats& s, std::uint64_t seed, double scale = 1.0) {
    Estimate e;
    e.value = s.mean() * scale;
    e.std_err = s.std_err() * std::abs(scale);
    e.samples = s.count();
    e.seed = seed;
    return e;
}

// Circumsphere of count rows; `interior` reports the open-hull condition.
struct Sphere {
    bool ok = false;
    bool interior = false;
    double r = 0.0;
    Ball ball;
};

Sphere sphere_of(const double* const* rows, int count, int d) {
    Sphere s;
    SimplexFit fit;
    if (!fit_circumsphere(rows, count, d, fit)) return s;
    s.ok = true;
    s.r = std::sqrt(fit.radius_sq);
    s.interior = true;
    for (int i = 0; i < count; ++i)
        if (!(fit.barycentric[i] > kHullTol)) s.interior = false;
    s.ball.center = fit.center;
    s.ball.radius = s.r;
    return s;
}

bool h1(const Sphere& s) { return s.ok && s.interior && s.r <= 1.0; }

bool strictly_inside(const Ball& b, const double* p, int d) {
    double d2 = 0.0;
    for (int a = 0; a < d; ++a) d2 += (p[a] - b.center[a]) * (p[a] - b.center[a]);
    return d2 < b.radius * b.radius;
}

double factorial(int m) { return boost::math::factorial<double>(static_cast<unsigned>(m)); }

// E_f[P(a, lambda omega f(X))]; exact for uniform densities.
Estimate mean_gamma_p(const Density& f, int a, double lambda, std::uint64_t samples, Rng& rng) {
    Estimate e;
    if (std::isinf(lambda)) {
        e.value = 1.0;
        return e;
    }
    const double w = unit_ball_volume(f.dim());
    if (f.is_uniform()) {
        e.value = boost::math::gamma_p(static_cast<double>(a), lambda * w * f.f_max());
        return e;
    }
    RunningStats s;
    for (std::uint64_t i = 0; i < samples; ++i)
        s.add(boost::math::gamma_p(static_cast<double>(a), lambda * w * f.pdf(f.sample(rng))));
    return from_stats(s, rng.key());
}

double rel(const Estimate& e) { return e.value != 0.0 ? e.std_err / std::abs(e.value) : 0.0; }

}  // namespace

Estimate integral_of_power(const Density& f, int m, std::uint64_t samples, Rng& rng) {
    if (auto closed = f.integral_of_power(m)) {
        Estimate e;
        e.value = *closed;
        return e;
    }
    RunningStats s;
    for (std::uint64_t i = 0; i < samples; ++i) s.add(std::pow(f.pdf(f.sample(rng)), m - 1));
    return from_stats(s, rng.key());
}

Estimate h1_volume(int k, int d, std::uint64_t samples, Rng& rng) {
    if (k < 1 || k > d) throw ConfigError("k", "index must satisfy 1 <= k <= d");
    const std::uint64_t seed = rng.key();
    const double ball = unit_ball_volume(d) * std::pow(2.0, d);
    const double vol = std::pow(ball, k);
    std::array<std::array<double, kMaxDim>, kMaxTuple> pts{};
    std::array<const double*, kMaxTuple> rows{};
    for (int i = 0; i <= k; ++i) rows[i] = pts[i].data();
    RunningStats s;
    for (std::uint64_t t = 0; t < samples; ++t) {
        for (int i = 1; i <= k; ++i) uniform_in_ball(d, 2.0, rng, pts[i].data());
        s.add(h1(sphere_of(rows.data(), k + 1, d)) ? 1.0 : 0.0);
    }
    return from_stats(s, seed, vol);
}

Estimate mu_1_closed(const Density& f, std::uint64_t samples, Rng& rng) {
    const int d = f.dim();
    const Estimate i2 = integral_of_power(f, 2, samples, rng);
    const double scale = std::pow(2.0, d - 1) * unit_ball_volume(d);
    Estimate e = i2;
    e.value *= scale;
    e.std_err *= scale;
    return e;
}

Estimate mu_k_estimate(int k, const Density& f, std::uint64_t samples, Rng& rng) {
    const int d = f.dim();
    Rng a_stream = rng.substream(1);
    Rng f_stream = rng.substream(2);
    const Estimate a = h1_volume(k, d, samples, a_stream);
    const Estimate ip = integral_of_power(f, k + 1, samples, f_stream);
    Estimate e;
    e.value = ip.value * a.value / factorial(k + 1);
    e.std_err = std::abs(e.value) * std::hypot(rel(a), rel(ip));
    e.samples = samples;
    e.seed = rng.key();
    return e;
}

double gamma_1_closed_uniform(int d, double lambda, double vol_d) {
    if (!(vol_d > 0.0)) throw ConfigError("vol_D", "must be positive");
    if (std::isinf(lambda)) return std::pow(2.0, d - 1);
    if (!(lambda > 0.0)) throw ConfigError("lambda", "must be positive");
    return std::pow(2.0, d - 1) * -std::expm1(-lambda * unit_ball_volume(d) / vol_d);
}

double gamma_inf_truncation_bound(int k, int d, double m) {
    const double x = unit_ball_volume(d) * std::pow(m / 2.0, d);
    return k * std::pow(2.0, d * k) * boost::math::tgamma(static_cast<double>(k), x) / factorial(k + 1);
}

double envelope_radius(int k, int d) {
    double m = 4.0;
    while (gamma_inf_truncation_bound(k, d, m) >= 1e-6) m += 0.5;
    return m;
}

Estimate gamma_k_estimate(int k, const Density& f, double lambda, std::uint64_t samples, Rng& rng,
                          const GammaOptions& opt) {
    const int d = f.dim();
    if (k < 1 || k > d) throw ConfigError("k", "index must satisfy 1 <= k <= d");
    if (!(lambda > 0.0)) throw ConfigError("lambda", "must be positive");
    const double w = unit_ball_volume(d);
    const double fact = factorial(k + 1);
    const std::uint64_t seed = rng.key();

    if (opt.method == GammaMethod::radial) {
        Rng a_stream = rng.substream(1);
        Rng x_stream = rng.substream(2);
        const Estimate a = h1_volume(k, d, samples, a_stream);
        const Estimate p = mean_gamma_p(f, k, lambda, samples, x_stream);
        Estimate e;
        e.value = a.value / ((k + 1) * std::pow(w, k)) * p.value;
        e.std_err = std::abs(e.value) * std::hypot(rel(a), rel(p));
        e.samples = samples;
        e.seed = seed;
        return e;
    }

    std::array<std::array<double, kMaxDim>, kMaxTuple> pts{};
    std::array<const double*, kMaxTuple> rows{};
    for (int i = 0; i <= k; ++i) rows[i] = pts[i].data();
    RunningStats s;

    if (opt.method == GammaMethod::direct) {
        if (std::isinf(lambda)) throw ConfigError("method", "the direct estimator needs a finite lambda");
        const double vol = std::pow(std::pow(2.0, d) * w, k);
        for (std::uint64_t t = 0; t < samples; ++t) {
            const double fx = f.pdf(f.sample(rng));
            for (int i = 1; i <= k; ++i) uniform_in_ball(d, 2.0, rng, pts[i].data());
            const Sphere sp = sphere_of(rows.data(), k + 1, d);
            if (!h1(sp)) {
                s.add(0.0);
                continue;
            }
            s.add(std::pow(lambda * fx, k) * std::exp(-lambda * w * std::pow(sp.r, d) * fx));
        }
        return from_stats(s, seed, vol / fact);
    }

    if (!std::isinf(lambda)) throw ConfigError("method", "the envelope estimator is for lambda = inf");
    const double m = opt.envelope_m == 0.0 ? envelope_radius(k, d) : opt.envelope_m;
    if (!(m > 0.0)) throw ConfigError("envelope_m", "must be positive");
    const double vol = std::pow(std::pow(m, d) * w, k);
    for (std::uint64_t t = 0; t < samples; ++t) {
        for (int i = 1; i <= k; ++i) uniform_in_ball(d, m, rng, pts[i].data());
        const Sphere sp = sphere_of(rows.data(), k + 1, d);
        s.add(sp.ok && sp.interior ? std::exp(-w * std::pow(sp.r, d)) : 0.0);
    }
    Estimate e = from_stats(s, seed, vol / fact);
    e.truncation = gamma_inf_truncation_bound(k, d, m);
    return e;
}

namespace {

// gamma_k^{(j)} for 1 <= j <= k: the two subsets share the origin and j-1
// further points; every point lies in B_2(0).
Estimate shared_term(int k, int j, const Density& f, double lambda, std::uint64_t samples, Rng& rng) {
    const int d = f.dim();
    const int priv = k + 1 - j;
    const int m = 2 * k + 1 - j;
    const double w = unit_ball_volume(d);
    const double vol = std::pow(std::pow(2.0, d) * w, m);
    const double pre = 1.0 / (factorial(j) * factorial(priv) * factorial(priv));
    const bool inf = std::isinf(lambda);
    const std::uint64_t seed = rng.key();

    std::vector<std::array<double, kMaxDim>> pts(static_cast<std::size_t>(m) + 1);
    for (auto& p : pts) p.fill(0.0);
    std::array<const double*, kMaxTuple> r1{}, r2{};
    r1[0] = r2[0] = pts[0].data();
    for (int i = 0; i < j - 1; ++i) r1[1 + i] = r2[1 + i] = pts[1 + i].data();
    for (int i = 0; i < priv; ++i) {
        r1[j + i] = pts[j + i].data();
        r2[j + i] = pts[j + priv + i].data();
    }
    RunningStats s;
    for (std::uint64_t t = 0; t < samples; ++t) {
        const double fx = inf ? 1.0 : f.pdf(f.sample(rng));
        for (int i = 1; i <= m; ++i) uniform_in_ball(d, 2.0, rng, pts[i].data());
        const Sphere s1 = sphere_of(r1.data(), k + 1, d);
        const Sphere s2 = sphere_of(r2.data(), k + 1, d);
        if (!h1(s1) || !h1(s2)) {
            s.add(0.0);
            continue;
        }
        bool clear = true;
        for (int i = 0; i < priv && clear; ++i)
            clear = !strictly_inside(s1.ball, r2[j + i], d) && !strictly_inside(s2.ball, r1[j + i], d);
        if (!clear) {
            s.add(0.0);
            continue;
        }
        const double u = two_ball_union_volume(s1.ball, s2.ball, d);
        if (inf) {
            const double rho = std::max(s1.r, s2.r);
            s.add(factorial(m) * std::pow(std::pow(rho, d) / u, m));
        } else {
            s.add(std::pow(lambda * fx, m) * std::exp(-lambda * fx * u));
        }
    }
    return from_stats(s, seed, vol * pre);
}

// gamma_k^{(0)}: disjoint subsets with overlapping circumballs. The offset z of
// the second subset is drawn uniformly from the set where the balls overlap.
Estimate overlap_term(int k, const Density& f, double lambda, std::uint64_t samples, Rng& rng) {
    const int d = f.dim();
    const int m = 2 * k + 1;
    const double w = unit_ball_volume(d);
    const double vol = std::pow(std::pow(2.0, d) * w, 2 * k);
    const double pre = 1.0 / (factorial(k + 1) * factorial(k + 1));
    const bool inf = std::isinf(lambda);
    const std::uint64_t seed = rng.key();

    std::vector<std::array<double, kMaxDim>> pts(2 * static_cast<std::size_t>(k) + 2);
    for (auto& p : pts) p.fill(0.0);
    std::array<const double*, kMaxTuple> r1{}, r2{};
    for (int i = 0; i <= k; ++i) {
        r1[i] = pts[i].data();
        r2[i] = pts[k + 1 + i].data();  // pts[k+1] stays at the origin
    }
    std::array<double, kMaxDim> z{};
    std::array<double, kMaxDim> shifted{};
    RunningStats s;
    for (std::uint64_t t = 0; t < samples; ++t) {
        const double fx = inf ? 1.0 : f.pdf(f.sample(rng));
        for (int i = 1; i <= k; ++i) {
            uniform_in_ball(d, 2.0, rng, pts[i].data());
            uniform_in_ball(d, 2.0, rng, pts[k + 1 + i].data());
        }
        const Sphere s1 = sphere_of(r1.data(), k + 1, d);
        Sphere s2 = sphere_of(r2.data(), k + 1, d);
        if (!h1(s1) || !h1(s2)) {
            s.add(0.0);
            continue;
        }
        const double reach = s1.r + s2.r;
        uniform_in_ball(d, reach, rng, z.data());
        for (int a = 0; a < d; ++a) z[a] += s1.ball.center[a] - s2.ball.center[a];
        for (int a = 0; a < d; ++a) s2.ball.center[a] += z[a];
        bool clear = true;
        for (int i = 0; i <= k && clear; ++i) {
            for (int a = 0; a < d; ++a) shifted[a] = r2[i][a] + z[a];
            clear = !strictly_inside(s1.ball, shifted.data(), d) && !strictly_inside(s2.ball, r1[i], d);
        }
        const double u = two_ball_union_volume(s1.ball, s2.ball, d);
        const double sep = w * (std::pow(s1.r, d) + std::pow(s2.r, d));
        const double zvol = w * std::pow(reach, d);
        double val = 0.0;
        if (inf) {
            const double rho_d = std::pow(std::max(s1.r, s2.r), d);
            val = factorial(m) * ((clear ? std::pow(rho_d / u, m) : 0.0) - std::pow(rho_d / sep, m));
        } else {
            const double lf = lambda * fx;
            val = std::pow(lf, m) * ((clear ? std::exp(-lf * u) : 0.0) - std::exp(-lf * sep));
        }
        s.add(val * zvol);
    }
    return from_stats(s, seed, vol * pre);
}

}  // namespace

VarianceConstants variance_constants_estimate(int k, const Density& f, double lambda, std::uint64_t samples,
                                              Rng& rng) {
    const int d = f.dim();
    if (k < 1 || k > d) throw ConfigError("k", "index must satisfy 1 <= k <= d");
    if (!(lambda > 0.0)) throw ConfigError("lambda", "must be positive");
    VarianceConstants vc;
    vc.k = k;
    vc.lambda = lambda;
    const double w = unit_ball_volume(d);

    // gamma_k, eta_k and alpha_k are all proportional to A_k.
    Rng a_stream = rng.substream(100);
    Rng p_stream = rng.substream(101);
    const Estimate a = h1_volume(k, d, samples, a_stream);
    const Estimate pk = mean_gamma_p(f, k, lambda, samples, p_stream);
    const Estimate pk1 = mean_gamma_p(f, k + 1, lambda, samples, p_stream);
    const double g_inf = a.value / ((k + 1) * std::pow(w, k));
    const double ra = rel(a);

    auto derived = [&](double value, double extra_rel) {
        Estimate e;
        e.value = value;
        e.std_err = std::abs(value) * std::hypot(ra, extra_rel);
        e.samples = samples;
        e.seed = a.seed;
        return e;
    };
    vc.gamma = derived(g_inf * pk.value, rel(pk));
    vc.eta = derived(k * g_inf * pk1.value, rel(pk1));
    vc.alpha = derived((k + 1) * vc.gamma.value - vc.eta.value, std::hypot(rel(pk), rel(pk1)));

    vc.gamma_j.resize(static_cast<std::size_t>(k) + 1);
    Rng o_stream = rng.substream(0);
    vc.gamma_j[0] = overlap_term(k, f, lambda, samples, o_stream);
    for (int j = 1; j <= k; ++j) {
        Rng js = rng.substream(static_cast<std::uint64_t>(j));
        vc.gamma_j[j] = shared_term(k, j, f, lambda, samples, js);
    }

    double var_hat = vc.gamma.std_err * vc.gamma.std_err;
    vc.sigma2_hat.value = vc.gamma.value;
    for (const auto& g : vc.gamma_j) {
        vc.sigma2_hat.value += g.value;
        var_hat += g.std_err * g.std_err;
    }
    vc.sigma2_hat.std_err = std::sqrt(var_hat);
    vc.sigma2_hat.samples = samples;
    vc.sigma2_hat.seed = rng.key();

    vc.sigma2.value = vc.sigma2_hat.value - vc.alpha.value * vc.alpha.value;
    vc.sigma2.std_err = std::hypot(vc.sigma2_hat.std_err, 2.0 * vc.alpha.value * vc.alpha.std_err);
    vc.sigma2.samples = samples;
    vc.sigma2.seed = rng.key();
    vc.negative_variance = vc.sigma2.value < 0.0;
    return vc;
}

nlohmann::json VarianceConstants::to_json() const {
    nlohmann::json j;
    j["k"] = k;
    if (std::isinf(lambda))
        j["lambda"] = "inf";
    else
        j["lambda"] = lambda;
    j["gamma"] = gamma.to_json();
    j["gamma_j"] = nlohmann::json::array();
    for (const auto& g : gamma_j) j["gamma_j"].push_back(g.to_json());
    j["eta"] = eta.to_json();
    j["alpha"] = alpha.to_json();
    j["sigma2_hat"] = sigma2_hat.to_json();
    j["sigma2"] = sigma2.to_json();
    j["negative_variance"] = negative_variance;
    return j;
}

}  // namespace dmorse
