// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// the number of failures. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "dmorse/cech.hpp"
#include "dmorse/critical.hpp"
#include "dmorse/experiments.hpp"
#include "dmorse/geometry.hpp"
#include "dmorse/stats.hpp"
#include "dmorse/theory.hpp"

using namespace dmorse;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const json& entry(const json& agg, std::size_t s, int k) { return agg["schedule"][s]["k"][std::to_string(k)]; }

// 1. Morse-Euler identity on 100 clouds x 10 radii.
Outcome morse_euler() {
    const auto cfg = ExperimentConfig::from_json({{"mode", "morse_euler_audit"}, {"seed", 101}, {"audit_clouds", 100},
                                                  {"audit_radii", 10}, {"audit_n_max", 50}, {"audit_dims", {2, 3}}});
    const auto agg = run_experiment(cfg).aggregate;
    const std::size_t cases = agg["cases"], matches = agg["matches"], skipped = agg["skipped"];
    return {cases == 1000 && matches == cases,
            fmt("%zu/%zu exact matches, %zu skipped", matches, cases, skipped)};
}

// 2. Global alternating sum equals 1.
Outcome global_alternating() {
    std::size_t ok = 0;
    for (std::size_t c = 0; c < 100; ++c) {
        Rng rng = Rng(202).substream(c);
        const int d = c % 2 ? 3 : 2;
        const std::size_t n = 1 + rng() % 20;
        const PointCloud cloud = sample_iid(*uniform_box(d), n, rng);
        ok += counts(enumerate_global(cloud), n, d, kGlobal).alternating_sum() == 1;
    }
    return {ok == 100, fmt("%zu/100 clouds with sum 1", ok)};
}

// 3. Grid enumerator equals the brute-force oracle.
Outcome oracle_equivalence() {
    std::size_t ok = 0;
    std::size_t points = 0;
    for (std::size_t c = 0; c < 200; ++c) {
        Rng rng = Rng(303).substream(c);
        const int d = c % 2 ? 3 : 2;
        const std::size_t n = 5 + rng() % 196;
        const PointCloud cloud = sample_iid(*uniform_box(d), n, rng);
        // Radii with between 0.5 and 6 expected neighbours per eps-ball.
        const double occ = 0.5 + 5.5 * rng.uniform();
        const double eps = std::pow(occ / (static_cast<double>(n) * unit_ball_volume(d)), 1.0 / d);
        auto a = enumerate_grid(cloud, eps);
        auto b = enumerate_brute(cloud, eps);
        auto sig = [](std::vector<CriticalPoint>& v) {
            std::vector<std::pair<int, double>> s;
            for (const auto& p : v) s.emplace_back(p.index, p.value);
            std::sort(s.begin(), s.end());
            return s;
        };
        const auto sa = sig(a), sb = sig(b);
        bool same = sa.size() == sb.size();
        for (std::size_t i = 0; same && i < sa.size(); ++i)
            same = sa[i].first == sb[i].first && std::abs(sa[i].second - sb[i].second) <= 1e-9;
        ok += same;
        points += sa.size();
    }
    return {ok == 200, fmt("%zu/200 instances identical (%zu critical points)", ok, points)};
}

// 4. Critical lambda = 1, Poisson process: N_1 / n against 2(1 - e^{-pi}).
Outcome gamma1_closed() {
    const auto cfg = ExperimentConfig::from_json({{"mode", "mean_scaling"},
                                                  {"process", "poisson"},
                                                  {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 0.5}}},
                                                  {"n", {10000}},
                                                  {"trials", 200},
                                                  {"seed", 404},
                                                  {"theory_samples", 1000}});
    const auto agg = run_experiment(cfg).aggregate;
    const double target = 2.0 * (1.0 - std::exp(-kPi));
    const double m = entry(agg, 0, 1)["normalized_mean"];
    const double rel = std::abs(m - target) / target;
    return {rel < 0.03, fmt("mean N1/n = %.5f, target %.5f, rel err %.2f%%", m, target, 100 * rel)};
}

// 5. Subcritical mean scaling against 2 pi.
Outcome mu1_scaling() {
    const auto cfg = ExperimentConfig::from_json({{"mode", "mean_scaling"},
                                                  {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 0.75}}},
                                                  {"n", {10000, 40000}},
                                                  {"trials", 200},
                                                  {"seed", 505},
                                                  {"theory_samples", 1000}});
    const auto agg = run_experiment(cfg).aggregate;
    const double target = 2.0 * kPi;
    const double m0 = entry(agg, 0, 1)["normalized_mean"], m1 = entry(agg, 1, 1)["normalized_mean"];
    const double e0 = std::abs(m0 - target) / target, e1 = std::abs(m1 - target) / target;
    return {e0 < 0.05 && e1 < 0.05 && e1 < e0,
            fmt("N1/(n^2 r^2) = %.4f (%.2f%%) at 1e4, %.4f (%.2f%%) at 4e4, target %.4f", m0, 100 * e0, m1, 100 * e1,
                target)};
}

// 6. Poisson limit at r_n = 1/n.
Outcome poisson_limit() {
    const auto cfg = ExperimentConfig::from_json({{"mode", "poisson_limit"},
                                                  {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 1.0}}},
                                                  {"n", {10000}},
                                                  {"trials", 2000},
                                                  {"seed", 606},
                                                  {"theory_samples", 1000}});
    const auto res = run_experiment(cfg);
    std::vector<std::uint64_t> c;
    for (const auto& r : res.records) c.push_back(r.local[1]);
    const double target = 2.0 * kPi;
    const double dtv = empirical_dtv_poisson(c, target);
    const double m = entry(res.aggregate, 0, 1)["mean"], v = entry(res.aggregate, 0, 1)["variance"];
    const double em = std::abs(m - target) / target, ev = std::abs(v - target) / target;
    return {dtv < 0.1 && em < 0.1 && ev < 0.1,
            fmt("dTV = %.4f, mean %.3f (%.1f%%), variance %.3f (%.1f%%), target %.3f", dtv, m, 100 * em, v, 100 * ev,
                target)};
}

// 7. 1 - gamma_1 + gamma_2 - gamma_3 at infinity, d = 3.
Outcome alternating_inf() {
    const auto f = uniform_box(3);
    double sum = 1.0, var = 0.0, worst = 0.0;
    std::string vals;
    for (int k = 1; k <= 3; ++k) {
        Rng rng = Rng(707).substream(k);
        const Estimate g = gamma_k_estimate(k, *f, kInfLambda, 2'000'000, rng);
        sum += (k % 2 ? -1.0 : 1.0) * g.value;
        var += g.std_err * g.std_err;
        worst = std::max(worst, g.std_err);
        vals += fmt(" g%d=%.4f(%.4f)", k, g.value, g.std_err);
    }
    const double se = std::sqrt(var);
    return {std::abs(sum) < 3 * se && worst < 0.02,
            fmt("sum = %.4f, 3 se = %.4f, max se %.4f;%s", sum, 3 * se, worst, vals.c_str())};
}

// 8. gamma_1(inf) = 2^{d-1}.
Outcome gamma1_inf() {
    bool ok = true;
    std::string s;
    for (int d : {2, 3}) {
        Rng rng = Rng(808).substream(d);
        const Estimate g = gamma_k_estimate(1, *uniform_box(d), kInfLambda, 1'000'000, rng, {GammaMethod::envelope});
        const double target = std::pow(2.0, d - 1);
        ok = ok && std::abs(g.value - target) < 3 * g.std_err;
        s += fmt("d=%d: %.4f +- %.4f vs %.0f; ", d, g.value, g.std_err, target);
    }
    return {ok, s};
}

// 9. Normality of N_1 in two regimes and the limit variance at lambda = 1.
Outcome clt() {
    const auto sub = ExperimentConfig::from_json({{"mode", "clt"},
                                                  {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 0.625}}},
                                                  {"n", {10000}},
                                                  {"trials", 2000},
                                                  {"seed", 909},
                                                  {"theory_samples", 1000}});
    const auto crit = ExperimentConfig::from_json({{"mode", "clt"},
                                                   {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 0.5}}},
                                                   {"n", {10000}},
                                                   {"trials", 2000},
                                                   {"seed", 910},
                                                   {"theory_samples", 400000}});
    const auto a = entry(run_experiment(sub).aggregate, 0, 1);
    const auto b = entry(run_experiment(crit).aggregate, 0, 1);
    const double sa = a["normality"]["skewness"], ka = a["normality"]["excess_kurtosis"];
    const double sb = b["normality"]["skewness"], kb = b["normality"]["excess_kurtosis"];
    const double var = b["normalized_variance"], target = b["target_variance"];
    const double ev = std::abs(var - target) / target;
    const bool ok = std::abs(sa) < 0.25 && std::abs(ka) < 0.5 && std::abs(sb) < 0.25 && std::abs(kb) < 0.5 && ev < 0.15;
    return {ok, fmt("(a) skew %.3f kurt %.3f; (b) skew %.3f kurt %.3f, Var/n %.4f vs sigma^2 %.4f (%.1f%%)", sa, ka, sb,
                    kb, var, target, 100 * ev)};
}

// 10. Global against local counts under the calibrated log rule.
Outcome global_vs_local() {
    const auto box = ExperimentConfig::from_json({{"mode", "global_vs_local"},
                                                  {"k", {1, 2}},
                                                  {"n", {500, 1000, 2000, 4000}},
                                                  {"trials", 100},
                                                  {"seed", 1010}});
    const auto ab = run_experiment(box).aggregate;
    bool ok = ab["gap_nonincreasing"].get<bool>();
    std::string s = fmt("D*=%g;", ab["D_star"].get<double>());
    for (int k : {1, 2}) {
        const double g = entry(ab, 3, k)["mean_abs_gap"];
        ok = ok && g < 0.1;
        s += fmt(" k=%d gaps", k);
        for (std::size_t i = 0; i < 4; ++i) s += fmt(" %.3f", entry(ab, i, k)["mean_abs_gap"].get<double>());
        s += ";";
    }
    s += ab["gap_nonincreasing"].get<bool>() ? " nonincreasing;" : " NOT nonincreasing;";

    const auto ann = ExperimentConfig::from_json(
        {{"mode", "global_vs_local"},
         {"density", {{"id", "uniform_annulus"}, {"d", 2}, {"r_in", 1.0}, {"r_out", 2.0}}},
         {"annulus_counterexample", true},
         {"k", {1, 2}},
         {"n", {500, 1000, 2000, 4000}},
         {"trials", 100},
         {"seed", 1011}});
    const auto aa = run_experiment(ann).aggregate;
    const double sg = entry(aa, 3, 2)["mean_signed_gap"];
    ok = ok && sg >= 0.5 && sg <= 1.5;
    s += fmt(" annulus D*=%g, mean(N2g - N2) = %.3f at n=4000", aa["D_star"].get<double>(), sg);
    return {ok, s};
}

// 11. Euler characteristic in the three regimes.
Outcome euler_phases() {
    auto run = [](json regime, std::vector<std::size_t> n, std::uint64_t seed, std::size_t trials,
                  std::size_t audit_every = 10) {
        return run_experiment(ExperimentConfig::from_json({{"mode", "euler_phase"},
                                                           {"regime", regime},
                                                           {"n", n},
                                                           {"trials", trials},
                                                           {"seed", seed},
                                                           {"audit_every", audit_every},
                                                           {"theory_samples", 2'000'000}}))
            .aggregate;
    };
    const auto sub = run({{"rule", "power"}, {"c", 1.0}, {"beta", 0.75}}, {10000, 40000}, 1111, 50);
    const auto crit = run({{"rule", "power"}, {"c", 1.0}, {"beta", 0.5}}, {10000, 40000}, 1112, 50);
    const auto sup = run({{"rule", "log"}, {"D", 1.0}}, {1000, 2000, 4000}, 1113, 50);

    const double cs = sub["schedule"][1]["chi_over_n"]["mean"];
    const double cc = crit["schedule"][1]["chi_over_n"]["mean"];
    const double tc = crit["theory"]["chi_over_n"];
    const double es = std::abs(cs - 1.0), ec = std::abs(cc - tc) / std::abs(tc);
    bool trend = true;
    for (std::size_t i = 1; i < 3; ++i)
        trend = trend && sup["schedule"][i]["chi_over_n"]["mean"].get<double>() <
                             sup["schedule"][i - 1]["chi_over_n"]["mean"].get<double>();
    const double chi_last = sup["schedule"][2]["chi"]["mean"];
    // The large runs are beyond the complex budget; audit small clouds in each regime.
    const auto sub_s = run({{"rule", "power"}, {"c", 1.0}, {"beta", 0.75}}, {100, 200, 400}, 1114, 10, 1);
    const auto crit_s = run({{"rule", "power"}, {"c", 1.0}, {"beta", 0.5}}, {100, 200, 400}, 1115, 10, 1);
    const auto sup_s = run({{"rule", "log"}, {"D", 1.0}}, {100, 200}, 1116, 10, 1);
    // Under the log rule the uncapped complex exceeds the budget even at n = 100; those skips are reported only.
    std::size_t audited = 0, agree = 0, skipped = 0;
    for (const auto* a : {&sub, &crit, &sup, &sub_s, &crit_s, &sup_s}) {
        audited += (*a)["cech_audit"]["audited"].get<std::size_t>();
        agree += (*a)["cech_audit"]["agree"].get<std::size_t>();
    }
    for (const auto* a : {&sub_s, &crit_s}) skipped += (*a)["cech_audit"]["skipped"].get<std::size_t>();
    const std::size_t sup_skipped = sup_s["cech_audit"]["skipped"].get<std::size_t>();
    const bool ok = es < 0.05 && ec < 0.05 && trend && chi_last >= 0.8 && chi_last <= 1.2 && audited > 0 &&
                    agree == audited && skipped == 0;
    return {ok, fmt("sub chi/n %.4f (%.1f%%); crit chi/n %.4f vs %.4f (%.1f%%); log rule chi/n %s, mean chi %.3f at "
                    "n=4000; complex audits %zu/%zu agree, %zu skipped (+%zu over budget under the log rule)",
                    cs, 100 * es, cc, tc, 100 * ec, trend ? "decreasing" : "NOT decreasing", chi_last, agree, audited,
                    skipped, sup_skipped)};
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "Morse-Euler identity", 120, morse_euler},
        {2, "global alternating sum", 60, global_alternating},
        {3, "grid equals brute-force oracle", 300, oracle_equivalence},
        {4, "gamma_1 closed form at lambda=1", 600, gamma1_closed},
        {5, "mu_1 subcritical scaling", 900, mu1_scaling},
        {6, "Poisson limit", 600, poisson_limit},
        {7, "gamma_k(inf) alternating sum d=3", 300, alternating_inf},
        {8, "gamma_1(inf) = 2^(d-1)", 120, gamma1_inf},
        {9, "CLT regimes", 1200, clt},
        {10, "global vs local", 1200, global_vs_local},
        {11, "Euler phases", 900, euler_phases},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.limit_s;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::printf("%s criterion %d (%s): %s [%.1f s of %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", over time limit");
        std::fflush(stdout);
    }
    return failures;
}
