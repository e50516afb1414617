#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmorse/errors.hpp"
#include "dmorse/experiments.hpp"

using namespace dmorse;
using nlohmann::json;

namespace {

std::string field_of(const json& j) {
    try {
        ExperimentConfig::from_json(j);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<no error>";
}

std::string raw_text(const ExperimentResult& r, bool global = false) {
    std::ostringstream os;
    write_raw_csv(os, r.records, global);
    return os.str();
}

}  // namespace

TEST_CASE("config validation names the field") {
    CHECK(field_of({{"mode", "mean_scaling"}}) == "n");
    CHECK(field_of({{"mode", "warp"}, {"n", {10}}}) == "mode");
    CHECK(field_of({{"mode", "mean_scaling"}, {"n", {10}}, {"colour", 1}}) == "colour");
    CHECK(field_of({{"mode", "mean_scaling"}, {"n", {10, -3}}}) == "n[1]");
    CHECK(field_of({{"mode", "mean_scaling"}, {"n", {10}}, {"k", {1, 3}}}) == "k[1]");
    CHECK(field_of({{"mode", "mean_scaling"}, {"n", {10}}, {"density", {{"id", "uniform_box"}, {"d", 2}, {"side", 0}}}}) ==
          "density.side");
    CHECK(field_of({{"mode", "mean_scaling"}, {"n", {10}}, {"regime", {{"rule", "power"}, {"beta", -1}}}}) ==
          "regime.beta");
    CHECK(field_of({{"mode", "mean_scaling"}, {"n", {10}}, {"process", "cox"}}) == "process");
    CHECK(field_of({{"mode", "clt"}, {"n", {10}}, {"trials", 50}}) == "trials");
    CHECK(field_of({{"mode", "mean_scaling"}, {"n", {10}}, {"annulus_counterexample", true}}) ==
          "annulus_counterexample");
    CHECK(field_of({{"mode", "global_vs_local"}, {"n", {10}}, {"regime", {{"rule", "power"}}}}) == "regime.rule");
    // Supercritical runs need a lower bounded density with convex support.
    CHECK(field_of({{"mode", "mean_scaling"},
                    {"n", {10}},
                    {"density", {{"id", "isotropic_gaussian"}, {"d", 2}}},
                    {"regime", {{"rule", "log"}, {"D", 1}}}}) == "density");
    CHECK(field_of({{"mode", "euler_phase"},
                    {"n", {10}},
                    {"density", {{"id", "uniform_annulus"}, {"d", 2}, {"r_in", 1}, {"r_out", 2}}},
                    {"regime", {{"rule", "power"}, {"beta", 0.2}}}}) == "density");
    CHECK(field_of({{"mode", "global_vs_local"},
                    {"n", {10}},
                    {"density", {{"id", "uniform_annulus"}, {"d", 2}, {"r_in", 1}, {"r_out", 2}}},
                    {"annulus_counterexample", true}}) == "<no error>");
    CHECK(field_of({{"mode", "gamma_curve"}, {"lambdas", {1, "inf", 0}}}) == "lambdas[2]");
}

TEST_CASE("tiny mean_scaling run") {
    const json j = {{"mode", "mean_scaling"}, {"n", {40, 80}}, {"trials", 4}, {"seed", 3}, {"k", {1, 2}},
                    {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 0.5}}}, {"theory_samples", 2000}};
    const ExperimentConfig cfg = ExperimentConfig::from_json(j);
    const ExperimentResult r = run_experiment(cfg);
    REQUIRE(r.records.size() == 8);
    for (const auto& rec : r.records) {
        CHECK(rec.local.size() == 3);
        CHECK(rec.local[0] == rec.n);
    }
    const auto& agg = r.aggregate;
    CHECK(agg["mode"] == "mean_scaling");
    CHECK(agg["version"] == kVersion);
    CHECK(agg["seed"] == 3);
    CHECK(agg["schedule"].size() == 2);
    CHECK(agg["schedule"][0]["k"]["1"].contains("normalized_mean"));
    CHECK(agg["theory"]["k"]["1"]["mean"].get<double>() == doctest::Approx(1.9135722).epsilon(1e-6));

    SUBCASE("reruns are byte identical and independent of threads") {
        ExperimentConfig c2 = cfg;
        c2.threads = 3;
        const ExperimentResult r2 = run_experiment(c2);
        CHECK(raw_text(r) == raw_text(r2));
        CHECK(r.aggregate["schedule"] == r2.aggregate["schedule"]);
    }
    SUBCASE("aggregates recompute from raw CSV") {
        std::istringstream is(raw_text(r));
        std::vector<TrialRecord> back;
        read_raw_csv(is, back, cfg.n);
        const json again = aggregate_records(cfg, back, r.aggregate["theory"], json::object());
        CHECK(again.dump() == r.aggregate.dump());
    }
    SUBCASE("seed changes the draws") {
        ExperimentConfig c3 = cfg;
        c3.seed = 4;
        CHECK(raw_text(run_experiment(c3)) != raw_text(r));
    }
}

TEST_CASE("poisson process records the realised size") {
    const json j = {{"mode", "variance_scaling"}, {"n", {60}}, {"trials", 6}, {"process", "poisson"},
                    {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 0.9}}}, {"theory_samples", 2000}};
    const ExperimentResult r = run_experiment(ExperimentConfig::from_json(j));
    bool varied = false;
    for (const auto& rec : r.records) varied |= rec.local[0] != 60;
    CHECK(varied);
    CHECK(r.aggregate["theory"]["regime"] == "subcritical");
    CHECK(r.aggregate["theory"]["critical_index"]["k_c"] == 1);
}

TEST_CASE("poisson_limit and clt emit their diagnostics") {
    const json p = {{"mode", "poisson_limit"}, {"n", {200}}, {"trials", 30},
                    {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 1.0}}}, {"theory_samples", 1000}};
    const auto rp = run_experiment(ExperimentConfig::from_json(p));
    const auto& e = rp.aggregate["schedule"][0]["k"]["1"];
    CHECK(e.contains("dtv_target"));
    CHECK(e["dtv_target"].get<double>() >= 0.0);
    CHECK(e["dtv_target"].get<double>() <= 1.0);

    const json c = {{"mode", "clt"}, {"n", {100}}, {"trials", 200},
                    {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 0.5}}}, {"theory_samples", 2000}};
    const auto rc = run_experiment(ExperimentConfig::from_json(c));
    const auto& n = rc.aggregate["schedule"][0]["k"]["1"];
    CHECK(n["normality"].contains("skewness"));
    CHECK(n.contains("target_variance"));
}

TEST_CASE("euler_phase cross-audits against the complex") {
    const json j = {{"mode", "euler_phase"}, {"n", {30, 60}}, {"trials", 6}, {"audit_every", 2},
                    {"regime", {{"rule", "power"}, {"c", 1.0}, {"beta", 0.5}}}, {"theory_samples", 2000}};
    const auto r = run_experiment(ExperimentConfig::from_json(j));
    const auto& a = r.aggregate["cech_audit"];
    CHECK(a["audited"] == 6);
    CHECK(a["agree"] == a["audited"]);
    CHECK(r.aggregate["schedule"][0].contains("chi_over_n"));
    CHECK(r.aggregate["theory"].contains("chi_over_n"));
}

TEST_CASE("global_vs_local pairs the enumerators") {
    const json j = {{"mode", "global_vs_local"}, {"n", {100, 200}}, {"trials", 3}, {"D_star", 1.0}};
    const auto r = run_experiment(ExperimentConfig::from_json(j));
    CHECK(r.aggregate["D_star"] == 1.0);
    for (const auto& rec : r.records) {
        CHECK(rec.global.size() == 3);
        // Global counts satisfy the alternating-sum identity of R^d.
        CHECK(static_cast<long>(rec.global[0]) - static_cast<long>(rec.global[1]) + static_cast<long>(rec.global[2]) == 1);
        for (int k = 0; k <= 2; ++k) CHECK(rec.global[k] >= rec.local[k]);
    }
    std::istringstream is(raw_text(r, true));
    std::vector<TrialRecord> back;
    std::istringstream il(raw_text(r));
    read_raw_csv(il, back, {100, 200});
    read_raw_csv(is, back, {100, 200}, true);
    CHECK(aggregate_records(ExperimentConfig::from_json(j), back, r.aggregate["theory"],
                            {{"D_star", 1.0}, {"D_star_source", "config"}})
              .dump() == r.aggregate.dump());

    const json c = {{"mode", "global_vs_local"}, {"n", {100}}, {"trials", 2}, {"calibration_trials", 2}};
    const auto rc = run_experiment(ExperimentConfig::from_json(c));
    CHECK(rc.aggregate["D_star_source"] == "calibrated");
    CHECK(rc.aggregate["calibration"]["gaps"].size() >= 1);
}

TEST_CASE("audit and gamma_curve modes") {
    const json a = {{"mode", "morse_euler_audit"}, {"audit_clouds", 8}, {"audit_radii", 4}, {"audit_n_max", 20}};
    const auto ra = run_experiment(ExperimentConfig::from_json(a));
    CHECK(ra.aggregate["cases"] == 32);
    CHECK(ra.aggregate["matches"] == 32);

    const json g = {{"mode", "gamma_curve"}, {"k", {1, 2}}, {"lambdas", {1, 4, "inf"}}, {"theory_samples", 2000}};
    const auto rg = run_experiment(ExperimentConfig::from_json(g));
    CHECK(rg.aggregate["theory"]["gamma"].size() == 6);
    CHECK(rg.aggregate["theory"]["gamma"][0]["closed_form"].get<double>() == doctest::Approx(1.9135722).epsilon(1e-6));

    const auto dir = std::filesystem::temp_directory_path() / "dm_experiment_test";
    std::filesystem::remove_all(dir);
    write_outputs(rg, dir);
    CHECK(std::filesystem::exists(dir / "aggregate.json"));
    CHECK(std::filesystem::exists(dir / "gamma_curve.csv"));
    CHECK_FALSE(std::filesystem::exists(dir / "raw.csv"));
    std::filesystem::remove_all(dir);
}
