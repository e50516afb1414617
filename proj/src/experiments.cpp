#include "dmorse/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "dmorse/cech.hpp"
#include "dmorse/critical.hpp"
#include "dmorse/errors.hpp"
#include "dmorse/stats.hpp"

namespace dmorse {

namespace {

constexpr std::uint64_t kTheoryStream = 1ULL << 20;
constexpr std::uint64_t kCalibrationStream = 1ULL << 21;
constexpr std::uint64_t kAuditStream = 1ULL << 22;

const std::vector<std::pair<Mode, const char*>> kModes = {
    {Mode::mean_scaling, "mean_scaling"},   {Mode::variance_scaling, "variance_scaling"},
    {Mode::poisson_limit, "poisson_limit"}, {Mode::clt, "clt"},
    {Mode::global_vs_local, "global_vs_local"}, {Mode::euler_phase, "euler_phase"},
    {Mode::gamma_curve, "gamma_curve"},     {Mode::morse_euler_audit, "morse_euler_audit"},
};

bool trial_mode(Mode m) { return m != Mode::gamma_curve && m != Mode::morse_euler_audit; }

std::string ktag(int k) { return std::to_string(k); }

}  // namespace

std::string to_string(Mode m) {
    for (const auto& [mode, name] : kModes)
        if (mode == m) return name;
    return "unknown";
}

Mode mode_from_string(const std::string& s) {
    for (const auto& [mode, name] : kModes)
        if (s == name) return mode;
    throw ConfigError("mode", "unknown mode '" + s + "'");
}

// Config parsing ---------------------------------------------------------------

namespace {

std::uint64_t uint_field(const nlohmann::json& j, const std::string& key, std::uint64_t fallback, std::uint64_t lo = 0) {
    if (!j.contains(key)) return fallback;
    const auto& v = j[key];
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(key, "must be a non-negative integer");
    const auto x = v.get<std::uint64_t>();
    if (x < lo) throw ConfigError(key, "must be at least " + std::to_string(lo));
    return x;
}

double positive_field(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number() || !(v.get<double>() > 0.0)) throw ConfigError(path, "must be a positive number");
    return v.get<double>();
}

template <class F>
void for_list(const nlohmann::json& j, const std::string& key, F&& f) {
    const auto& v = j[key];
    if (!v.is_array()) {
        f(v, key);
        return;
    }
    if (v.empty()) throw ConfigError(key, "must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) f(v[i], key + "[" + std::to_string(i) + "]");
}

const std::set<std::string> kKnownFields = {
    "mode",          "density",           "regime",
    "process",       "k",                 "n",
    "trials",        "seed",              "threads",
    "theory_samples", "D_star",           "D_star_candidates",
    "calibration_trials", "calibration_gap", "annulus_counterexample",
    "audit_every",   "audit_max_n",       "lambdas",
    "audit_clouds",  "audit_radii",       "audit_n_max",
    "audit_dims",
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kKnownFields.count(key)) throw ConfigError(key, "unknown field");

    ExperimentConfig c;
    if (!j.contains("mode") || !j["mode"].is_string()) throw ConfigError("mode", "string required");
    c.mode = mode_from_string(j["mode"].get<std::string>());

    if (j.contains("density")) c.density_spec = j["density"];
    c.density = make_density(c.density_spec);
    const int d = c.dim();

    if (j.contains("process")) {
        if (!j["process"].is_string()) throw ConfigError("process", "must be a string");
        c.process = process_kind_from_string(j["process"].get<std::string>());
    }

    nlohmann::json regime = j.value("regime", nlohmann::json::object());
    if (c.mode == Mode::global_vs_local) {
        if (regime.contains("rule") && regime["rule"] != "log")
            throw ConfigError("regime.rule", "global_vs_local uses the log rule");
        regime["rule"] = "log";
    }
    c.regime = RegimeSpec::from_json(regime, d, "regime");

    if (j.contains("k")) {
        for_list(j, "k", [&](const nlohmann::json& v, const std::string& path) {
            if (!v.is_number_integer() || v.get<int>() < 1 || v.get<int>() > d)
                throw ConfigError(path, "index must be an integer in [1, " + std::to_string(d) + "]");
            c.k.push_back(v.get<int>());
        });
    } else {
        c.k = {1};
    }
    std::sort(c.k.begin(), c.k.end());
    c.k.erase(std::unique(c.k.begin(), c.k.end()), c.k.end());
    if (c.mode == Mode::euler_phase || c.mode == Mode::global_vs_local) {
        if (!j.contains("k")) {
            c.k.clear();
            for (int k = 1; k <= d; ++k) c.k.push_back(k);
        }
    }

    if (trial_mode(c.mode)) {
        if (!j.contains("n")) throw ConfigError("n", "schedule required");
        for_list(j, "n", [&](const nlohmann::json& v, const std::string& path) {
            if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(path, "must be a positive integer");
            c.n.push_back(v.get<std::size_t>());
        });
        if (c.mode == Mode::poisson_limit || c.mode == Mode::clt) c.trials = 2000;
        c.trials = uint_field(j, "trials", c.trials, 1);
        if (c.mode == Mode::clt && c.trials < 200) throw ConfigError("trials", "clt needs at least 200 trials");
    }
    c.seed = uint_field(j, "seed", c.seed);
    c.threads = static_cast<unsigned>(uint_field(j, "threads", 0));
    c.theory_samples = uint_field(j, "theory_samples", c.theory_samples, 1);

    if (j.contains("D_star")) c.d_star = positive_field(j["D_star"], "D_star");
    if (j.contains("D_star_candidates")) {
        c.d_star_candidates.clear();
        for_list(j, "D_star_candidates", [&](const nlohmann::json& v, const std::string& path) {
            c.d_star_candidates.push_back(positive_field(v, path));
        });
    }
    c.calibration_trials = uint_field(j, "calibration_trials", c.calibration_trials, 1);
    if (j.contains("calibration_gap")) c.calibration_gap = positive_field(j["calibration_gap"], "calibration_gap");
    if (j.contains("annulus_counterexample")) {
        if (!j["annulus_counterexample"].is_boolean()) throw ConfigError("annulus_counterexample", "must be a boolean");
        c.annulus_counterexample = j["annulus_counterexample"].get<bool>();
        if (c.annulus_counterexample && c.mode != Mode::global_vs_local)
            throw ConfigError("annulus_counterexample", "only valid in global_vs_local mode");
    }

    c.audit_every = uint_field(j, "audit_every", c.audit_every);
    c.audit_max_n = uint_field(j, "audit_max_n", c.audit_max_n);
    if (j.contains("lambdas")) {
        c.lambdas.clear();
        for_list(j, "lambdas", [&](const nlohmann::json& v, const std::string& path) {
            if (v.is_string() && v.get<std::string>() == "inf")
                c.lambdas.push_back(kInfLambda);
            else
                c.lambdas.push_back(positive_field(v, path));
        });
    }
    c.audit_clouds = uint_field(j, "audit_clouds", c.audit_clouds, 1);
    c.audit_radii = uint_field(j, "audit_radii", c.audit_radii, 1);
    c.audit_n_max = uint_field(j, "audit_n_max", c.audit_n_max, 3);
    if (j.contains("audit_dims")) {
        c.audit_dims.clear();
        for_list(j, "audit_dims", [&](const nlohmann::json& v, const std::string& path) {
            if (!v.is_number_integer() || v.get<int>() < 1 || v.get<int>() > kMaxDim)
                throw ConfigError(path, "dimension out of range");
            c.audit_dims.push_back(v.get<int>());
        });
    }

    const bool super = c.regime.classification() == Regime::supercritical;
    if (super && trial_mode(c.mode) && !c.annulus_counterexample &&
        !(c.density->lower_bounded() && c.density->support_convex()))
        throw ConfigError("density", "supercritical runs need a lower bounded density with convex support");
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["mode"] = to_string(mode);
    j["density"] = density->describe();
    j["regime"] = regime.to_json();
    j["process"] = to_string(process);
    j["k"] = k;
    j["seed"] = seed;
    if (trial_mode(mode)) {
        j["n"] = n;
        j["trials"] = trials;
    }
    j["theory_samples"] = theory_samples;
    if (mode == Mode::global_vs_local) {
        if (d_star) j["D_star"] = *d_star;
        j["D_star_candidates"] = d_star_candidates;
        j["calibration_trials"] = calibration_trials;
        j["calibration_gap"] = calibration_gap;
        j["annulus_counterexample"] = annulus_counterexample;
    }
    if (mode == Mode::euler_phase) {
        j["audit_every"] = audit_every;
        j["audit_max_n"] = audit_max_n;
    }
    if (mode == Mode::gamma_curve) {
        j["lambdas"] = nlohmann::json::array();
        for (double l : lambdas) {
            if (std::isinf(l))
                j["lambdas"].push_back("inf");
            else
                j["lambdas"].push_back(l);
        }
    }
    if (mode == Mode::morse_euler_audit) {
        j["audit_clouds"] = audit_clouds;
        j["audit_radii"] = audit_radii;
        j["audit_n_max"] = audit_n_max;
        j["audit_dims"] = audit_dims;
    }
    return j;
}

// Trials -------------------------------------------------------------------------

namespace {

PointCloud draw(const ExperimentConfig& cfg, std::size_t n, Rng& rng) {
    return cfg.process == ProcessKind::iid ? sample_iid(*cfg.density, n, rng)
                                           : sample_poisson(*cfg.density, static_cast<double>(n), rng);
}

struct TrialOutput {
    TrialRecord record;
    std::optional<std::pair<std::int64_t, std::int64_t>> audit;  // (chi from critical, chi from complex)
    bool audit_skipped = false;
};

TrialOutput run_trial(const ExperimentConfig& cfg, const RegimeSpec& regime, std::size_t s, std::size_t t) {
    const int d = cfg.dim();
    const std::size_t n = cfg.n[s];
    Rng rng = Rng(cfg.seed).substream(s).substream(t);
    const PointCloud cloud = draw(cfg, n, rng);
    const double r = regime.radius(static_cast<double>(n));
    EnumOptions opt;
    opt.k_max = d;

    TrialOutput out;
    out.record.n_index = s;
    out.record.n = n;
    out.record.trial = t;
    if (cfg.mode == Mode::global_vs_local) {
        // Paired and independent: the grid enumerator at r_n against the global one.
        out.record.local = counts(enumerate_grid(cloud, r, opt), cloud.size(), d, r).by_index;
        out.record.global = counts(enumerate_global(cloud, opt), cloud.size(), d, kGlobal).by_index;
        return out;
    }
    const CriticalCounts c = counts(enumerate_critical(cloud, r, opt), cloud.size(), d, r);
    out.record.local = c.by_index;
    if (cfg.mode == Mode::euler_phase && cfg.audit_every > 0 && t % cfg.audit_every == 0 &&
        cloud.size() <= cfg.audit_max_n && !cloud.empty()) {
        CechOptions co;
        co.dim_cap = static_cast<int>(cloud.size()) - 1;
        co.budget = 2'000'000;
        try {
            out.audit = std::make_pair(euler_from_critical(c), euler_characteristic(build_cech(cloud, r, co)));
        } catch (const ComplexTooLarge&) {
            out.audit_skipped = true;
        }
    }
    return out;
}

template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& f) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
                next = count;
                return;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
}

std::vector<TrialOutput> run_schedule(const ExperimentConfig& cfg, const RegimeSpec& regime) {
    std::vector<TrialOutput> outs(cfg.n.size() * cfg.trials);
    parallel_for(outs.size(), cfg.threads, [&](std::size_t i) {
        outs[i] = run_trial(cfg, regime, i / cfg.trials, i % cfg.trials);
    });
    return outs;
}

double gap(const std::vector<TrialRecord>& records, int k_lo, int k_hi) {
    RunningStats s;
    for (const auto& r : records) {
        double g = 0.0;
        for (int k = k_lo; k <= k_hi; ++k)
            g += std::abs(static_cast<double>(r.global[k]) - static_cast<double>(r.local[k]));
        s.add(g / (k_hi - k_lo + 1));
    }
    return s.mean();
}

}  // namespace

Calibration calibrate_d_star(const ExperimentConfig& cfg) {
    Calibration cal;
    const int d = cfg.dim();
    const int k_hi = cfg.annulus_counterexample ? d - 1 : d;
    ExperimentConfig probe = cfg;
    probe.n = {*std::max_element(cfg.n.begin(), cfg.n.end())};
    probe.trials = cfg.calibration_trials;
    probe.seed = Rng(cfg.seed).substream(kCalibrationStream).key();
    for (double D : cfg.d_star_candidates) {
        const auto outs = run_schedule(probe, RegimeSpec::log_rule(d, D));
        std::vector<TrialRecord> recs;
        for (const auto& o : outs) recs.push_back(o.record);
        const double g = k_hi >= 1 ? gap(recs, 1, k_hi) : 0.0;
        cal.gaps.emplace_back(D, g);
        cal.d_star = D;
        if (g < cfg.calibration_gap) {
            cal.satisfied = true;
            break;
        }
    }
    return cal;
}

// Theory -------------------------------------------------------------------------

nlohmann::json theory_targets(const ExperimentConfig& cfg) {
    const int d = cfg.dim();
    const Density& f = *cfg.density;
    Rng base = Rng(cfg.seed).substream(kTheoryStream);
    const auto samples = cfg.theory_samples;
    nlohmann::json t;
    t["samples"] = samples;
    t["seed"] = base.key();

    if (cfg.mode == Mode::gamma_curve) {
        nlohmann::json rows = nlohmann::json::array();
        for (int k : cfg.k) {
            for (std::size_t i = 0; i < cfg.lambdas.size(); ++i) {
                Rng rng = base.substream(static_cast<std::uint64_t>(k) * 1000 + i);
                const Estimate e = gamma_k_estimate(k, f, cfg.lambdas[i], samples, rng);
                nlohmann::json row = e.to_json();
                row["k"] = k;
                if (std::isinf(cfg.lambdas[i]))
                    row["lambda"] = "inf";
                else
                    row["lambda"] = cfg.lambdas[i];
                if (k == 1 && f.is_uniform() && f.support_volume())
                    row["closed_form"] = gamma_1_closed_uniform(d, cfg.lambdas[i], *f.support_volume());
                rows.push_back(row);
            }
        }
        t["gamma"] = rows;
        return t;
    }
    if (cfg.mode == Mode::morse_euler_audit) return t;

    const Regime regime = cfg.regime.classification();
    t["regime"] = to_string(regime);
    std::vector<int> ks = cfg.k;
    if (cfg.mode == Mode::euler_phase) {
        ks.clear();
        for (int k = 1; k <= d; ++k) ks.push_back(k);
    }
    const bool want_var = cfg.mode == Mode::variance_scaling || cfg.mode == Mode::clt;
    for (int k : ks) {
        nlohmann::json e;
        Rng rng = base.substream(static_cast<std::uint64_t>(k));
        if (regime == Regime::subcritical) {
            Rng r1 = rng.substream(1);
            const Estimate mu = k == 1 ? mu_1_closed(f, samples, r1) : mu_k_estimate(k, f, samples, r1);
            e["mu"] = mu.to_json();
            e["mean"] = mu.value;
            e["mean_std_err"] = mu.std_err;
            // Subcritical counts are asymptotically Poisson-like: variance ~ mean.
            e["variance"] = mu.value;
            e["variance_std_err"] = mu.std_err;
        } else {
            const double lambda = regime == Regime::critical ? cfg.regime.lambda() : kInfLambda;
            Rng r2 = rng.substream(2);
            const Estimate g = gamma_k_estimate(k, f, lambda, samples, r2);
            e["gamma"] = g.to_json();
            e["mean"] = g.value;
            e["mean_std_err"] = g.std_err;
            if (want_var) {
                Rng r3 = rng.substream(3);
                const VarianceConstants vc = variance_constants_estimate(k, f, lambda, samples, r3);
                e["constants"] = vc.to_json();
                const Estimate& v = cfg.process == ProcessKind::poisson ? vc.sigma2_hat : vc.sigma2;
                e["variance"] = v.value;
                e["variance_std_err"] = v.std_err;
            }
        }
        t["k"][ktag(k)] = e;
    }
    if (regime == Regime::subcritical) {
        try {
            const CriticalIndex ci = critical_index(cfg.regime);
            t["critical_index"] = {{"k_c", ci.k_c},
                                   {"alpha", ci.alpha},
                                   {"clamped_high", ci.clamped_high},
                                   {"clamped_low", ci.clamped_low}};
        } catch (const WrongRegime&) {
        }
    }
    if (cfg.mode == Mode::euler_phase) {
        if (regime == Regime::subcritical) {
            t["chi_over_n"] = 1.0;
        } else if (regime == Regime::critical) {
            double chi = 1.0;
            double var = 0.0;
            for (int k = 1; k <= d; ++k) {
                const auto& g = t["k"][ktag(k)];
                chi += (k % 2 == 0 ? 1.0 : -1.0) * g["mean"].get<double>();
                var += std::pow(g["mean_std_err"].get<double>(), 2);
            }
            t["chi_over_n"] = chi;
            t["chi_over_n_std_err"] = std::sqrt(var);
        } else {
            t["chi_over_n"] = 0.0;
            t["chi"] = 1.0;
        }
    }
    return t;
}

// Aggregation --------------------------------------------------------------------

namespace {

double normalizer(const ExperimentConfig& cfg, int k, std::size_t n) {
    const double nn = static_cast<double>(n);
    if (cfg.regime.classification() != Regime::subcritical) return nn;
    const double r = cfg.regime.radius(nn);
    return std::pow(nn, k + 1) * std::pow(r, cfg.dim() * k);
}

nlohmann::json summary(const std::vector<double>& xs) {
    const Moments m = sample_moments(xs);
    const double se = xs.size() > 1 ? std::sqrt(m.variance / static_cast<double>(xs.size())) : 0.0;
    return {{"mean", m.mean},
            {"variance", m.variance},
            {"std_err", se},
            {"skewness", m.skewness},
            {"excess_kurtosis", m.excess_kurtosis}};
}

std::optional<double> target_of(const nlohmann::json& targets, int k, const char* key) {
    if (!targets.contains("k") || !targets["k"].contains(ktag(k))) return std::nullopt;
    const auto& e = targets["k"][ktag(k)];
    if (!e.contains(key) || !e[key].is_number()) return std::nullopt;
    return e[key].get<double>();
}

}  // namespace

nlohmann::json aggregate_records(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records,
                                 const nlohmann::json& targets, const nlohmann::json& extra) {
    nlohmann::json agg;
    agg["mode"] = to_string(cfg.mode);
    agg["version"] = kVersion;
    agg["seed"] = cfg.seed;
    agg["config"] = cfg.to_json();
    agg["theory"] = targets;
    for (const auto& [key, v] : extra.items()) agg[key] = v;
    if (!trial_mode(cfg.mode)) return agg;

    const int d = cfg.dim();
    std::vector<std::vector<const TrialRecord*>> by_n(cfg.n.size());
    for (const auto& r : records) by_n.at(r.n_index).push_back(&r);
    for (auto& v : by_n)
        std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->trial < b->trial; });

    const RegimeSpec regime =
        cfg.mode == Mode::global_vs_local && agg.contains("D_star") ? RegimeSpec::log_rule(d, agg["D_star"].get<double>())
                                                                    : cfg.regime;

    nlohmann::json sched = nlohmann::json::array();
    std::vector<double> prev_gap(static_cast<std::size_t>(d) + 1, std::numeric_limits<double>::infinity());
    bool nonincreasing = true;
    for (std::size_t s = 0; s < cfg.n.size(); ++s) {
        const auto& recs = by_n[s];
        const std::size_t n = cfg.n[s];
        nlohmann::json entry;
        entry["n"] = n;
        entry["r"] = regime.radius(static_cast<double>(n));
        entry["trials"] = recs.size();
        if (recs.empty()) {
            sched.push_back(entry);
            continue;
        }
        std::vector<double> n0;
        for (auto* r : recs) n0.push_back(static_cast<double>(r->local[0]));
        entry["N0"] = summary(n0);

        if (cfg.mode == Mode::euler_phase) {
            std::vector<double> chi, chi_n;
            for (auto* r : recs) {
                std::int64_t c = 0;
                for (int k = 0; k <= d; ++k) c += (k % 2 == 0 ? 1 : -1) * static_cast<std::int64_t>(r->local[k]);
                chi.push_back(static_cast<double>(c));
                chi_n.push_back(static_cast<double>(c) / static_cast<double>(n));
            }
            entry["chi"] = summary(chi);
            entry["chi_over_n"] = summary(chi_n);
            if (targets.contains("chi_over_n")) {
                const double tgt = targets["chi_over_n"].get<double>();
                entry["chi_over_n"]["target"] = tgt;
                if (tgt != 0.0) entry["chi_over_n"]["rel_error"] = (entry["chi_over_n"]["mean"].get<double>() - tgt) / std::abs(tgt);
            }
        }

        for (int k : cfg.k) {
            nlohmann::json e;
            std::vector<double> xs;
            std::vector<std::uint64_t> us;
            std::size_t positive = 0;
            for (auto* r : recs) {
                xs.push_back(static_cast<double>(r->local[k]));
                us.push_back(r->local[k]);
                positive += r->local[k] > 0;
            }
            e = summary(xs);
            e["fraction_positive"] = static_cast<double>(positive) / static_cast<double>(recs.size());
            const double norm = normalizer(cfg, k, n);
            e["normalizer"] = norm;
            e["normalized_mean"] = e["mean"].get<double>() / norm;
            e["normalized_mean_std_err"] = e["std_err"].get<double>() / norm;
            e["normalized_variance"] = e["variance"].get<double>() / norm;
            const auto tmean = target_of(targets, k, "mean");
            const auto tvar = target_of(targets, k, "variance");
            if (tmean) {
                e["target_mean"] = *tmean;
                e["mean_rel_error"] = (e["normalized_mean"].get<double>() - *tmean) / *tmean;
            }
            if (tvar && cfg.mode != Mode::mean_scaling) {
                e["target_variance"] = *tvar;
                e["variance_rel_error"] = (e["normalized_variance"].get<double>() - *tvar) / *tvar;
            }
            if (cfg.mode == Mode::poisson_limit) {
                const double m = e["mean"].get<double>();
                if (tmean) e["dtv_target"] = empirical_dtv_poisson(us, *tmean * norm);
                if (m > 0.0) {
                    e["dtv_sample_mean"] = empirical_dtv_poisson(us, m);
                    e["chi_square_p"] = chi_square_poisson(us, m);
                }
            }
            if (cfg.mode == Mode::clt) {
                try {
                    const NormalityDiagnostics nd = normality_diagnostics(xs);
                    e["normality"] = {{"skewness", nd.skewness},
                                      {"excess_kurtosis", nd.excess_kurtosis},
                                      {"ks_stat", nd.ks_stat}};
                } catch (const DegenerateInput& ex) {
                    e["normality"] = {{"error", ex.what()}};
                }
            }
            if (cfg.mode == Mode::global_vs_local) {
                std::vector<double> absd, sd;
                for (auto* r : recs) {
                    const double delta = static_cast<double>(r->global[k]) - static_cast<double>(r->local[k]);
                    absd.push_back(std::abs(delta));
                    sd.push_back(delta);
                }
                const Moments ma = sample_moments(absd);
                const Moments ms = sample_moments(sd);
                e["global"] = summary([&] {
                    std::vector<double> g;
                    for (auto* r : recs) g.push_back(static_cast<double>(r->global[k]));
                    return g;
                }());
                e["mean_abs_gap"] = ma.mean;
                e["mean_signed_gap"] = ms.mean;
                e["signed_gap_std_err"] = std::sqrt(ms.variance / static_cast<double>(sd.size()));
                if (ma.mean > prev_gap[k]) nonincreasing = false;
                prev_gap[k] = ma.mean;
            }
            entry["k"][ktag(k)] = e;
        }
        sched.push_back(entry);
    }
    agg["schedule"] = sched;
    if (cfg.mode == Mode::global_vs_local) agg["gap_nonincreasing"] = nonincreasing;
    return agg;
}

// Non-trial modes ----------------------------------------------------------------

namespace {

ExperimentResult run_audit(const ExperimentConfig& cfg) {
    ExperimentResult res;
    struct Case {
        std::size_t cloud;
        int d;
        std::size_t n;
        double eps;
        std::int64_t chi_critical = 0;
        std::int64_t chi_cech = 0;
        bool skipped = false;
    };
    std::vector<std::vector<Case>> cases(cfg.audit_clouds);
    parallel_for(cfg.audit_clouds, cfg.threads, [&](std::size_t c) {
        Rng rng = Rng(cfg.seed).substream(kAuditStream).substream(c);
        const int d = cfg.audit_dims[c % cfg.audit_dims.size()];
        const std::size_t n = 3 + rng() % (cfg.audit_n_max - 2);
        const PointCloud cloud = sample_iid(*uniform_box(d), n, rng);
        // Radii up to where an eps-ball holds about four points on average.
        const double eps_max = std::pow(4.0 / (static_cast<double>(n) * unit_ball_volume(d)), 1.0 / d);
        for (std::size_t i = 0; i < cfg.audit_radii; ++i) {
            Case cs{c, d, n, eps_max * static_cast<double>(i + 1) / static_cast<double>(cfg.audit_radii)};
            EnumOptions eo;
            eo.k_max = d;
            cs.chi_critical = euler_from_critical(counts(enumerate_critical(cloud, cs.eps, eo), n, d, cs.eps));
            CechOptions co;
            co.dim_cap = static_cast<int>(n) - 1;
            try {
                cs.chi_cech = euler_characteristic(build_cech(cloud, cs.eps, co));
            } catch (const ComplexTooLarge&) {
                cs.skipped = true;
            }
            cases[c].push_back(cs);
        }
    });
    std::ostringstream csv;
    csv << "cloud,d,n,eps,chi_critical,chi_cech,match\n";
    csv.precision(17);
    std::size_t total = 0, matches = 0, skipped = 0;
    nlohmann::json mismatches = nlohmann::json::array();
    for (const auto& v : cases)
        for (const auto& cs : v) {
            ++total;
            const bool ok = !cs.skipped && cs.chi_critical == cs.chi_cech;
            matches += ok;
            skipped += cs.skipped;
            csv << cs.cloud << ',' << cs.d << ',' << cs.n << ',' << cs.eps << ',' << cs.chi_critical << ','
                << (cs.skipped ? std::string("") : std::to_string(cs.chi_cech)) << ',' << (ok ? 1 : 0) << '\n';
            if (!ok && mismatches.size() < 20)
                mismatches.push_back({{"cloud", cs.cloud}, {"d", cs.d}, {"n", cs.n}, {"eps", cs.eps},
                                      {"chi_critical", cs.chi_critical}, {"chi_cech", cs.chi_cech},
                                      {"skipped", cs.skipped}});
        }
    nlohmann::json extra = {{"cases", total}, {"matches", matches}, {"skipped", skipped}, {"mismatches", mismatches}};
    res.aggregate = aggregate_records(cfg, {}, theory_targets(cfg), extra);
    res.tables.emplace_back("audit.csv", csv.str());
    return res;
}

ExperimentResult run_gamma_curve(const ExperimentConfig& cfg) {
    ExperimentResult res;
    const nlohmann::json targets = theory_targets(cfg);
    std::ostringstream csv;
    csv.precision(17);
    csv << "k,lambda,value,std_err,closed_form\n";
    for (const auto& row : targets["gamma"]) {
        csv << row["k"].get<int>() << ',';
        if (row["lambda"].is_string())
            csv << "inf";
        else
            csv << row["lambda"].get<double>();
        csv << ',' << row["value"].get<double>() << ',' << row["std_err"].get<double>() << ',';
        if (row.contains("closed_form")) csv << row["closed_form"].get<double>();
        csv << '\n';
    }
    res.aggregate = aggregate_records(cfg, {}, targets, nlohmann::json::object());
    res.tables.emplace_back("gamma_curve.csv", csv.str());
    return res;
}

std::string summary_csv(const nlohmann::json& agg) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "n,r,k,mean,variance,normalizer,normalized_mean,normalized_variance\n";
    for (const auto& e : agg["schedule"]) {
        if (!e.contains("k")) continue;
        for (const auto& [k, v] : e["k"].items())
            csv << e["n"].get<std::size_t>() << ',' << e["r"].get<double>() << ',' << k << ',' << v["mean"].get<double>()
                << ',' << v["variance"].get<double>() << ',' << v["normalizer"].get<double>() << ','
                << v["normalized_mean"].get<double>() << ',' << v["normalized_variance"].get<double>() << '\n';
    }
    return csv.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.mode == Mode::morse_euler_audit) return run_audit(cfg);
    if (cfg.mode == Mode::gamma_curve) return run_gamma_curve(cfg);

    nlohmann::json extra = nlohmann::json::object();
    RegimeSpec regime = cfg.regime;
    if (cfg.mode == Mode::global_vs_local) {
        double D = 0.0;
        if (cfg.d_star) {
            D = *cfg.d_star;
            extra["D_star_source"] = "config";
        } else {
            const Calibration cal = calibrate_d_star(cfg);
            D = cal.d_star;
            extra["D_star_source"] = "calibrated";
            extra["calibration"] = {{"satisfied", cal.satisfied}, {"gaps", nlohmann::json::array()}};
            for (const auto& [cand, g] : cal.gaps) extra["calibration"]["gaps"].push_back({{"D", cand}, {"gap", g}});
        }
        extra["D_star"] = D;
        regime = RegimeSpec::log_rule(cfg.dim(), D);
    }

    const auto outs = run_schedule(cfg, regime);
    ExperimentResult res;
    std::size_t audited = 0, agree = 0, skipped = 0;
    nlohmann::json disagreements = nlohmann::json::array();
    for (const auto& o : outs) {
        res.records.push_back(o.record);
        skipped += o.audit_skipped;
        if (o.audit) {
            ++audited;
            if (o.audit->first == o.audit->second)
                ++agree;
            else if (disagreements.size() < 20)
                disagreements.push_back({{"n", o.record.n}, {"trial", o.record.trial}, {"chi_critical", o.audit->first},
                                         {"chi_cech", o.audit->second}});
        }
    }
    if (cfg.mode == Mode::euler_phase)
        extra["cech_audit"] = {{"audited", audited}, {"agree", agree}, {"skipped", skipped}, {"disagreements", disagreements}};

    res.aggregate = aggregate_records(cfg, res.records, theory_targets(cfg), extra);
    res.tables.emplace_back("summary.csv", summary_csv(res.aggregate));
    return res;
}

// Raw CSV ------------------------------------------------------------------------

void write_raw_csv(std::ostream& os, const std::vector<TrialRecord>& records, bool global) {
    std::vector<const TrialRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
        return std::tie(a->n_index, a->trial) < std::tie(b->n_index, b->trial);
    });
    os << "n,trial,k,count\n";
    for (auto* r : sorted) {
        const auto& v = global ? r->global : r->local;
        for (std::size_t k = 0; k < v.size(); ++k) os << r->n << ',' << r->trial << ',' << k << ',' << v[k] << '\n';
    }
}

void read_raw_csv(std::istream& is, std::vector<TrialRecord>& records, const std::vector<std::size_t>& n_schedule,
                  bool global) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("n,trial,k,count", 0) != 0) throw FormatError("missing raw CSV header");
    std::size_t lineno = 1;
    auto find = [&](std::size_t n_index, std::size_t trial) -> TrialRecord& {
        for (auto it = records.rbegin(); it != records.rend(); ++it)
            if (it->n_index == n_index && it->trial == trial) return *it;
        records.push_back({});
        records.back().n_index = n_index;
        records.back().n = n_schedule[n_index];
        records.back().trial = trial;
        return records.back();
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t n = 0, trial = 0, k = 0;
        std::uint64_t count = 0;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(ls >> n >> c1 >> trial >> c2 >> k >> c3 >> count) || c1 != ',' || c2 != ',' || c3 != ',')
            throw FormatError("raw CSV line " + std::to_string(lineno) + " malformed");
        const auto pos = std::find(n_schedule.begin(), n_schedule.end(), n);
        if (pos == n_schedule.end()) throw FormatError("raw CSV line " + std::to_string(lineno) + ": n not in schedule");
        auto& rec = find(static_cast<std::size_t>(pos - n_schedule.begin()), trial);
        auto& v = global ? rec.global : rec.local;
        if (v.size() <= k) v.resize(k + 1);
        v[k] = count;
    }
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& name) {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw Error("cannot write " + (dir / name).string());
        return os;
    };
    if (!result.records.empty()) {
        auto os = open("raw.csv");
        write_raw_csv(os, result.records);
        if (!result.records.front().global.empty()) {
            auto og = open("raw_global.csv");
            write_raw_csv(og, result.records, true);
        }
    }
    {
        auto os = open("aggregate.json");
        os << result.aggregate.dump(2) << '\n';
    }
    for (const auto& [name, text] : result.tables) {
        auto os = open(name);
        os << text;
    }
}

}  // namespace dmorse
