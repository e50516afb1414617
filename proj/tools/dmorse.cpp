#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dmorse/cech.hpp"
#include "dmorse/critical.hpp"
#include "dmorse/errors.hpp"
#include "dmorse/experiments.hpp"
#include "dmorse/point_process.hpp"
#include "dmorse/theory.hpp"

using namespace dmorse;

namespace {

struct CloudArgs {
    std::string file;
    std::string density = "uniform_box";
    int d = 2;
    std::size_t n = 100;
    std::uint64_t seed = 1;
    std::string process = "iid";
    std::string save;

    void add(CLI::App* cmd) {
        cmd->add_option("--cloud", file, "Point cloud file (CSV or binary); overrides generation");
        cmd->add_option("--density", density, "Density id for generated clouds")->capture_default_str();
        cmd->add_option("--d", d, "Dimension")->capture_default_str();
        cmd->add_option("--n", n, "Number of points (intensity for poisson)")->capture_default_str();
        cmd->add_option("--seed", seed, "Seed")->capture_default_str();
        cmd->add_option("--process", process, "iid or poisson")->capture_default_str();
        cmd->add_option("--save-cloud", save, "Write the generated cloud here");
    }

    PointCloud load() const {
        if (!file.empty()) return load_cloud(file);
        const DensityPtr f = make_density(density, {{"d", d}});
        Rng rng(seed);
        PointCloud c = process_kind_from_string(process) == ProcessKind::iid
                           ? sample_iid(*f, n, rng)
                           : sample_poisson(*f, static_cast<double>(n), rng);
        if (!save.empty()) save_cloud(save, c);
        return c;
    }
};

std::ostream* open_out(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return &std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw Error("cannot write " + path);
    return &file;
}

nlohmann::json counts_json(const CriticalCounts& c) {
    return {{"n", c.n}, {"N", c.by_index}, {"alternating_sum", c.alternating_sum()}};
}

int cmd_enumerate(const CloudArgs& ca, double eps, bool global, int k_max, bool oracle, const std::string& out) {
    const PointCloud cloud = ca.load();
    if (!global && std::isnan(eps)) throw ConfigError("eps", "give --eps or --global");
    EnumOptions opt;
    opt.k_max = k_max;
    const double radius = global ? kGlobal : eps;
    auto pts = oracle ? enumerate_brute(cloud, radius, opt) : enumerate_critical(cloud, radius, opt);
    sort_canonical(pts);
    std::ofstream file;
    write_critical_csv(*open_out(out, file), pts, cloud.dim());
    const auto c = counts(pts, cloud.size(), cloud.dim(), radius);
    nlohmann::json j = counts_json(c);
    j["radius"] = global ? nlohmann::json("global") : nlohmann::json(eps);
    std::cerr << j.dump() << '\n';
    return 0;
}

int cmd_cech(const CloudArgs& ca, double eps, int max_dim, bool betti, std::size_t budget, const std::string& out) {
    const PointCloud cloud = ca.load();
    CechOptions opt;
    opt.dim_cap = max_dim;
    opt.budget = budget;
    const CechComplex cx = build_cech(cloud, eps, opt);
    nlohmann::json j;
    j["eps"] = eps;
    j["dim_cap"] = cx.dim_cap;
    j["truncated"] = cx.truncated;
    j["simplices"] = nlohmann::json::array();
    for (int k = 0; k <= cx.top_dim(); ++k) j["simplices"].push_back(cx.count(k));
    if (!cx.truncated) j["euler_characteristic"] = euler_characteristic(cx);
    if (betti) j["betti"] = betti_numbers(cx, std::max(0, cx.top_dim() - (cx.truncated ? 1 : 0)));
    j["components"] = ball_union_components(cloud, eps);
    if (!out.empty()) {
        std::ofstream file;
        write_complex(*open_out(out, file), cx);
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_constants(int k, int d, const std::string& density, double lambda, bool inf, std::uint64_t samples,
                  std::uint64_t seed, const std::string& method, bool variance) {
    const DensityPtr f = make_density(density, {{"d", d}});
    if (inf) lambda = kInfLambda;
    if (std::isnan(lambda)) throw ConfigError("lambda", "give --lambda or --inf");
    GammaOptions go;
    if (method == "direct")
        go.method = GammaMethod::direct;
    else if (method == "envelope")
        go.method = GammaMethod::envelope;
    else if (method != "radial")
        throw ConfigError("method", "expected radial, direct or envelope");
    Rng rng(seed);
    nlohmann::json j;
    j["k"] = k;
    j["d"] = d;
    j["density"] = f->describe();
    j["lambda"] = inf ? nlohmann::json("inf") : nlohmann::json(lambda);
    Rng r1 = rng.substream(1), r2 = rng.substream(2), r3 = rng.substream(3);
    j["mu"] = mu_k_estimate(k, *f, samples, r1).to_json();
    if (k == 1) j["mu_closed"] = mu_1_closed(*f, samples, r1).to_json();
    j["gamma"] = gamma_k_estimate(k, *f, lambda, samples, r2, go).to_json();
    if (k == 1 && f->is_uniform() && f->support_volume())
        j["gamma_closed"] = gamma_1_closed_uniform(d, lambda, *f->support_volume());
    if (variance) j["variance"] = variance_constants_estimate(k, *f, lambda, samples, r3).to_json();
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_experiment(const std::string& config, const std::string& out_dir) {
    std::ifstream is(config);
    if (!is) throw ConfigError("config", "cannot open " + config);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config", e.what());
    }
    const ExperimentConfig cfg = ExperimentConfig::from_json(j);
    const ExperimentResult res = run_experiment(cfg);
    write_outputs(res, out_dir);
    std::cout << "wrote " << out_dir << " (" << res.records.size() << " trials)\n";
    return 0;
}

int cmd_audit(std::size_t clouds, std::size_t radii, std::size_t n_max, std::uint64_t seed, const std::string& out_dir) {
    ExperimentConfig cfg = ExperimentConfig::from_json(
        {{"mode", "morse_euler_audit"}, {"seed", seed}, {"audit_clouds", clouds}, {"audit_radii", radii},
         {"audit_n_max", n_max}});
    const ExperimentResult res = run_experiment(cfg);
    if (!out_dir.empty()) write_outputs(res, out_dir);
    const auto& a = res.aggregate;
    std::cout << nlohmann::json{{"cases", a["cases"]}, {"matches", a["matches"]}, {"skipped", a["skipped"]},
                                {"mismatches", a["mismatches"]}}
                     .dump(2)
              << '\n';
    return a["matches"] == a["cases"] ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Critical points of distance functions on random point clouds"};
    app.require_subcommand(1);

    CloudArgs enum_cloud, cech_cloud;
    double eps = std::nan("");
    bool global = false, oracle = false;
    int k_max = -1;
    std::string out;
    auto* en = app.add_subcommand("enumerate", "Critical points with index and value");
    enum_cloud.add(en);
    auto* eps_opt = en->add_option("--eps", eps, "Radius bound on critical values");
    en->add_flag("--global", global, "All critical points")->excludes(eps_opt);
    en->add_option("--k-max", k_max, "Highest index");
    en->add_flag("--oracle", oracle, "Use the brute-force enumerator");
    en->add_option("--out", out, "CSV output (default stdout)");

    double cech_eps = 0.0;
    int max_dim = -1;
    bool betti = false;
    std::size_t budget = 10'000'000;
    std::string cech_out;
    auto* ce = app.add_subcommand("cech", "Cech complex statistics");
    cech_cloud.add(ce);
    ce->add_option("--eps", cech_eps, "Ball radius")->required();
    ce->add_option("--max-dim", max_dim, "Highest simplex dimension (default d+1)");
    ce->add_flag("--betti", betti, "Compute mod-2 Betti numbers");
    ce->add_option("--budget", budget, "Simplex budget")->capture_default_str();
    ce->add_option("--export", cech_out, "Write the simplex list here");

    int k = 1, d = 2;
    double lambda = std::nan("");
    bool inf = false, variance = false;
    std::uint64_t samples = 200'000, cseed = 1;
    std::string density = "uniform_box", method = "radial";
    auto* co = app.add_subcommand("constants", "Limit constants by Monte Carlo");
    co->add_option("--k", k, "Index")->capture_default_str();
    co->add_option("--d", d, "Dimension")->capture_default_str();
    co->add_option("--density", density, "Density id")->capture_default_str();
    auto* lam_opt = co->add_option("--lambda", lambda, "Critical-regime lambda");
    co->add_flag("--inf", inf, "Supercritical limit")->excludes(lam_opt);
    co->add_option("--samples", samples, "Samples per constant")->capture_default_str();
    co->add_option("--seed", cseed, "Seed")->capture_default_str();
    co->add_option("--method", method, "radial, direct or envelope")->capture_default_str();
    co->add_flag("--variance", variance, "Also estimate the variance constants");

    std::string config, out_dir = "out";
    auto* ex = app.add_subcommand("experiment", "Run an experiment config");
    ex->add_option("--config", config, "JSON config file")->required();
    ex->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

    std::size_t clouds = 100, radii = 10, n_max = 50;
    std::uint64_t aseed = 1;
    std::string audit_dir;
    auto* au = app.add_subcommand("audit", "Morse-Euler consistency sweep");
    au->add_option("--clouds", clouds, "Random clouds")->capture_default_str();
    au->add_option("--radii", radii, "Radii per cloud")->capture_default_str();
    au->add_option("--n-max", n_max, "Largest cloud")->capture_default_str();
    au->add_option("--seed", aseed, "Seed")->capture_default_str();
    au->add_option("--out-dir", audit_dir, "Write audit.csv and aggregate.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*en) return cmd_enumerate(enum_cloud, eps, global, k_max, oracle, out);
        if (*ce) return cmd_cech(cech_cloud, cech_eps, max_dim, betti, budget, cech_out);
        if (*co) return cmd_constants(k, d, density, lambda, inf, samples, cseed, method, variance);
        if (*ex) return cmd_experiment(config, out_dir);
        if (*au) return cmd_audit(clouds, radii, n_max, aseed, audit_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const CapError& e) {
        std::cerr << "cap exceeded: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
