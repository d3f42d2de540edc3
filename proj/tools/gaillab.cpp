#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gaillab/fixtures.hpp"
#include "gaillab/gradient_lab.hpp"
#include "gaillab/io.hpp"
#include "gaillab/trainer.hpp"

namespace {

using namespace gaillab;
using nlohmann::json;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(std::strtod(item.c_str(), nullptr));
    return values;
}

struct Fixture {
    TabularMdp mdp;
    std::vector<int> expert_actions;
    std::optional<GaussianKernelPolicy> policy;
};

/// Loads the config when given, otherwise falls back to the canonical
/// disparity fixture with the worst-case imitator.
Fixture load_fixture(const std::string& config_path, double sigma, double anchor) {
    if (!config_path.empty()) {
        const std::string text = slurp(config_path);
        ExperimentConfig config = parse_config(text);
        Fixture fx{std::move(config.mdp), config.expert_actions,
                   policy_spec_of_config(text)};
        return fx;
    }
    Fixture fx{canonical_mdp(), canonical_expert_actions(), canonical_policy(anchor, sigma)};
    return fx;
}

int run_solve_occupancy(const std::string& config_path, double sigma, double anchor,
                        bool as_json) {
    const Fixture fx = load_fixture(config_path, sigma, anchor);
    PolicyTable table =
        fx.policy.has_value()
            ? policy_table_from_gaussian(*fx.policy, fx.mdp)
            : PolicyTable::deterministic(fx.mdp.n_states(), fx.mdp.n_actions(),
                                         fx.expert_actions);
    SolveDiagnostics diag;
    const OccupancyMeasures occ = occupancy_measures(fx.mdp, table, &diag);

    if (as_json) {
        json out;
        out["rho"] = std::vector<double>(occ.rho.data(), occ.rho.data() + occ.rho.size());
        out["d"] = std::vector<double>(occ.d.data(), occ.d.data() + occ.d.size());
        out["condition_estimate"] = diag.condition_estimate;
        std::cout << out.dump(2) << '\n';
        return 0;
    }
    std::printf("occupancy (rows = states, cols = grid actions)\n");
    for (int s = 0; s < fx.mdp.n_states(); ++s) {
        std::printf("s=%d  d=%.6f  rho:", s, occ.d(s));
        for (int a = 0; a < fx.mdp.n_actions(); ++a)
            std::printf(" %.6g", occ.rho(fx.mdp.flat(s, a)));
        std::printf("\n");
    }
    std::printf("sum(rho) = %.12f, condition estimate %.3g%s\n", occ.rho.sum(),
                diag.condition_estimate, diag.ill_conditioned ? " (ill conditioned)" : "");
    return 0;
}

int run_grad_check(const std::string& config_path, double sigma, double anchor, double step) {
    Fixture fx = load_fixture(config_path, sigma, anchor);
    if (!fx.policy.has_value()) throw ValidationError("policy", "grad-check needs a policy spec");
    const GaussianKernelPolicy& policy = *fx.policy;

    const OccupancyJacobian jac = occupancy_gradient(fx.mdp, policy);
    const int da = fx.mdp.action_dim();

    // Central differences on the anchor coordinates, recomputing the full
    // occupancy at each probe.
    double max_abs = 0.0;
    double max_rel_scale = 0.0;
    Eigen::MatrixXd fd(jac.entries.rows(), jac.entries.cols());
    for (std::size_t p = 0; p < policy.anchors.size(); ++p) {
        for (int k = 0; k < da; ++k) {
            GaussianKernelPolicy plus = policy;
            GaussianKernelPolicy minus = policy;
            plus.anchors[p].second(k) += step;
            minus.anchors[p].second(k) -= step;
            const Eigen::VectorXd rho_plus =
                occupancy_measures(fx.mdp, policy_table_from_gaussian(plus, fx.mdp)).rho;
            const Eigen::VectorXd rho_minus =
                occupancy_measures(fx.mdp, policy_table_from_gaussian(minus, fx.mdp)).rho;
            fd.row(p * da + k) = ((rho_plus - rho_minus) / (2.0 * step)).transpose();
        }
    }
    max_rel_scale = fd.cwiseAbs().maxCoeff();
    max_abs = (jac.entries - fd).cwiseAbs().maxCoeff();

    std::printf("parameter  max|analytic - fd|  row_sum(analytic)\n");
    for (Eigen::Index r = 0; r < jac.entries.rows(); ++r)
        std::printf("theta[%ld]   %.3e           %.3e\n", static_cast<long>(r),
                    (jac.entries.row(r) - fd.row(r)).cwiseAbs().maxCoeff(),
                    jac.entries.row(r).sum());
    const double rel = max_rel_scale > 0.0 ? max_abs / max_rel_scale : 0.0;
    std::printf("relative Linf error: %.3e (fd step %.1e)\n", rel, step);
    return 0;
}

int run_sweep_sigma(const std::string& config_path, const std::string& schedule_text,
                    double anchor, int pair_state, int pair_action, double threshold,
                    const std::string& out_path, bool as_json) {
    Fixture fx = load_fixture(config_path, 1.0, anchor);
    std::vector<double> schedule = parse_double_list(schedule_text);
    if (schedule.empty()) {
        for (int k = 0; k <= 10; ++k) schedule.push_back(std::pow(2.0, -k));
    }
    std::vector<std::pair<int, Eigen::VectorXd>> anchors =
        fx.policy.has_value() ? fx.policy->anchors : canonical_anchors(anchor);

    const IndexedPair pair{pair_state, pair_action};
    const auto rows = sigma_sweep(fx.mdp, fx.expert_actions, anchors, schedule, pair, threshold);

    std::ostringstream csv;
    csv << "sigma,grad_norm,disparity_ratio,exploded\n";
    for (const SigmaSweepRow& row : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n", row.sigma, row.grad_norm,
                      row.disparity_ratio, row.exploded ? 1 : 0);
        csv << buf;
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot open " + out_path);
        out << csv.str();
    }
    if (as_json) {
        json out;
        out["rows"] = json::array();
        for (const SigmaSweepRow& row : rows)
            out["rows"].push_back({{"sigma", row.sigma},
                                   {"grad_norm", row.grad_norm},
                                   {"disparity_ratio", row.disparity_ratio},
                                   {"exploded", row.exploded}});
        out["monotone_growth"] = sweep_grows_monotonically(rows);
        std::cout << out.dump(2) << '\n';
    } else {
        std::cout << csv.str();
        std::printf("# monotone growth (k >= 2): %s\n",
                    sweep_grows_monotonically(rows) ? "yes" : "no");
    }
    return 0;
}

int run_explosion_prob(const std::string& config_path, double c, int n, double sigma,
                       double anchor, std::uint64_t seed, bool as_json) {
    Fixture fx = load_fixture(config_path, sigma, anchor);
    if (!fx.policy.has_value())
        throw ValidationError("policy", "explosion-prob needs a policy spec");
    Rng rng(seed);
    const ExplosionProbabilityEstimate est =
        explosion_probability(*fx.policy, fx.expert_actions, fx.mdp, c, n, rng);
    if (as_json) {
        json out = {{"scaled_event_freq", est.scaled_event_freq},
                    {"xi_event_freq", est.xi_event_freq},
                    {"half_width", est.half_width},
                    {"n_samples", est.n_samples},
                    {"C", c}};
        std::cout << out.dump(2) << '\n';
    } else {
        std::printf("Pr(|a - h(s)| / sigma^2 >= %g) = %.4f +- %.4f  (n = %d)\n", c,
                    est.scaled_event_freq, est.half_width, est.n_samples);
        std::printf("Pr(|h(s) - a| >= %g sigma^2)  = %.4f\n", c, est.xi_event_freq);
    }
    return 0;
}

int run_thresholds(const std::string& reward_name, double c, bool as_json) {
    const RewardKind kind = reward_kind_from_string(reward_name);
    const OutlierInterval interval = outlier_threshold(kind, c);

    json out;
    out["reward"] = reward_name;
    out["c"] = c;
    out["attainable"] = interval.attainable;
    if (interval.attainable) {
        out["d_star"] = interval.d_star;
        out["interval"] = {interval.d_star, 1.0};
    }
    if (kind == RewardKind::kR1) out["closed_form"] = "1 - exp(-c)";
    if (kind == RewardKind::kR2) out["closed_form"] = "exp(c) / (1 + exp(c))";

    if (as_json) {
        std::cout << out.dump(2) << '\n';
        return 0;
    }
    if (!interval.attainable) {
        std::printf("%s never reaches %g on (0,1); outlier interval is empty\n",
                    reward_name.c_str(), c);
        return 0;
    }
    std::printf("%s(d) >= %g on [%.12f, 1)\n", reward_name.c_str(), c, interval.d_star);
    if (out.contains("closed_form"))
        std::printf("closed form: %s\n", out["closed_form"].get<std::string>().c_str());
    return 0;
}

int run_training(const std::string& config_path, const std::string& out_dir,
                 const std::string& seed_list) {
    std::string text = slurp(config_path);
    ExperimentConfig config = parse_config(text);
    if (!seed_list.empty()) {
        config.seeds.clear();
        std::istringstream ss(seed_list);
        std::string item;
        while (std::getline(ss, item, ','))
            config.seeds.push_back(std::strtoull(item.c_str(), nullptr, 10));
        config.validate();
    }
    const SweepResult result = run_sweep(config);
    const RunManifest manifest =
        write_run_records(result.records, result.summary, config_to_json(config), out_dir);
    std::printf("wrote %zu trace files and %s\n", manifest.csv_files.size(),
                manifest.summary_file.string().c_str());
    if (result.summary.divergence_rate.has_value())
        std::printf("divergence rate: %.3f (%d of %d runs)\n", *result.summary.divergence_rate,
                    result.summary.n_diverged, result.summary.n_runs);
    return 0;
}

int run_report(const std::vector<std::string>& dirs, const std::string& out_path) {
    std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
    const ReportBundle bundle = report(paths);
    std::cout << report_table(bundle);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot open " + out_path);
        out << bundle.long_csv;
        std::printf("long-format CSV written to %s\n", out_path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact-arithmetic laboratory for adversarial imitation on tabular MDPs"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string schedule_text;
    std::string seed_list;
    std::string reward_name = "r1";
    std::vector<std::string> report_dirs;
    double sigma = 0.5;
    double anchor = -1.0;
    double c_value = 5.0;
    double fd_step = 1e-5;
    double threshold = 1e8;
    int n_samples = 10000;
    int pair_state = 0;
    int pair_action = 4;
    std::uint64_t seed = 1;
    bool as_json = false;

    auto* solve = app.add_subcommand("solve-occupancy", "Exact discounted occupancy of a policy");
    solve->add_option("--config", config_path, "experiment config JSON");
    solve->add_option("--sigma", sigma, "imitator sigma for the canonical fixture");
    solve->add_option("--anchor", anchor, "imitator anchor for the canonical fixture");
    solve->add_flag("--json", as_json, "machine-readable output");

    auto* grad = app.add_subcommand("grad-check",
                                    "Analytic occupancy Jacobian vs central finite differences");
    grad->add_option("--config", config_path, "experiment config JSON (needs a policy spec)");
    grad->add_option("--sigma", sigma, "imitator sigma for the canonical fixture");
    grad->add_option("--anchor", anchor, "imitator anchor for the canonical fixture");
    grad->add_option("--step", fd_step, "finite-difference step");

    auto* sweep = app.add_subcommand("sweep-sigma", "Gradient norm along a decreasing sigma schedule");
    sweep->add_option("--config", config_path, "experiment config JSON");
    sweep->add_option("--schedule", schedule_text, "comma-separated sigmas (default 2^-k, k=0..10)");
    sweep->add_option("--anchor", anchor, "imitator anchor for the canonical fixture");
    sweep->add_option("--pair-state", pair_state, "probed expert state");
    sweep->add_option("--pair-action", pair_action, "probed expert grid action");
    sweep->add_option("--threshold", threshold, "explosion threshold");
    sweep->add_option("--out", out_path, "CSV output path");
    sweep->add_flag("--json", as_json, "machine-readable output");

    auto* prob = app.add_subcommand("explosion-prob", "Monte-Carlo disparity event frequency");
    prob->add_option("--config", config_path, "experiment config JSON (needs a policy spec)");
    prob->add_option("--C", c_value, "event threshold")->required();
    prob->add_option("--n", n_samples, "sample count")->required();
    prob->add_option("--sigma", sigma, "imitator sigma for the canonical fixture");
    prob->add_option("--anchor", anchor, "imitator anchor for the canonical fixture");
    prob->add_option("--seed", seed, "rng seed");
    prob->add_flag("--json", as_json, "machine-readable output");

    auto* thresholds = app.add_subcommand("thresholds", "Reward outlier interval for a threshold c");
    thresholds->add_option("--reward", reward_name, "r1..r8")->required();
    thresholds->add_option("--c", c_value, "clipping threshold")->required();
    thresholds->add_flag("--json", as_json, "machine-readable output");

    auto* run = app.add_subcommand("run", "Multi-seed training sweep");
    run->add_option("--config", config_path, "experiment config JSON")->required();
    run->add_option("--out", out_path, "output directory")->required();
    run->add_option("--seed-list", seed_list, "comma-separated seed override");

    auto* rep = app.add_subcommand("report", "Cross-sweep comparison table");
    rep->add_option("dirs", report_dirs, "run directories")->required();
    rep->add_option("--out", out_path, "long-format CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors are validation failures
    }

    try {
        if (solve->parsed()) return run_solve_occupancy(config_path, sigma, anchor, as_json);
        if (grad->parsed()) return run_grad_check(config_path, sigma, anchor, fd_step);
        if (sweep->parsed())
            return run_sweep_sigma(config_path, schedule_text, anchor, pair_state, pair_action,
                                   threshold, out_path, as_json);
        if (prob->parsed())
            return run_explosion_prob(config_path, c_value, n_samples, sigma, anchor, seed,
                                      as_json);
        if (thresholds->parsed()) return run_thresholds(reward_name, c_value, as_json);
        if (run->parsed()) return run_training(config_path, out_path, seed_list);
        if (rep->parsed()) return run_report(report_dirs, out_path);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
