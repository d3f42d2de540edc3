#include "gaillab/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace gaillab {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double require_number(const json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw ValidationError(key, "missing or not a number");
    return j.at(key).get<double>();
}

const json& require_field(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ValidationError(key, "missing");
    return j.at(key);
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key()))
            throw ValidationError(scope.empty() ? it.key() : scope + "." + it.key(),
                                  "unknown key");
}

}  // namespace

TabularMdp mdp_from_json(const json& j) {
    const int n_states = static_cast<int>(require_number(j, "n_states"));
    const json& grid_j = require_field(j, "action_grid");
    if (!grid_j.is_array() || grid_j.empty())
        throw ValidationError("action_grid", "must be a nonempty array of points");
    const int na = static_cast<int>(grid_j.size());
    const int da = static_cast<int>(grid_j.at(0).size());
    Eigen::MatrixXd grid(na, da);
    for (int a = 0; a < na; ++a) {
        if (static_cast<int>(grid_j.at(a).size()) != da)
            throw ValidationError("action_grid", "ragged point dimensions");
        for (int k = 0; k < da; ++k) grid(a, k) = grid_j.at(a).at(k).get<double>();
    }

    const json& tr = require_field(j, "transition");
    if (static_cast<int>(tr.size()) != n_states)
        throw ValidationError("transition", "outer dimension must be n_states");
    Eigen::MatrixXd transition(n_states * na, n_states);
    for (int s = 0; s < n_states; ++s) {
        if (static_cast<int>(tr.at(s).size()) != na)
            throw ValidationError("transition", "middle dimension must be n_actions");
        for (int a = 0; a < na; ++a) {
            const json& row = tr.at(s).at(a);
            if (static_cast<int>(row.size()) != n_states)
                throw ValidationError("transition", "inner dimension must be n_states");
            for (int sp = 0; sp < n_states; ++sp)
                transition(s * na + a, sp) = row.at(sp).get<double>();
        }
    }

    const double gamma = require_number(j, "gamma");
    const json& mu0_j = require_field(j, "mu0");
    if (static_cast<int>(mu0_j.size()) != n_states)
        throw ValidationError("mu0", "length must equal n_states");
    Eigen::VectorXd mu0(n_states);
    for (int s = 0; s < n_states; ++s) mu0(s) = mu0_j.at(s).get<double>();

    reject_unknown_keys(j, {"n_states", "action_grid", "transition", "gamma", "mu0"}, "mdp");
    return TabularMdp(n_states, grid, transition, gamma, mu0);
}

json mdp_to_json(const TabularMdp& mdp) {
    json j;
    j["n_states"] = mdp.n_states();
    json grid = json::array();
    for (int a = 0; a < mdp.n_actions(); ++a) {
        json pt = json::array();
        for (int k = 0; k < mdp.action_dim(); ++k) pt.push_back(mdp.action_grid()(a, k));
        grid.push_back(pt);
    }
    j["action_grid"] = grid;
    json tr = json::array();
    for (int s = 0; s < mdp.n_states(); ++s) {
        json per_state = json::array();
        for (int a = 0; a < mdp.n_actions(); ++a) {
            json row = json::array();
            for (int sp = 0; sp < mdp.n_states(); ++sp)
                row.push_back(mdp.transition()(s * mdp.n_actions() + a, sp));
            per_state.push_back(row);
        }
        tr.push_back(per_state);
    }
    j["transition"] = tr;
    j["gamma"] = mdp.gamma();
    json mu0 = json::array();
    for (int s = 0; s < mdp.n_states(); ++s) mu0.push_back(mdp.mu0()(s));
    j["mu0"] = mu0;
    return j;
}

GaussianKernelPolicy policy_from_json(const json& j) {
    GaussianKernelPolicy policy;
    const std::string kernel = require_field(j, "kernel").get<std::string>();
    if (kernel == "delta")
        policy.kernel = KernelKind::kKroneckerDelta;
    else if (kernel == "rbf")
        policy.kernel = KernelKind::kRbf;
    else
        throw ValidationError("policy.kernel", "expected 'delta' or 'rbf'");
    policy.bandwidth = j.value("bandwidth", 1.0);
    policy.sigma = require_number(j, "sigma");
    for (const json& anchor : require_field(j, "anchors")) {
        if (anchor.size() < 2)
            throw ValidationError("policy.anchors", "anchor needs a state and coordinates");
        const int state = anchor.at(0).get<int>();
        Eigen::VectorXd point(anchor.size() - 1);
        for (std::size_t k = 1; k < anchor.size(); ++k)
            point(static_cast<Eigen::Index>(k - 1)) = anchor.at(k).get<double>();
        policy.anchors.emplace_back(state, point);
    }
    reject_unknown_keys(j, {"kernel", "bandwidth", "sigma", "anchors"}, "policy");
    policy.validate();
    return policy;
}

json policy_to_json(const GaussianKernelPolicy& policy) {
    json j;
    j["kernel"] = policy.kernel == KernelKind::kKroneckerDelta ? "delta" : "rbf";
    j["bandwidth"] = policy.bandwidth;
    j["sigma"] = policy.sigma;
    json anchors = json::array();
    for (const auto& [s, a] : policy.anchors) {
        json entry = json::array();
        entry.push_back(s);
        for (Eigen::Index k = 0; k < a.size(); ++k) entry.push_back(a(k));
        anchors.push_back(entry);
    }
    j["anchors"] = anchors;
    return j;
}

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }

    reject_unknown_keys(
        j,
        {"mdp", "expert_actions", "mode", "sigma0", "decay", "sigma", "explore_noise", "reward",
         "credo", "discriminator", "iterations", "step_size", "batch_size", "seeds",
         "explosion_threshold", "convergence_tol", "disc_refresh", "init", "policy"},
        "");

    ExperimentConfig config(mdp_from_json(require_field(j, "mdp")));

    if (j.contains("expert_actions")) {
        for (const json& a : j.at("expert_actions")) config.expert_actions.push_back(a.get<int>());
    } else {
        // Documented default: the expert plays the top grid index everywhere.
        config.expert_actions.assign(config.mdp.n_states(), config.mdp.n_actions() - 1);
    }

    const std::string mode = require_field(j, "mode").get<std::string>();
    if (mode == "DE")
        config.mode = TrainMode::kDe;
    else if (mode == "ST")
        config.mode = TrainMode::kSt;
    else
        throw ValidationError("mode", "expected 'DE' or 'ST'");

    config.sigma0 = j.value("sigma0", config.sigma0);
    config.decay = j.value("decay", config.decay);
    config.sigma_fixed = j.value("sigma", config.sigma_fixed);
    if (config.mode == TrainMode::kSt && !j.contains("sigma"))
        throw ValidationError("sigma", "ST mode requires a fixed sigma");
    config.explore_noise = j.value("explore_noise", config.explore_noise);
    if (j.contains("reward"))
        config.reward_kind = reward_kind_from_string(j.at("reward").get<std::string>());

    if (j.contains("credo") && !j.at("credo").is_null()) {
        const json& cj = j.at("credo");
        reject_unknown_keys(cj, {"c", "variant"}, "credo");
        CredoConfig credo;
        credo.c = require_number(cj, "c");
        const std::string variant = cj.value("variant", "filter");
        if (variant == "filter")
            credo.variant = CredoVariant::kFilter;
        else if (variant == "saturate")
            credo.variant = CredoVariant::kSaturate;
        else
            throw ValidationError("credo.variant", "expected 'filter' or 'saturate'");
        config.credo = credo;
    }

    if (j.contains("discriminator")) {
        const json& dj = j.at("discriminator");
        reject_unknown_keys(dj, {"mode", "smoothing"}, "discriminator");
        const std::string dmode = require_field(dj, "mode").get<std::string>();
        if (dmode == "exact")
            config.disc_kind = DiscriminatorKind::kExact;
        else if (dmode == "empirical")
            config.disc_kind = DiscriminatorKind::kEmpirical;
        else
            throw ValidationError("discriminator.mode", "expected 'exact' or 'empirical'");
        config.smoothing = dj.value("smoothing", config.smoothing);
    }

    config.iterations = static_cast<int>(j.value("iterations", double(config.iterations)));
    config.step_size = j.value("step_size", config.step_size);
    config.batch_size = static_cast<int>(j.value("batch_size", double(config.batch_size)));
    if (j.contains("seeds")) {
        config.seeds.clear();
        for (const json& s : j.at("seeds")) config.seeds.push_back(s.get<std::uint64_t>());
    }
    config.explosion_threshold = j.value("explosion_threshold", config.explosion_threshold);
    config.convergence_tol = j.value("convergence_tol", config.convergence_tol);
    config.disc_refresh = static_cast<int>(j.value("disc_refresh", double(config.disc_refresh)));

    if (j.contains("init")) {
        const json& ij = j.at("init");
        reject_unknown_keys(ij, {"kind", "levels", "jitter", "anchors"}, "init");
        const std::string kind = ij.value("kind", "levels");
        if (kind == "levels") {
            config.init.kind = InitKind::kLevels;
            if (ij.contains("levels")) {
                config.init.levels.clear();
                for (const json& v : ij.at("levels")) config.init.levels.push_back(v.get<double>());
            }
            config.init.jitter = ij.value("jitter", 0.0);
        } else if (kind == "fixed") {
            config.init.kind = InitKind::kFixed;
            for (const json& point : require_field(ij, "anchors")) {
                Eigen::VectorXd a(point.size());
                for (std::size_t k = 0; k < point.size(); ++k)
                    a(static_cast<Eigen::Index>(k)) = point.at(k).get<double>();
                config.init.anchors.push_back(a);
            }
        } else {
            throw ValidationError("init.kind", "expected 'levels' or 'fixed'");
        }
    }

    config.validate();
    return config;
}

json config_to_json(const ExperimentConfig& config) {
    json j;
    j["mdp"] = mdp_to_json(config.mdp);
    j["expert_actions"] = config.expert_actions;
    j["mode"] = config.mode == TrainMode::kDe ? "DE" : "ST";
    j["sigma0"] = config.sigma0;
    j["decay"] = config.decay;
    j["sigma"] = config.sigma_fixed;
    j["explore_noise"] = config.explore_noise;
    j["reward"] = to_string(config.reward_kind);
    if (config.credo.has_value()) {
        j["credo"] = {{"c", config.credo->c},
                      {"variant", config.credo->variant == CredoVariant::kFilter ? "filter"
                                                                                 : "saturate"}};
    }
    j["discriminator"] = {
        {"mode", config.disc_kind == DiscriminatorKind::kExact ? "exact" : "empirical"},
        {"smoothing", config.smoothing}};
    j["iterations"] = config.iterations;
    j["step_size"] = config.step_size;
    j["batch_size"] = config.batch_size;
    j["seeds"] = config.seeds;
    j["explosion_threshold"] = config.explosion_threshold;
    j["convergence_tol"] = config.convergence_tol;
    j["disc_refresh"] = config.disc_refresh;
    json init;
    if (config.init.kind == InitKind::kLevels) {
        init["kind"] = "levels";
        init["levels"] = config.init.levels;
        init["jitter"] = config.init.jitter;
    } else {
        init["kind"] = "fixed";
        json anchors = json::array();
        for (const auto& a : config.init.anchors) {
            json pt = json::array();
            for (Eigen::Index k = 0; k < a.size(); ++k) pt.push_back(a(k));
            anchors.push_back(pt);
        }
        init["anchors"] = anchors;
    }
    j["init"] = init;
    return j;
}

std::optional<GaussianKernelPolicy> policy_spec_of_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.contains("policy") || j.at("policy").is_null()) return std::nullopt;
    return policy_from_json(j.at("policy"));
}

RunManifest write_run_records(const std::vector<RunRecord>& records, const SweepSummary& summary,
                              const json& config_echo, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    RunManifest manifest;
    for (const RunRecord& record : records) {
        const std::filesystem::path path =
            out_dir / ("run_" + std::to_string(record.seed) + ".csv");
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path.string());
        out << "iteration,sigma,grad_norm,js,p_expert,clamp_count,credo_dropped\n";
        for (const TraceRow& row : record.trace) {
            out << row.iteration << ',' << fmt17(row.sigma) << ',' << fmt17(row.grad_norm) << ','
                << fmt17(row.js) << ',' << fmt17(row.p_expert) << ',' << row.clamp_count << ','
                << row.credo_dropped << '\n';
        }
        if (!out) throw IoError("write failed for " + path.string());
        manifest.csv_files.push_back(path);
    }

    json sj;
    sj["tool_version"] = kToolVersion;
    sj["config"] = config_echo;
    sj["n_runs"] = summary.n_runs;
    sj["n_diverged"] = summary.n_diverged;
    sj["n_converged"] = summary.n_converged;
    sj["divergence_rate"] =
        summary.divergence_rate.has_value() ? json(*summary.divergence_rate) : json(nullptr);
    sj["median_iterations_to_convergence"] =
        summary.median_iterations_to_convergence.has_value()
            ? json(*summary.median_iterations_to_convergence)
            : json(nullptr);
    if (summary.final_js_quartiles.has_value())
        sj["final_js_quartiles"] = {(*summary.final_js_quartiles)[0],
                                    (*summary.final_js_quartiles)[1],
                                    (*summary.final_js_quartiles)[2]};
    else
        sj["final_js_quartiles"] = nullptr;
    json runs = json::array();
    for (const RunRecord& record : records) {
        json r;
        r["seed"] = record.seed;
        r["diverged"] = record.diverged;
        r["diverged_at"] =
            record.diverged_at.has_value() ? json(*record.diverged_at) : json(nullptr);
        r["converged_at"] =
            record.converged_at.has_value() ? json(*record.converged_at) : json(nullptr);
        r["final_js"] = record.final_js;
        r["trace_length"] = record.trace.size();
        runs.push_back(r);
    }
    sj["runs"] = runs;

    manifest.summary_file = out_dir / "summary.json";
    std::ofstream out(manifest.summary_file);
    if (!out) throw IoError("cannot open " + manifest.summary_file.string());
    out << sj.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + manifest.summary_file.string());
    return manifest;
}

StoredSweep read_run_records(const std::filesystem::path& dir) {
    StoredSweep stored;
    const std::filesystem::path summary_path = dir / "summary.json";
    std::ifstream in(summary_path);
    if (!in) throw IoError("missing " + summary_path.string());
    try {
        in >> stored.summary;
    } catch (const json::parse_error& e) {
        throw ParseError(summary_path.string() + ": " + e.what());
    }

    for (const json& r : stored.summary.at("runs")) {
        RunRecord record;
        record.seed = r.at("seed").get<std::uint64_t>();
        record.diverged = r.at("diverged").get<bool>();
        if (!r.at("diverged_at").is_null()) record.diverged_at = r.at("diverged_at").get<int>();
        if (!r.at("converged_at").is_null())
            record.converged_at = r.at("converged_at").get<int>();
        record.final_js = r.at("final_js").get<double>();

        const std::filesystem::path csv = dir / ("run_" + std::to_string(record.seed) + ".csv");
        std::ifstream csv_in(csv);
        if (!csv_in) throw IoError("missing " + csv.string());
        std::string line;
        std::getline(csv_in, line);  // header
        while (std::getline(csv_in, line)) {
            if (line.empty()) continue;
            TraceRow row;
            std::istringstream ss(line);
            std::string field;
            auto next = [&]() {
                if (!std::getline(ss, field, ',')) throw IoError("short row in " + csv.string());
                return field;
            };
            row.iteration = std::stoi(next());
            row.sigma = std::strtod(next().c_str(), nullptr);
            row.grad_norm = std::strtod(next().c_str(), nullptr);
            row.js = std::strtod(next().c_str(), nullptr);
            row.p_expert = std::strtod(next().c_str(), nullptr);
            row.clamp_count = std::stol(next());
            row.credo_dropped = std::stol(next());
            record.trace.push_back(row);
        }
        stored.records.push_back(std::move(record));
    }
    return stored;
}

ReportBundle report(const std::vector<std::filesystem::path>& run_dirs) {
    if (run_dirs.empty()) throw ValidationError("dirs", "need at least one run directory");

    ReportBundle bundle;
    std::string fixture_fingerprint;
    std::ostringstream long_csv;
    long_csv << "sweep,seed,iteration,sigma,grad_norm,js,p_expert\n";

    for (const auto& dir : run_dirs) {
        const StoredSweep stored = read_run_records(dir);
        const json& config = stored.summary.at("config");
        const std::string fingerprint = config.at("mdp").dump();
        if (fixture_fingerprint.empty())
            fixture_fingerprint = fingerprint;
        else if (fingerprint != fixture_fingerprint)
            throw MixedFixtures("sweep " + dir.string() +
                                " was produced on a different MDP fixture");

        ReportRow row;
        row.dir = dir.string();
        row.label = config.at("mode").get<std::string>();
        if (config.contains("credo")) row.label += "+CREDO";
        if (config.at("discriminator").at("mode") == "empirical") row.label += "(emp)";
        row.n_runs = stored.summary.at("n_runs").get<int>();
        if (!stored.summary.at("divergence_rate").is_null())
            row.divergence_rate = stored.summary.at("divergence_rate").get<double>();
        if (!stored.summary.at("median_iterations_to_convergence").is_null())
            row.median_iterations_to_convergence =
                stored.summary.at("median_iterations_to_convergence").get<double>();
        if (!stored.summary.at("final_js_quartiles").is_null()) {
            const json& q = stored.summary.at("final_js_quartiles");
            row.final_js_quartiles = {q.at(0).get<double>(), q.at(1).get<double>(),
                                      q.at(2).get<double>()};
        }
        if (!bundle.rows.empty())
            row.delta_rate_vs_first = bundle.rows.front().divergence_rate - row.divergence_rate;
        bundle.rows.push_back(row);

        for (const RunRecord& record : stored.records)
            for (const TraceRow& trace_row : record.trace)
                long_csv << dir.string() << ',' << record.seed << ',' << trace_row.iteration << ','
                         << fmt17(trace_row.sigma) << ',' << fmt17(trace_row.grad_norm) << ','
                         << fmt17(trace_row.js) << ',' << fmt17(trace_row.p_expert) << '\n';
    }
    bundle.long_csv = long_csv.str();
    return bundle;
}

std::string report_table(const ReportBundle& bundle) {
    std::ostringstream out;
    out << "sweep  label  n_runs  divergence_rate  median_iters_to_conv  final_js_q1/q2/q3  "
           "delta_rate_vs_first\n";
    for (const ReportRow& row : bundle.rows) {
        out << row.dir << "  " << row.label << "  " << row.n_runs << "  " << row.divergence_rate
            << "  ";
        if (row.median_iterations_to_convergence.has_value())
            out << *row.median_iterations_to_convergence;
        else
            out << "-";
        out << "  ";
        if (row.final_js_quartiles.has_value())
            out << (*row.final_js_quartiles)[0] << '/' << (*row.final_js_quartiles)[1] << '/'
                << (*row.final_js_quartiles)[2];
        else
            out << "-";
        out << "  " << row.delta_rate_vs_first << '\n';
    }
    return out.str();
}

}  // namespace gaillab
