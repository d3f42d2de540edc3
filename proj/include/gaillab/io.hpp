#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaillab/policy.hpp"
#include "gaillab/trainer.hpp"

namespace gaillab {

inline constexpr const char* kToolVersion = "0.1.0";

/// MDP from the JSON object {n_states, action_grid, transition, gamma, mu0};
/// transition is nested [s][a][s'].
TabularMdp mdp_from_json(const nlohmann::json& j);
nlohmann::json mdp_to_json(const TabularMdp& mdp);

/// Policy spec {kernel: "delta"|"rbf", bandwidth, sigma, anchors: [[state, coords...]]}.
GaussianKernelPolicy policy_from_json(const nlohmann::json& j);
nlohmann::json policy_to_json(const GaussianKernelPolicy& policy);

/// Full experiment config from JSON text, with defaults applied. Throws
/// ParseError on malformed JSON and ValidationError (naming the key) on
/// constraint violations, including unknown top-level keys.
ExperimentConfig parse_config(const std::string& text);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Optional free-standing policy spec attached to a config document (used by
/// the occupancy and gradient subcommands).
std::optional<GaussianKernelPolicy> policy_spec_of_config(const std::string& text);

struct RunManifest {
    std::vector<std::filesystem::path> csv_files;
    std::filesystem::path summary_file;
};

/// Writes run_<seed>.csv per record (17 significant digits, fixed column
/// order) plus summary.json with the config echo and tool version.
RunManifest write_run_records(const std::vector<RunRecord>& records, const SweepSummary& summary,
                              const nlohmann::json& config_echo,
                              const std::filesystem::path& out_dir);

struct StoredSweep {
    std::vector<RunRecord> records;
    nlohmann::json summary;
};

StoredSweep read_run_records(const std::filesystem::path& dir);

struct ReportRow {
    std::string dir;
    std::string label;
    int n_runs = 0;
    double divergence_rate = 0.0;
    std::optional<double> median_iterations_to_convergence;
    std::optional<std::array<double, 3>> final_js_quartiles;
    double delta_rate_vs_first = 0.0;
};

/// Cross-sweep comparison. Sweeps over different MDP fixtures are refused
/// (MixedFixtures) rather than silently merged.
struct ReportBundle {
    std::vector<ReportRow> rows;
    std::string long_csv;  // plot-ready long format, one row per trace row
};

ReportBundle report(const std::vector<std::filesystem::path>& run_dirs);

std::string report_table(const ReportBundle& bundle);

}  // namespace gaillab
