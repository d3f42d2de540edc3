#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gaillab/adversary.hpp"
#include "gaillab/gradient_lab.hpp"
#include "gaillab/mdp.hpp"
#include "gaillab/policy.hpp"

namespace gaillab {

enum class TrainMode { kDe, kSt };
enum class CredoVariant { kFilter, kSaturate };
enum class DiscriminatorKind { kExact, kEmpirical };
enum class InitKind { kFixed, kLevels };

struct CredoConfig {
    double c = 5.0;
    CredoVariant variant = CredoVariant::kFilter;
};

/// Imitator anchor initialization. kLevels draws one base level per run and
/// places every state's anchor at level + Uniform(-jitter, jitter);
/// kFixed uses the given per-state anchor points.
struct InitSpec {
    InitKind kind = InitKind::kLevels;
    std::vector<double> levels = {0.0, 0.5, 1.0};
    double jitter = 0.0;
    std::vector<Eigen::VectorXd> anchors;
};

struct ExperimentConfig {
    TabularMdp mdp;
    std::vector<int> expert_actions;
    TrainMode mode = TrainMode::kDe;
    double sigma0 = 0.5;        // DE start
    double decay = 0.8;         // DE geometric decay, in (0,1)
    double sigma_fixed = 0.3;   // ST
    double explore_noise = 0.1; // DE empirical sampling, grid-spacing units
    RewardKind reward_kind = RewardKind::kR1;
    std::optional<CredoConfig> credo;
    DiscriminatorKind disc_kind = DiscriminatorKind::kExact;
    double smoothing = 0.5;     // empirical discriminator
    int iterations = 60;
    double step_size = 0.05;
    int batch_size = 128;
    std::vector<std::uint64_t> seeds = {1};
    double explosion_threshold = 1e8;
    double convergence_tol = 0.05;
    int disc_refresh = 1;       // rebuild the discriminator every k iterations
    InitSpec init;

    explicit ExperimentConfig(TabularMdp mdp_) : mdp(std::move(mdp_)) {}

    /// Throws ValidationError naming the offending key.
    void validate() const;
};

struct TraceRow {
    int iteration = 0;
    double sigma = 0.0;
    double grad_norm = 0.0;  // Dirac-scaled norm, max over the update batch
    double js = 0.0;
    double p_expert = 0.0;
    long clamp_count = 0;
    long credo_dropped = 0;
};

struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<TraceRow> trace;
    bool diverged = false;
    std::optional<int> diverged_at;
    std::optional<int> converged_at;  // first iteration with js below tolerance
    double final_js = 0.0;
};

struct SweepSummary {
    int n_runs = 0;
    int n_diverged = 0;
    int n_converged = 0;  // final_js < convergence_tol
    std::optional<double> divergence_rate;
    std::optional<double> median_iterations_to_convergence;
    std::optional<std::array<double, 3>> final_js_quartiles;  // q1, median, q3
};

struct SweepResult {
    std::vector<RunRecord> records;
    SweepSummary summary;
};

/// rho_E-weighted mean discriminator value over the expert support.
double p_expert_statistic(const DiscriminatorTable& disc, const OccupancyMeasures& rho_expert);

/// First trace row whose gradient norm exceeds the threshold or is not
/// finite; returns (false, nullopt) when none does.
std::pair<bool, std::optional<int>> detect_divergence(std::span<const TraceRow> trace,
                                                      double threshold);

double divergence_rate(const std::vector<RunRecord>& records);

/// One alternating training run. Deterministic given (config, seed).
/// Numeric trouble is recorded as divergence, never thrown.
RunRecord run_gail(const ExperimentConfig& config, std::uint64_t seed);

/// Independent runs for every configured seed, executed in parallel subject
/// to the GAILLAB_THREADS cap (0 or unset = hardware concurrency).
SweepResult run_sweep(const ExperimentConfig& config);

SweepSummary summarize_records(const std::vector<RunRecord>& records, double convergence_tol);

}  // namespace gaillab
