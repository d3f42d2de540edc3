#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gaillab/mdp.hpp"
#include "gaillab/policy.hpp"
#include "gaillab/rng.hpp"

namespace gaillab {

/// Jacobian of the occupancy measure with respect to the anchor action
/// coordinates; same row layout as PolicyJacobian, columns by sa.
struct OccupancyJacobian {
    Eigen::MatrixXd entries;        // (n_anchors * action_dim) x (|S||A|)
    std::vector<int> param_states;
    int action_dim = 1;
};

/// Assembles the derivative matrix of the occupancy: the policy Jacobian
/// weighted by the state distribution and pushed through the inverse
/// resolvent (I - gamma P Pi)^{-1}. Agrees with finite differences of
/// occupancy_measures.
OccupancyJacobian occupancy_gradient(const TabularMdp& mdp, const GaussianKernelPolicy& policy);

/// Jensen-Shannon divergence between two distributions over pairs,
/// natural log, 0 log 0 = 0. Bounded by log 2.
double js_divergence(const Eigen::VectorXd& rho_agent, const Eigen::VectorXd& rho_expert);

/// Gradient evaluated at a single expert pair.
///
/// `estimator_value` is the exact derivative vector; its entries shrink with
/// the visitation probability of the pair, so on a fixed action grid it
/// saturates toward zero once sigma is small against the grid spacing.
/// `dirac_norm` is the same quantity measured per unit of visitation mass
/// (the value divided by rho_agent(pair), assembled in log space so it stays
/// finite at any sigma); this is the scale on which the sigma -> 0 blow-up
/// is visible, and the one the sweep and the trainer report.
struct GradientReport {
    Eigen::VectorXd estimator_value;
    double norm = 0.0;          // L2 of estimator_value
    double dirac_norm = 0.0;    // L2 of estimator_value / rho_agent(pair), stable form
    IndexedPair pair;
    double sigma = 0.0;
    bool finite = true;
    double rho_agent_pair = 0.0;
    double rho_expert_pair = 0.0;
    double log_factor = 0.0;    // the log-discrepancy factor, stable form
};

/// Immutable per-policy workspace shared by the estimators: table, occupancy,
/// occupancy Jacobian and log-rows are computed once and reused across pairs.
struct EstimatorContext {
    GaussianKernelPolicy policy;
    PolicyTable table;
    OccupancyMeasures occ;
    OccupancyJacobian jac;
    Eigen::MatrixXd log_rows;   // |S| x |A|, log pi(a|s)

    static EstimatorContext build(const TabularMdp& mdp, const GaussianKernelPolicy& policy);
};

/// Pointwise gradient of the JS objective at an expert pair:
/// (grad rho(pair) / 2 rho_E(pair)) * log(2 rho_h / (rho_h + rho_E)).
/// Exactly zero when the two occupancies match at the pair.
/// Throws ZeroExpertDensity when rho_E(pair) = 0.
GradientReport js_pair_gradient(const TabularMdp& mdp, const EstimatorContext& ctx,
                                  const OccupancyMeasures& rho_expert, IndexedPair pair);
GradientReport js_pair_gradient(const TabularMdp& mdp, const GaussianKernelPolicy& policy,
                                  const OccupancyMeasures& rho_expert, IndexedPair pair);

/// Pointwise gradient of the GAIL objective under the fluctuated
/// discriminator: the log-discrepancy term plus the (eps1 + eps2) correction.
/// At eps = 0 its rho_E-weighted sum over all pairs equals twice the
/// js-form weighted sum.
GradientReport perturbed_pair_gradient(const TabularMdp& mdp, const EstimatorContext& ctx,
                                    const OccupancyMeasures& rho_expert, double eps1, double eps2,
                                    IndexedPair pair);
GradientReport perturbed_pair_gradient(const TabularMdp& mdp, const GaussianKernelPolicy& policy,
                                    const OccupancyMeasures& rho_expert, double eps1, double eps2,
                                    IndexedPair pair);

struct SigmaSweepRow {
    double sigma = 0.0;
    double grad_norm = 0.0;        // dirac_norm of the js-form report
    double disparity_ratio = 0.0;  // |h(s_t) - a_t| / sigma^2
    bool exploded = false;
};

/// Evaluates the gradient at a fixed expert pair along a strictly decreasing
/// sigma schedule, against the deterministic expert given by `expert_actions`.
std::vector<SigmaSweepRow> sigma_sweep(const TabularMdp& mdp,
                                       const std::vector<int>& expert_actions,
                                       const std::vector<std::pair<int, Eigen::VectorXd>>& anchors,
                                       const std::vector<double>& schedule, IndexedPair pair,
                                       double explosion_threshold);

/// Monotone-growth flag over a sweep: strictly increasing norms from
/// `start_index` on.
bool sweep_grows_monotonically(const std::vector<SigmaSweepRow>& rows,
                               std::size_t start_index = 2);

struct ExplosionProbabilityEstimate {
    double scaled_event_freq = 0.0;  // |a_t - h(s_t)| / sigma^2 >= C
    double xi_event_freq = 0.0;      // |h(s_t) - a_t| >= C sigma^2
    double half_width = 0.0;         // 95% binomial half-width on scaled_event_freq
    int n_samples = 0;
};

/// Monte-Carlo frequency of the explosion precondition over expert pairs
/// drawn from the deterministic expert's occupancy.
ExplosionProbabilityEstimate explosion_probability(const GaussianKernelPolicy& policy,
                                                   const std::vector<int>& expert_actions,
                                                   const TabularMdp& mdp, double c, int n_samples,
                                                   Rng& rng);

}  // namespace gaillab
