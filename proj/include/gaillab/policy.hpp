#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "gaillab/mdp.hpp"
#include "gaillab/rng.hpp"

namespace gaillab {

enum class KernelKind { kKroneckerDelta, kRbf };

/// Stochastic policy pi(a|s) proportional to exp(-|a - h(s)|^2 / (2 sigma^2))
/// over the MDP's action grid, with kernel-parameterized mean
/// h(s) = sum_i kappa(s_i, s) a_i (unnormalized kernel sum). The anchor
/// action coordinates are the trainable parameters; sigma -> 0 concentrates
/// each row on the grid point nearest h(s).
struct GaussianKernelPolicy {
    KernelKind kernel = KernelKind::kKroneckerDelta;
    double bandwidth = 1.0;  // RBF only; kappa(si, s) = exp(-(si - s)^2 / (2 bw^2))
    double sigma = 0.5;      // isotropic covariance scale, Sigma = sigma^2 I
    std::vector<std::pair<int, Eigen::VectorXd>> anchors;

    /// Throws on sigma <= 0, bandwidth <= 0 (RBF) or duplicate delta-kernel anchors.
    void validate() const;

    double kernel_value(int anchor_state, int state) const;

    /// States owning parameters, in anchor order.
    std::vector<int> parameter_states() const;
};

/// Mean action h(s). Throws NoAnchors when the anchor list is empty.
Eigen::VectorXd kernel_mean(const GaussianKernelPolicy& policy, int state);

/// log pi(.|s) over the grid, computed with a max-shifted normalizer so rows
/// stay valid at any sigma.
Eigen::VectorXd log_policy_row(const GaussianKernelPolicy& policy, const TabularMdp& mdp,
                               int state);

/// Discretized, renormalized policy table. Throws DegenerateSigma below 1e-12.
PolicyTable policy_table_from_gaussian(const GaussianKernelPolicy& policy, const TabularMdp& mdp);

/// Jacobian of the renormalized table with respect to the anchor action
/// coordinates: rows indexed (anchor p, coordinate k), columns by sa.
/// Entry = kappa(s_p, s) pi(a|s) (a_k - abar_k(s)) / sigma^2, where abar(s)
/// is the table-mean action; the abar term is the renormalization correction,
/// so every row sums to zero.
struct PolicyJacobian {
    Eigen::MatrixXd entries;          // (n_anchors * action_dim) x (|S||A|)
    std::vector<int> param_states;    // anchor states, row-block order
    int action_dim = 1;

    int n_params() const { return static_cast<int>(entries.rows()); }
};

PolicyJacobian policy_jacobian(const GaussianKernelPolicy& policy, const TabularMdp& mdp);

/// Score of a single pair: gradient of log pi(a|s) at (state, action), same
/// parameter layout as PolicyJacobian rows. Analytic, finite at any sigma.
Eigen::VectorXd policy_log_score(const GaussianKernelPolicy& policy, const TabularMdp& mdp,
                                 int state, int action);

/// Outcome of the expert-imitator disparity test at one expert pair.
struct DisparityVerdict {
    bool holds = false;
    double ratio = 0.0;       // |h(s_t) (+ noise) - a_t| / sigma^2
    double c_used = 0.0;
    bool noise_applied = false;
};

/// Compares the mean-action gap at (state, expert action point) against
/// C * |Sigma|_2 with |Sigma|_2 = sigma^2. Optional exploration noise of
/// scale `exploration_noise` is added to h(s) before measuring.
DisparityVerdict disparity_event(const GaussianKernelPolicy& policy, int state,
                                 const Eigen::VectorXd& expert_action, double c,
                                 std::optional<double> exploration_noise = std::nullopt,
                                 Rng* rng = nullptr);

/// Categorical draw of a grid index from the policy row at `state`.
int sample_action(const GaussianKernelPolicy& policy, const TabularMdp& mdp, int state, Rng& rng);

}  // namespace gaillab
