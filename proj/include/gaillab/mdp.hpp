#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "gaillab/errors.hpp"

namespace gaillab {

/// Flattened state-action index convention used by every matrix in this
/// library: sa = s * n_actions + a.
struct IndexedPair {
    int state = 0;
    int action = 0;

    int flat(int n_actions) const { return state * n_actions + action; }

    static IndexedPair from_flat(int sa, int n_actions) {
        return {sa / n_actions, sa % n_actions};
    }

    bool operator==(const IndexedPair&) const = default;
};

/// Finite MDP with states {0..n_states-1} and actions living on a fixed grid
/// of points in R^action_dim. The transition table is stored as a dense
/// (|S||A| x |S|) matrix P with P(sa, s') = p(s' | s, a).
class TabularMdp {
  public:
    /// Validates row stochasticity of `transition` and `mu0`, gamma < 1 and
    /// distinctness of grid points. Throws ValidationError on violation.
    TabularMdp(int n_states, Eigen::MatrixXd action_grid, Eigen::MatrixXd transition,
               double gamma, Eigen::VectorXd mu0);

    int n_states() const { return n_states_; }
    int n_actions() const { return static_cast<int>(action_grid_.rows()); }
    int action_dim() const { return static_cast<int>(action_grid_.cols()); }
    int n_pairs() const { return n_states_ * n_actions(); }
    double gamma() const { return gamma_; }
    const Eigen::MatrixXd& action_grid() const { return action_grid_; }
    const Eigen::MatrixXd& transition() const { return transition_; }
    const Eigen::VectorXd& mu0() const { return mu0_; }

    Eigen::VectorXd action_point(int a) const { return action_grid_.row(a).transpose(); }

    int flat(int s, int a) const { return s * n_actions() + a; }

    /// Grid index closest in Euclidean distance to `point` (ties -> lowest index).
    int nearest_action(const Eigen::VectorXd& point) const;

  private:
    int n_states_;
    Eigen::MatrixXd action_grid_;
    Eigen::MatrixXd transition_;
    double gamma_;
    Eigen::VectorXd mu0_;
};

/// Row-stochastic policy matrix, probs(s, a) = pi(a | s).
struct PolicyTable {
    Eigen::MatrixXd probs;

    int n_states() const { return static_cast<int>(probs.rows()); }
    int n_actions() const { return static_cast<int>(probs.cols()); }

    /// Throws ValidationError unless rows sum to 1 within 1e-10 and entries >= 0.
    void validate() const;

    /// One-hot table playing actions[s] in state s.
    static PolicyTable deterministic(int n_states, int n_actions,
                                     const std::vector<int>& actions);
};

/// Discounted stationary distributions of a policy: rho over state-action
/// pairs (length |S||A|) and its state marginal d = T rho (length |S|).
struct OccupancyMeasures {
    Eigen::VectorXd rho;
    Eigen::VectorXd d;
};

/// Optional diagnostics reported by the occupancy solver.
struct SolveDiagnostics {
    double condition_estimate = 0.0;
    bool ill_conditioned = false;  // condition estimate above 1e10
};

/// Block-diagonal expansion Pi of a policy: |S| x |S||A|, row s carries
/// pi(.|s) in its own action block and zeros elsewhere.
Eigen::MatrixXd expand_policy_matrix(const PolicyTable& policy);

/// Marginalization matrix T: |S| x |S||A| of action-block row sums,
/// so that d = T rho and T T^T = |A| I.
Eigen::MatrixXd marginalization_matrix(int n_states, int n_actions);

/// Exact discounted occupancy via a dense LU solve of the resolvent system
/// (I - gamma P Pi)^T rho = (1 - gamma) Pi^T mu0.
/// Throws SingularSystem (with condition estimate) if the solution is not finite.
OccupancyMeasures occupancy_measures(const TabularMdp& mdp, const PolicyTable& policy,
                                     SolveDiagnostics* diag = nullptr);

/// Independent oracle: truncated summation (1-gamma) sum_{t<=horizon} gamma^t rho_t
/// by exact distribution propagation. Accurate to gamma^horizon; test use only.
OccupancyMeasures occupancy_oracle_rollout(const TabularMdp& mdp, const PolicyTable& policy,
                                           int horizon);

}  // namespace gaillab
