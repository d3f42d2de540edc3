#include "gaillab/mdp.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <vector>

namespace gaillab {

namespace {
constexpr double kRowSumTol = 1e-12;
constexpr double kPolicyRowSumTol = 1e-10;
constexpr double kConditionWarn = 1e10;
}  // namespace

TabularMdp::TabularMdp(int n_states, Eigen::MatrixXd action_grid, Eigen::MatrixXd transition,
                       double gamma, Eigen::VectorXd mu0)
    : n_states_(n_states),
      action_grid_(std::move(action_grid)),
      transition_(std::move(transition)),
      gamma_(gamma),
      mu0_(std::move(mu0)) {
    if (n_states_ <= 0) throw ValidationError("n_states", "must be positive");
    if (action_grid_.rows() <= 0) throw ValidationError("action_grid", "must be nonempty");
    if (gamma_ < 0.0 || gamma_ >= 1.0)
        throw ValidationError("gamma", "must lie in [0, 1); the resolvent is singular at 1");
    if (transition_.rows() != n_pairs() || transition_.cols() != n_states_)
        throw ValidationError("transition",
                              "expected shape (n_states*n_actions) x n_states");
    if (mu0_.size() != n_states_) throw ValidationError("mu0", "length must equal n_states");

    for (int sa = 0; sa < n_pairs(); ++sa) {
        if (transition_.row(sa).minCoeff() < 0.0)
            throw ValidationError("transition", "negative probability in row " + std::to_string(sa));
        if (std::abs(transition_.row(sa).sum() - 1.0) > kRowSumTol)
            throw ValidationError("transition", "row " + std::to_string(sa) +
                                                    " does not sum to 1 within 1e-12");
    }
    if (mu0_.minCoeff() < 0.0) throw ValidationError("mu0", "negative entry");
    if (std::abs(mu0_.sum() - 1.0) > kRowSumTol)
        throw ValidationError("mu0", "does not sum to 1 within 1e-12");

    for (int i = 0; i < action_grid_.rows(); ++i)
        for (int j = i + 1; j < action_grid_.rows(); ++j)
            if ((action_grid_.row(i) - action_grid_.row(j)).norm() == 0.0)
                throw ValidationError("action_grid", "grid points " + std::to_string(i) + " and " +
                                                         std::to_string(j) + " coincide");
}

int TabularMdp::nearest_action(const Eigen::VectorXd& point) const {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_actions(); ++a) {
        const double dist = (action_grid_.row(a).transpose() - point).norm();
        if (dist < best_dist) {
            best_dist = dist;
            best = a;
        }
    }
    return best;
}

void PolicyTable::validate() const {
    for (int s = 0; s < n_states(); ++s) {
        if (probs.row(s).minCoeff() < 0.0)
            throw ValidationError("policy", "negative probability in row " + std::to_string(s));
        if (std::abs(probs.row(s).sum() - 1.0) > kPolicyRowSumTol)
            throw ValidationError("policy",
                                  "row " + std::to_string(s) + " does not sum to 1 within 1e-10");
    }
}

PolicyTable PolicyTable::deterministic(int n_states, int n_actions,
                                       const std::vector<int>& actions) {
    if (static_cast<int>(actions.size()) != n_states)
        throw DimensionMismatch("deterministic policy needs one action per state");
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions)
            throw ValidationError("expert_actions", "grid index out of range in state " +
                                                        std::to_string(s));
        probs(s, actions[s]) = 1.0;
    }
    return {probs};
}

Eigen::MatrixXd expand_policy_matrix(const PolicyTable& policy) {
    policy.validate();
    const int ns = policy.n_states();
    const int na = policy.n_actions();
    Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(ns, ns * na);
    for (int s = 0; s < ns; ++s) pi.block(s, s * na, 1, na) = policy.probs.row(s);
    return pi;
}

Eigen::MatrixXd marginalization_matrix(int n_states, int n_actions) {
    if (n_states <= 0 || n_actions <= 0)
        throw DimensionMismatch("marginalization_matrix needs positive dimensions");
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n_states, n_states * n_actions);
    for (int s = 0; s < n_states; ++s)
        t.block(s, s * n_actions, 1, n_actions).setOnes();
    return t;
}

OccupancyMeasures occupancy_measures(const TabularMdp& mdp, const PolicyTable& policy,
                                     SolveDiagnostics* diag) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw DimensionMismatch("policy table does not match MDP dimensions");
    policy.validate();

    const int ns = mdp.n_states();
    const int na = mdp.n_actions();
    const int nsa = ns * na;

    const Eigen::MatrixXd pi = expand_policy_matrix(policy);
    // Resolvent Psi = I - gamma P Pi; rho solves Psi^T rho = (1-gamma) Pi^T mu0.
    Eigen::MatrixXd psi_t =
        Eigen::MatrixXd::Identity(nsa, nsa) - mdp.gamma() * (mdp.transition() * pi).transpose();

    Eigen::VectorXd rho0 = pi.transpose() * mdp.mu0();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(psi_t);
    Eigen::VectorXd rho = lu.solve((1.0 - mdp.gamma()) * rho0);

    const double rcond = lu.rcond();
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (diag != nullptr) {
        diag->condition_estimate = cond;
        diag->ill_conditioned = cond > kConditionWarn;
    }
    if (!rho.allFinite())
        throw SingularSystem("occupancy solve produced non-finite values (condition estimate " +
                                 std::to_string(cond) + ")",
                             cond);

    OccupancyMeasures occ;
    occ.rho = rho;
    occ.d = Eigen::VectorXd::Zero(ns);
    for (int s = 0; s < ns; ++s) occ.d(s) = rho.segment(s * na, na).sum();
    return occ;
}

OccupancyMeasures occupancy_oracle_rollout(const TabularMdp& mdp, const PolicyTable& policy,
                                           int horizon) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw DimensionMismatch("policy table does not match MDP dimensions");
    policy.validate();

    const int ns = mdp.n_states();
    const int na = mdp.n_actions();

    // mu_t: state distribution at step t; rho_t(s,a) = mu_t(s) pi(a|s).
    Eigen::VectorXd mu = mdp.mu0();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(ns * na);
    double discount = 1.0;
    for (int t = 0; t <= horizon; ++t) {
        Eigen::VectorXd rho_t(ns * na);
        for (int s = 0; s < ns; ++s)
            rho_t.segment(s * na, na) = mu(s) * policy.probs.row(s).transpose();
        acc += discount * rho_t;
        discount *= mdp.gamma();
        if (t < horizon) mu = mdp.transition().transpose() * rho_t;
    }
    acc *= (1.0 - mdp.gamma());

    OccupancyMeasures occ;
    occ.rho = acc;
    occ.d = Eigen::VectorXd::Zero(ns);
    for (int s = 0; s < ns; ++s) occ.d(s) = acc.segment(s * na, na).sum();
    return occ;
}

}  // namespace gaillab
