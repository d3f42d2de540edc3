#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gaillab/mdp.hpp"

namespace gaillab {

/// Reward shapes applied to a discriminator value d in (0, 1). All are
/// nondecreasing in d.
enum class RewardKind { kR1, kR2, kR3, kR4, kR5, kR6, kR7, kR8 };

RewardKind reward_kind_from_string(const std::string& name);
std::string to_string(RewardKind kind);

/// r(kind, d):  r1 = -log(1-d), r2 = log d - log(1-d), r3 = log d, r4 = d,
/// r5 = e^d, r6 = -1/d, r7 = d^2, r8 = sqrt(d).
/// Throws DomainError at the endpoints for the log/reciprocal shapes.
double reward(RewardKind kind, double d);

/// Numeric monotonicity check on a dense grid of (0,1); used when analysis
/// tables are constructed.
bool reward_is_nondecreasing(RewardKind kind, int grid_points = 1000);

enum class DiscriminatorMode { kOptimal, kPerturbed, kEmpirical };

/// Per-pair discriminator values with degeneracy bookkeeping. Entries that
/// hit 0 or 1 exactly keep their raw value but are flagged degenerate;
/// pairs with no mass on either side are flagged undefined.
struct DiscriminatorTable {
    Eigen::MatrixXd values;                 // |S| x |A|
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> degenerate;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> undefined;
    DiscriminatorMode mode = DiscriminatorMode::kOptimal;
    double eps1 = 0.0, eps2 = 0.0;          // perturbed mode
    double smoothing = 0.0;                 // empirical mode

    double value(int s, int a) const { return values(s, a); }
    bool is_degenerate(int s, int a) const { return degenerate(s, a) || undefined(s, a); }

    /// Value pulled into [eps, 1-eps]; `clamped` reports whether it moved.
    double value_clamped(int s, int a, double eps, bool* clamped = nullptr) const;
};

/// D*(s,a) = rho_E / (rho_E + rho_h). Pairs with both occupancies zero are
/// marked undefined (excluded from training samples, not fatal).
DiscriminatorTable optimal_discriminator(const OccupancyMeasures& rho_expert,
                                         const OccupancyMeasures& rho_agent, int n_states,
                                         int n_actions);

/// Fluctuated optimum (1+eps1) rho_E / ((1+eps1) rho_E + (1-eps2) rho_h).
/// Allowed branches: eps1 >= -1 and eps2 <= 1, or eps1 <= -1 and eps2 >= 1;
/// the boundary values eps1 = -1 / eps2 = 1 degenerate the table to 0 / 1.
DiscriminatorTable imperfect_discriminator(const OccupancyMeasures& rho_expert,
                                           const OccupancyMeasures& rho_agent, double eps1,
                                           double eps2, int n_states, int n_actions);

/// Count-based estimate (n_E + lambda) / (n_E + n_h + 2 lambda) with additive
/// smoothing lambda > 0. Counts are |S| x |A| matrices.
DiscriminatorTable empirical_discriminator(const Eigen::MatrixXd& expert_counts,
                                           const Eigen::MatrixXd& agent_counts, double smoothing);

/// Discriminator range [d_star, 1) on which reward(kind, d) >= c.
/// `attainable` is false when c is above the shape's supremum on (0,1)
/// (empty interval, returned as a sentinel rather than thrown).
struct OutlierInterval {
    RewardKind kind = RewardKind::kR1;
    double c = 0.0;
    double d_star = 1.0;
    bool attainable = false;
};

/// Solves reward(kind, d) = c. Closed forms for r1 (1 - e^-c) and r2
/// (e^c / (1 + e^c)); the other shapes use bisection (256 iterations,
/// tolerance 1e-12), which the monotone shapes make reliable.
OutlierInterval outlier_threshold(RewardKind kind, double c);

/// Split of a set of expert pairs by the clipping rule: retained pairs have
/// reward(kind, D(s,a)) < c, the rest are dropped. Pairs whose discriminator
/// entry is degenerate with infinite reward are always dropped and counted in
/// `undefined_dropped`. Input order is preserved on both sides.
struct CredoSplit {
    std::vector<IndexedPair> retained;
    std::vector<IndexedPair> dropped;
    int undefined_dropped = 0;
};

CredoSplit credo_filter(const std::vector<IndexedPair>& expert_pairs,
                        const DiscriminatorTable& disc, RewardKind kind, double c);

/// Per-pair lower bounds rho_E * e^-c / (1 - e^-c) that the agent occupancy
/// must exceed on every pair retained under the exact optimal discriminator.
/// Specific to r1; other kinds throw WrongRewardKind.
Eigen::VectorXd credo_mitigation_bound(const Eigen::VectorXd& rho_expert, RewardKind kind,
                                       double c);

}  // namespace gaillab
