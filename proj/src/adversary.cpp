#include "gaillab/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gaillab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_shape(const OccupancyMeasures& occ, int n_states, int n_actions) {
    if (occ.rho.size() != static_cast<Eigen::Index>(n_states) * n_actions)
        throw DimensionMismatch("occupancy length does not match n_states * n_actions");
}

DiscriminatorTable blank_table(int n_states, int n_actions) {
    DiscriminatorTable t;
    t.values = Eigen::MatrixXd::Zero(n_states, n_actions);
    t.degenerate.setConstant(n_states, n_actions, false);
    t.undefined.setConstant(n_states, n_actions, false);
    return t;
}

/// Reward at a possibly-degenerate value, as a limit (+-inf allowed).
double reward_limit(RewardKind kind, double d) {
    switch (kind) {
        case RewardKind::kR1: return d >= 1.0 ? kInf : -std::log1p(-d);
        case RewardKind::kR2:
            if (d >= 1.0) return kInf;
            if (d <= 0.0) return -kInf;
            return std::log(d) - std::log1p(-d);
        case RewardKind::kR3: return d <= 0.0 ? -kInf : std::log(d);
        case RewardKind::kR4: return d;
        case RewardKind::kR5: return std::exp(d);
        case RewardKind::kR6: return d <= 0.0 ? -kInf : -1.0 / d;
        case RewardKind::kR7: return d * d;
        case RewardKind::kR8: return std::sqrt(d);
    }
    throw Error("unreachable reward kind");
}
}  // namespace

RewardKind reward_kind_from_string(const std::string& name) {
    for (int i = 0; i < 8; ++i) {
        const auto kind = static_cast<RewardKind>(i);
        if (name == to_string(kind)) return kind;
    }
    throw ValidationError("reward", "unknown reward kind '" + name + "' (expected r1..r8)");
}

std::string to_string(RewardKind kind) {
    return "r" + std::to_string(static_cast<int>(kind) + 1);
}

double reward(RewardKind kind, double d) {
    const bool needs_open_interval = kind == RewardKind::kR1 || kind == RewardKind::kR2 ||
                                     kind == RewardKind::kR3 || kind == RewardKind::kR6;
    if (d < 0.0 || d > 1.0 || (needs_open_interval && (d <= 0.0 || d >= 1.0)))
        throw DomainError("discriminator value " + std::to_string(d) +
                          " outside the domain of " + to_string(kind));
    return reward_limit(kind, d);
}

bool reward_is_nondecreasing(RewardKind kind, int grid_points) {
    double prev = -kInf;
    for (int i = 1; i < grid_points; ++i) {
        const double d = static_cast<double>(i) / grid_points;
        const double r = reward(kind, d);
        if (r < prev) return false;
        prev = r;
    }
    return true;
}

double DiscriminatorTable::value_clamped(int s, int a, double eps, bool* clamped) const {
    const double raw = values(s, a);
    const double v = std::clamp(raw, eps, 1.0 - eps);
    if (clamped != nullptr) *clamped = v != raw;
    return v;
}

DiscriminatorTable optimal_discriminator(const OccupancyMeasures& rho_expert,
                                         const OccupancyMeasures& rho_agent, int n_states,
                                         int n_actions) {
    require_shape(rho_expert, n_states, n_actions);
    require_shape(rho_agent, n_states, n_actions);

    DiscriminatorTable t = blank_table(n_states, n_actions);
    t.mode = DiscriminatorMode::kOptimal;
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const int sa = s * n_actions + a;
            const double re = rho_expert.rho(sa);
            const double rh = rho_agent.rho(sa);
            if (re == 0.0 && rh == 0.0) {
                t.undefined(s, a) = true;
                t.values(s, a) = 0.5;
                continue;
            }
            t.values(s, a) = re / (re + rh);
            if (rh == 0.0 || re == 0.0) t.degenerate(s, a) = true;
        }
    }
    return t;
}

DiscriminatorTable imperfect_discriminator(const OccupancyMeasures& rho_expert,
                                           const OccupancyMeasures& rho_agent, double eps1,
                                           double eps2, int n_states, int n_actions) {
    const bool branch_a = eps1 >= -1.0 && eps2 <= 1.0;
    const bool branch_b = eps1 <= -1.0 && eps2 >= 1.0;
    if (!branch_a && !branch_b)
        throw InvalidPerturbation("(eps1, eps2) = (" + std::to_string(eps1) + ", " +
                                  std::to_string(eps2) + ") is outside both allowed branches");
    require_shape(rho_expert, n_states, n_actions);
    require_shape(rho_agent, n_states, n_actions);

    DiscriminatorTable t = blank_table(n_states, n_actions);
    t.mode = DiscriminatorMode::kPerturbed;
    t.eps1 = eps1;
    t.eps2 = eps2;
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const int sa = s * n_actions + a;
            const double num = (1.0 + eps1) * rho_expert.rho(sa);
            const double den = num + (1.0 - eps2) * rho_agent.rho(sa);
            if (den == 0.0) {
                // eps1 = -1 collapses the table to 0, eps2 = 1 to 1.
                t.values(s, a) = eps1 == -1.0 ? 0.0 : 1.0;
                if (rho_expert.rho(sa) == 0.0 && rho_agent.rho(sa) == 0.0)
                    t.undefined(s, a) = true;
                else
                    t.degenerate(s, a) = true;
                continue;
            }
            t.values(s, a) = num / den;
            if (t.values(s, a) <= 0.0 || t.values(s, a) >= 1.0) t.degenerate(s, a) = true;
        }
    }
    return t;
}

DiscriminatorTable empirical_discriminator(const Eigen::MatrixXd& expert_counts,
                                           const Eigen::MatrixXd& agent_counts, double smoothing) {
    if (smoothing <= 0.0) throw ValidationError("smoothing", "must be positive");
    if (expert_counts.rows() != agent_counts.rows() || expert_counts.cols() != agent_counts.cols())
        throw DimensionMismatch("count matrices differ in shape");

    DiscriminatorTable t = blank_table(static_cast<int>(expert_counts.rows()),
                                       static_cast<int>(expert_counts.cols()));
    t.mode = DiscriminatorMode::kEmpirical;
    t.smoothing = smoothing;
    t.values = (expert_counts.array() + smoothing) /
               (expert_counts.array() + agent_counts.array() + 2.0 * smoothing);
    return t;
}

OutlierInterval outlier_threshold(RewardKind kind, double c) {
    OutlierInterval interval;
    interval.kind = kind;
    interval.c = c;

    switch (kind) {
        case RewardKind::kR1:
            if (c <= 0.0) { interval.d_star = 0.0; interval.attainable = c == 0.0; return interval; }
            interval.d_star = 1.0 - std::exp(-c);
            interval.attainable = true;
            return interval;
        case RewardKind::kR2:
            // logit inverse; also equals 1 / (2 - alpha) at the matched c.
            interval.d_star = 1.0 / (1.0 + std::exp(-c));
            interval.attainable = true;
            return interval;
        default: break;
    }

    const double lo_limit = reward_limit(kind, 0.0);
    const double hi_limit = reward_limit(kind, 1.0);
    if (c >= hi_limit || c <= lo_limit) {
        interval.attainable = false;
        interval.d_star = c >= hi_limit ? 1.0 : 0.0;
        return interval;
    }

    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 256 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (reward_limit(kind, mid) < c)
            lo = mid;
        else
            hi = mid;
    }
    interval.d_star = 0.5 * (lo + hi);
    interval.attainable = true;
    return interval;
}

CredoSplit credo_filter(const std::vector<IndexedPair>& expert_pairs,
                        const DiscriminatorTable& disc, RewardKind kind, double c) {
    CredoSplit split;
    for (const IndexedPair& pair : expert_pairs) {
        if (pair.state < 0 || pair.state >= disc.values.rows() || pair.action < 0 ||
            pair.action >= disc.values.cols())
            throw DimensionMismatch("expert pair outside the discriminator table");
        const double d = disc.value(pair.state, pair.action);
        const double r = reward_limit(kind, d);
        if (disc.is_degenerate(pair.state, pair.action) && std::isinf(r) && r > 0.0) {
            split.dropped.push_back(pair);
            ++split.undefined_dropped;
            continue;
        }
        if (r < c)
            split.retained.push_back(pair);
        else
            split.dropped.push_back(pair);
    }
    return split;
}

Eigen::VectorXd credo_mitigation_bound(const Eigen::VectorXd& rho_expert, RewardKind kind,
                                       double c) {
    if (kind != RewardKind::kR1)
        throw WrongRewardKind("the mitigation bound is derived for r1 only");
    if (c <= 0.0) throw ValidationError("c", "clipping threshold must be positive");
    const double factor = std::exp(-c) / (1.0 - std::exp(-c));
    return rho_expert * factor;
}

}  // namespace gaillab
