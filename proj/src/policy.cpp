#include "gaillab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gaillab {

namespace {
constexpr double kSigmaFloor = 1e-12;
}

void GaussianKernelPolicy::validate() const {
    if (sigma <= 0.0) throw DegenerateSigma("sigma must be positive");
    if (kernel == KernelKind::kRbf && bandwidth <= 0.0)
        throw ValidationError("bandwidth", "must be positive for the RBF kernel");
    if (kernel == KernelKind::kKroneckerDelta) {
        std::set<int> seen;
        for (const auto& [s, a] : anchors)
            if (!seen.insert(s).second)
                throw ValidationError("anchors", "delta kernel allows at most one anchor in state " +
                                                     std::to_string(s));
    }
}

double GaussianKernelPolicy::kernel_value(int anchor_state, int state) const {
    if (kernel == KernelKind::kKroneckerDelta) return anchor_state == state ? 1.0 : 0.0;
    const double diff = static_cast<double>(anchor_state - state);
    return std::exp(-diff * diff / (2.0 * bandwidth * bandwidth));
}

std::vector<int> GaussianKernelPolicy::parameter_states() const {
    std::vector<int> states;
    states.reserve(anchors.size());
    for (const auto& [s, a] : anchors) states.push_back(s);
    return states;
}

Eigen::VectorXd kernel_mean(const GaussianKernelPolicy& policy, int state) {
    if (policy.anchors.empty()) throw NoAnchors("kernel mean of a policy with no anchors");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(policy.anchors.front().second.size());
    for (const auto& [s, a] : policy.anchors) mean += policy.kernel_value(s, state) * a;
    return mean;
}

Eigen::VectorXd log_policy_row(const GaussianKernelPolicy& policy, const TabularMdp& mdp,
                               int state) {
    policy.validate();
    if (policy.sigma < kSigmaFloor)
        throw DegenerateSigma("sigma below 1e-12; use a deterministic table instead");
    const Eigen::VectorXd h = kernel_mean(policy, state);
    const int na = mdp.n_actions();
    Eigen::VectorXd z(na);
    for (int a = 0; a < na; ++a) {
        const double dist2 = (mdp.action_point(a) - h).squaredNorm();
        z(a) = -dist2 / (2.0 * policy.sigma * policy.sigma);
    }
    const double zmax = z.maxCoeff();
    double sum = 0.0;
    for (int a = 0; a < na; ++a) sum += std::exp(z(a) - zmax);
    return z.array() - (zmax + std::log(sum));
}

PolicyTable policy_table_from_gaussian(const GaussianKernelPolicy& policy, const TabularMdp& mdp) {
    Eigen::MatrixXd probs(mdp.n_states(), mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s)
        probs.row(s) = log_policy_row(policy, mdp, s).array().exp().transpose();
    return {probs};
}

PolicyJacobian policy_jacobian(const GaussianKernelPolicy& policy, const TabularMdp& mdp) {
    const PolicyTable table = policy_table_from_gaussian(policy, mdp);
    const int ns = mdp.n_states();
    const int na = mdp.n_actions();
    const int da = mdp.action_dim();
    const int np = static_cast<int>(policy.anchors.size());
    const double inv_var = 1.0 / (policy.sigma * policy.sigma);

    PolicyJacobian jac;
    jac.param_states = policy.parameter_states();
    jac.action_dim = da;
    jac.entries = Eigen::MatrixXd::Zero(np * da, ns * na);

    for (int s = 0; s < ns; ++s) {
        // abar(s) = table-mean action; subtracting it differentiates the
        // renormalized row rather than the raw Gaussian weights.
        Eigen::VectorXd abar = Eigen::VectorXd::Zero(da);
        for (int a = 0; a < na; ++a) abar += table.probs(s, a) * mdp.action_point(a);
        for (int p = 0; p < np; ++p) {
            const double kappa = policy.kernel_value(jac.param_states[p], s);
            if (kappa == 0.0) continue;
            for (int a = 0; a < na; ++a) {
                const Eigen::VectorXd centered = mdp.action_point(a) - abar;
                for (int k = 0; k < da; ++k)
                    jac.entries(p * da + k, s * na + a) =
                        kappa * table.probs(s, a) * centered(k) * inv_var;
            }
        }
    }
    return jac;
}

Eigen::VectorXd policy_log_score(const GaussianKernelPolicy& policy, const TabularMdp& mdp,
                                 int state, int action) {
    const PolicyTable table = policy_table_from_gaussian(policy, mdp);
    const int da = mdp.action_dim();
    const int np = static_cast<int>(policy.anchors.size());
    const double inv_var = 1.0 / (policy.sigma * policy.sigma);

    Eigen::VectorXd abar = Eigen::VectorXd::Zero(da);
    for (int a = 0; a < mdp.n_actions(); ++a) abar += table.probs(state, a) * mdp.action_point(a);
    const Eigen::VectorXd centered = mdp.action_point(action) - abar;

    Eigen::VectorXd score = Eigen::VectorXd::Zero(np * da);
    const std::vector<int> param_states = policy.parameter_states();
    for (int p = 0; p < np; ++p) {
        const double kappa = policy.kernel_value(param_states[p], state);
        if (kappa == 0.0) continue;
        for (int k = 0; k < da; ++k) score(p * da + k) = kappa * centered(k) * inv_var;
    }
    return score;
}

DisparityVerdict disparity_event(const GaussianKernelPolicy& policy, int state,
                                 const Eigen::VectorXd& expert_action, double c,
                                 std::optional<double> exploration_noise, Rng* rng) {
    if (c <= 0.0) throw ValidationError("C", "disparity threshold must be positive");
    policy.validate();
    Eigen::VectorXd h = kernel_mean(policy, state);

    DisparityVerdict verdict;
    verdict.c_used = c;
    if (exploration_noise.has_value() && *exploration_noise != 0.0) {
        if (rng == nullptr) throw Error("exploration noise requested without an rng");
        for (int k = 0; k < h.size(); ++k) h(k) += *exploration_noise * rng->normal();
        verdict.noise_applied = true;
    }
    // |Sigma|_2 = sigma^2 for isotropic Sigma = sigma^2 I.
    const double sigma_norm = policy.sigma * policy.sigma;
    verdict.ratio = (h - expert_action).norm() / sigma_norm;
    verdict.holds = verdict.ratio >= c;
    return verdict;
}

int sample_action(const GaussianKernelPolicy& policy, const TabularMdp& mdp, int state, Rng& rng) {
    const Eigen::VectorXd row =
        log_policy_row(policy, mdp, state).array().exp();
    return rng.categorical(std::span<const double>(row.data(), static_cast<size_t>(row.size())));
}

}  // namespace gaillab
