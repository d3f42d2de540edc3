#include "gaillab/gradient_lab.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "gaillab/errors.hpp"

namespace gaillab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum(double la, double lb) {
    if (la == -kInf) return lb;
    if (lb == -kInf) return la;
    const double hi = std::max(la, lb);
    const double lo = std::min(la, lb);
    return hi + std::log1p(std::exp(lo - hi));
}

/// Score vector grad log pi(a|s) from a precomputed table, PolicyJacobian layout.
Eigen::VectorXd score_from_table(const GaussianKernelPolicy& policy, const TabularMdp& mdp,
                                 const PolicyTable& table, int state, int action) {
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

/// log rho(pair) via the identity rho(s,a) = d(s) pi(a|s); stays finite-valued
/// (or -inf for unreachable states) at any sigma.
double log_rho_pair(const EstimatorContext& ctx, IndexedPair pair) {
    const double d = ctx.occ.d(pair.state);
    if (d <= 0.0) return -kInf;
    return std::log(d) + ctx.log_rows(pair.state, pair.action);
}

/// grad rho(pair) / rho(pair) assembled without forming the ratio: policy
/// score at the pair plus the state-distribution score.
Eigen::VectorXd visitation_score(const EstimatorContext& ctx, const TabularMdp& mdp,
                                 IndexedPair pair) {
    Eigen::VectorXd v = score_from_table(ctx.policy, mdp, ctx.table, pair.state, pair.action);
    const double d = ctx.occ.d(pair.state);
    if (d > 0.0) {
        const int na = mdp.n_actions();
        v += ctx.jac.entries.middleCols(pair.state * na, na).rowwise().sum() / d;
    }
    return v;
}

void check_pair(const TabularMdp& mdp, IndexedPair pair) {
    if (pair.state < 0 || pair.state >= mdp.n_states() || pair.action < 0 ||
        pair.action >= mdp.n_actions())
        throw DimensionMismatch("pair outside the MDP's state-action space");
}
}  // namespace

OccupancyJacobian occupancy_gradient(const TabularMdp& mdp, const GaussianKernelPolicy& policy) {
    const PolicyTable table = policy_table_from_gaussian(policy, mdp);
    const PolicyJacobian h = policy_jacobian(policy, mdp);
    const OccupancyMeasures occ = occupancy_measures(mdp, table);

    const int ns = mdp.n_states();
    const int na = mdp.n_actions();
    const int nsa = ns * na;

    // B = H Delta(T^T d); the diagonal repeats d(s) across the action block.
    Eigen::MatrixXd b = h.entries;
    for (int s = 0; s < ns; ++s) b.middleCols(s * na, na) *= occ.d(s);

    const Eigen::MatrixXd pi = expand_policy_matrix(table);
    Eigen::MatrixXd psi_t =
        Eigen::MatrixXd::Identity(nsa, nsa) - mdp.gamma() * (mdp.transition() * pi).transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(psi_t);

    OccupancyJacobian jac;
    jac.param_states = h.param_states;
    jac.action_dim = h.action_dim;
    jac.entries = lu.solve(b.transpose()).transpose();
    if (!jac.entries.allFinite()) {
        const double rcond = lu.rcond();
        const double cond = rcond > 0.0 ? 1.0 / rcond : kInf;
        throw SingularSystem("occupancy gradient solve produced non-finite values", cond);
    }
    return jac;
}

double js_divergence(const Eigen::VectorXd& rho_agent, const Eigen::VectorXd& rho_expert) {
    if (rho_agent.size() != rho_expert.size())
        throw DimensionMismatch("distributions differ in length");
    double js = 0.0;
    for (Eigen::Index i = 0; i < rho_agent.size(); ++i) {
        const double a = rho_agent(i);
        const double e = rho_expert(i);
        const double m = a + e;
        if (a > 0.0) js += 0.5 * a * std::log(2.0 * a / m);
        if (e > 0.0) js += 0.5 * e * std::log(2.0 * e / m);
    }
    return js;
}

EstimatorContext EstimatorContext::build(const TabularMdp& mdp,
                                         const GaussianKernelPolicy& policy) {
    EstimatorContext ctx;
    ctx.policy = policy;
    ctx.table = policy_table_from_gaussian(policy, mdp);
    ctx.occ = occupancy_measures(mdp, ctx.table);
    ctx.jac = occupancy_gradient(mdp, policy);
    ctx.log_rows.resize(mdp.n_states(), mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s)
        ctx.log_rows.row(s) = log_policy_row(policy, mdp, s).transpose();
    return ctx;
}

GradientReport js_pair_gradient(const TabularMdp& mdp, const EstimatorContext& ctx,
                                  const OccupancyMeasures& rho_expert, IndexedPair pair) {
    check_pair(mdp, pair);
    const int sa = pair.flat(mdp.n_actions());
    const double rho_e = rho_expert.rho(sa);
    if (rho_e <= 0.0)
        throw ZeroExpertDensity("expert occupancy vanishes at the sampled pair");
    const double rho_h = ctx.occ.rho(sa);

    // log(2 rho_h / (rho_h + rho_e)) in log space; equals the naive expression
    // whenever rho_h is representable, and stays finite below the underflow point.
    const double lh = log_rho_pair(ctx, pair);
    const double le = std::log(rho_e);
    const double log_factor = (rho_h == rho_e) ? 0.0 : M_LN2 + lh - log_sum(lh, le);

    GradientReport report;
    report.pair = pair;
    report.sigma = ctx.policy.sigma;
    report.rho_agent_pair = rho_h;
    report.rho_expert_pair = rho_e;
    report.log_factor = log_factor;
    report.estimator_value = ctx.jac.entries.col(sa) * (log_factor / (2.0 * rho_e));
    report.norm = report.estimator_value.norm();
    report.finite = report.estimator_value.allFinite();

    const Eigen::VectorXd dirac = visitation_score(ctx, mdp, pair) * (log_factor / (2.0 * rho_e));
    report.dirac_norm = dirac.allFinite() ? dirac.norm() : kInf;
    return report;
}

GradientReport js_pair_gradient(const TabularMdp& mdp, const GaussianKernelPolicy& policy,
                                  const OccupancyMeasures& rho_expert, IndexedPair pair) {
    return js_pair_gradient(mdp, EstimatorContext::build(mdp, policy), rho_expert, pair);
}

GradientReport perturbed_pair_gradient(const TabularMdp& mdp, const EstimatorContext& ctx,
                                    const OccupancyMeasures& rho_expert, double eps1, double eps2,
                                    IndexedPair pair) {
    const bool branch_a = eps1 >= -1.0 && eps2 <= 1.0;
    const bool branch_b = eps1 <= -1.0 && eps2 >= 1.0;
    if (!branch_a && !branch_b)
        throw InvalidPerturbation("(eps1, eps2) outside both allowed branches");
    check_pair(mdp, pair);

    const int sa = pair.flat(mdp.n_actions());
    const double rho_e = rho_expert.rho(sa);
    if (rho_e <= 0.0)
        throw ZeroExpertDensity("expert occupancy vanishes at the sampled pair");
    const double rho_h = ctx.occ.rho(sa);

    const double lh = log_rho_pair(ctx, pair);
    const double le = std::log(rho_e);
    // Q = (1+eps1) rho_e + (1-eps2) rho_h.
    const double log_q = log_sum(std::log(1.0 + eps1) + le, std::log(1.0 - eps2) + lh);
    double log_factor = std::log(1.0 - eps2) + lh - log_q;
    if (eps1 == 0.0 && eps2 == 0.0 && rho_h == rho_e) log_factor = -M_LN2;
    const double q = std::exp(log_q);

    GradientReport report;
    report.pair = pair;
    report.sigma = ctx.policy.sigma;
    report.rho_agent_pair = rho_h;
    report.rho_expert_pair = rho_e;
    report.log_factor = log_factor;
    const double coeff = log_factor / rho_e + (eps1 + eps2) / q;
    report.estimator_value = ctx.jac.entries.col(sa) * coeff;
    report.norm = report.estimator_value.norm();
    report.finite = report.estimator_value.allFinite();

    const Eigen::VectorXd dirac = visitation_score(ctx, mdp, pair) * coeff;
    report.dirac_norm = dirac.allFinite() ? dirac.norm() : kInf;
    return report;
}

GradientReport perturbed_pair_gradient(const TabularMdp& mdp, const GaussianKernelPolicy& policy,
                                    const OccupancyMeasures& rho_expert, double eps1, double eps2,
                                    IndexedPair pair) {
    return perturbed_pair_gradient(mdp, EstimatorContext::build(mdp, policy), rho_expert, eps1, eps2,
                                pair);
}

std::vector<SigmaSweepRow> sigma_sweep(const TabularMdp& mdp,
                                       const std::vector<int>& expert_actions,
                                       const std::vector<std::pair<int, Eigen::VectorXd>>& anchors,
                                       const std::vector<double>& schedule, IndexedPair pair,
                                       double explosion_threshold) {
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i] >= schedule[i - 1])
            throw ValidationError("schedule", "sigma schedule must be strictly decreasing");
    check_pair(mdp, pair);

    const PolicyTable expert =
        PolicyTable::deterministic(mdp.n_states(), mdp.n_actions(), expert_actions);
    const OccupancyMeasures rho_e = occupancy_measures(mdp, expert);
    const Eigen::VectorXd expert_point = mdp.action_point(pair.action);

    std::vector<SigmaSweepRow> rows;
    rows.reserve(schedule.size());
    for (double sigma : schedule) {
        GaussianKernelPolicy policy;
        policy.kernel = KernelKind::kKroneckerDelta;
        policy.sigma = sigma;
        policy.anchors = anchors;

        const GradientReport report =
            js_pair_gradient(mdp, EstimatorContext::build(mdp, policy), rho_e, pair);
        SigmaSweepRow row;
        row.sigma = sigma;
        row.grad_norm = report.dirac_norm;
        row.disparity_ratio = (kernel_mean(policy, pair.state) - expert_point).norm() /
                              (sigma * sigma);
        row.exploded = !std::isfinite(row.grad_norm) || row.grad_norm > explosion_threshold;
        rows.push_back(row);
    }
    return rows;
}

bool sweep_grows_monotonically(const std::vector<SigmaSweepRow>& rows,
                               std::size_t start_index) {
    for (std::size_t k = std::max<std::size_t>(start_index, 1); k < rows.size(); ++k)
        if (!(rows[k].grad_norm > rows[k - 1].grad_norm)) return false;
    return true;
}

ExplosionProbabilityEstimate explosion_probability(const GaussianKernelPolicy& policy,
                                                   const std::vector<int>& expert_actions,
                                                   const TabularMdp& mdp, double c, int n_samples,
                                                   Rng& rng) {
    if (c <= 0.0) throw ValidationError("C", "must be positive");
    if (n_samples < 1) throw ValidationError("n", "need at least one sample");
    policy.validate();

    const PolicyTable expert =
        PolicyTable::deterministic(mdp.n_states(), mdp.n_actions(), expert_actions);
    const OccupancyMeasures rho_e = occupancy_measures(mdp, expert);
    const double sigma2 = policy.sigma * policy.sigma;

    int scaled_hits = 0;
    int xi_hits = 0;
    for (int i = 0; i < n_samples; ++i) {
        const int sa = rng.categorical(
            std::span<const double>(rho_e.rho.data(), static_cast<size_t>(rho_e.rho.size())));
        const IndexedPair pair = IndexedPair::from_flat(sa, mdp.n_actions());
        const Eigen::VectorXd gap = mdp.action_point(pair.action) - kernel_mean(policy, pair.state);
        if (gap.norm() / sigma2 >= c) ++scaled_hits;
        if (gap.norm() >= c * sigma2) ++xi_hits;
    }

    ExplosionProbabilityEstimate est;
    est.n_samples = n_samples;
    est.scaled_event_freq = static_cast<double>(scaled_hits) / n_samples;
    est.xi_event_freq = static_cast<double>(xi_hits) / n_samples;
    est.half_width =
        1.96 * std::sqrt(est.scaled_event_freq * (1.0 - est.scaled_event_freq) / n_samples);
    return est;
}

}  // namespace gaillab
