#include "gaillab/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

namespace gaillab {

namespace {
constexpr double kDiscClampEps = 1e-12;

double min_grid_spacing(const TabularMdp& mdp) {
    double spacing = std::numeric_limits<double>::infinity();
    for (int i = 0; i < mdp.n_actions(); ++i)
        for (int j = i + 1; j < mdp.n_actions(); ++j)
            spacing = std::min(spacing,
                               (mdp.action_point(i) - mdp.action_point(j)).norm());
    return spacing;
}

std::vector<Eigen::VectorXd> initial_anchors(const ExperimentConfig& config, Rng& rng) {
    const int ns = config.mdp.n_states();
    std::vector<Eigen::VectorXd> anchors(ns);
    if (config.init.kind == InitKind::kFixed) {
        for (int s = 0; s < ns; ++s) anchors[s] = config.init.anchors[s];
        return anchors;
    }
    const auto& levels = config.init.levels;
    const std::vector<double> equal(levels.size(), 1.0);
    const double base = levels[static_cast<std::size_t>(rng.categorical(equal))];
    for (int s = 0; s < ns; ++s) {
        Eigen::VectorXd a(1);
        a << base + (config.init.jitter > 0.0 ? rng.uniform(-config.init.jitter, config.init.jitter)
                                              : 0.0);
        anchors[s] = a;
    }
    return anchors;
}

std::vector<IndexedPair> expert_support(const OccupancyMeasures& occ, int n_actions) {
    std::vector<IndexedPair> support;
    for (Eigen::Index sa = 0; sa < occ.rho.size(); ++sa)
        if (occ.rho(sa) > 0.0) support.push_back(IndexedPair::from_flat(static_cast<int>(sa), n_actions));
    return support;
}

int thread_budget() {
    int budget = 0;
    if (const char* env = std::getenv("GAILLAB_THREADS")) budget = std::atoi(env);
    if (budget <= 0) budget = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(budget, 1);
}

double percentile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double idx = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}
}  // namespace

void ExperimentConfig::validate() const {
    if (static_cast<int>(expert_actions.size()) != mdp.n_states())
        throw ValidationError("expert_actions", "need one grid index per state");
    for (int a : expert_actions)
        if (a < 0 || a >= mdp.n_actions())
            throw ValidationError("expert_actions", "grid index out of range");
    if (mode == TrainMode::kDe) {
        if (!(decay > 0.0 && decay < 1.0))
            throw ValidationError("decay", "DE mode needs decay in (0, 1)");
        if (sigma0 <= 0.0) throw ValidationError("sigma0", "must be positive");
    } else if (sigma_fixed <= 0.0) {
        throw ValidationError("sigma", "ST mode needs a positive fixed sigma");
    }
    if (explore_noise < 0.0) throw ValidationError("explore_noise", "must be nonnegative");
    if (iterations < 1) throw ValidationError("iterations", "must be at least 1");
    if (step_size <= 0.0) throw ValidationError("step_size", "must be positive");
    if (batch_size < 1) throw ValidationError("batch_size", "must be at least 1");
    if (seeds.empty()) throw ValidationError("seeds", "must be nonempty");
    if (explosion_threshold <= 0.0)
        throw ValidationError("explosion_threshold", "must be positive");
    if (convergence_tol <= 0.0) throw ValidationError("convergence_tol", "must be positive");
    if (disc_refresh < 1) throw ValidationError("disc_refresh", "must be at least 1");
    if (credo.has_value() && credo->c <= 0.0)
        throw ValidationError("credo.c", "clipping threshold must be positive");
    if (smoothing <= 0.0) throw ValidationError("discriminator.smoothing", "must be positive");
    if (init.kind == InitKind::kLevels) {
        if (init.levels.empty()) throw ValidationError("init.levels", "must be nonempty");
        if (mdp.action_dim() != 1)
            throw ValidationError("init.levels", "level init requires 1-D actions");
        if (init.jitter < 0.0) throw ValidationError("init.jitter", "must be nonnegative");
    } else {
        if (static_cast<int>(init.anchors.size()) != mdp.n_states())
            throw ValidationError("init.anchors", "need one anchor point per state");
        for (const auto& a : init.anchors)
            if (a.size() != mdp.action_dim())
                throw ValidationError("init.anchors", "anchor dimension mismatch");
    }
}

double p_expert_statistic(const DiscriminatorTable& disc, const OccupancyMeasures& rho_expert) {
    const int na = static_cast<int>(disc.values.cols());
    double mass = 0.0;
    double acc = 0.0;
    for (Eigen::Index sa = 0; sa < rho_expert.rho.size(); ++sa) {
        const double w = rho_expert.rho(sa);
        if (w <= 0.0) continue;
        const IndexedPair pair = IndexedPair::from_flat(static_cast<int>(sa), na);
        acc += w * disc.value(pair.state, pair.action);
        mass += w;
    }
    if (mass <= 0.0) throw Error("expert occupancy has empty support");
    return acc / mass;
}

std::pair<bool, std::optional<int>> detect_divergence(std::span<const TraceRow> trace,
                                                      double threshold) {
    for (const TraceRow& row : trace)
        if (!std::isfinite(row.grad_norm) || row.grad_norm > threshold)
            return {true, row.iteration};
    return {false, std::nullopt};
}

double divergence_rate(const std::vector<RunRecord>& records) {
    if (records.empty()) throw Error("divergence rate of an empty record list");
    int diverged = 0;
    for (const RunRecord& r : records) diverged += r.diverged ? 1 : 0;
    return static_cast<double>(diverged) / static_cast<double>(records.size());
}

RunRecord run_gail(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    const TabularMdp& mdp = config.mdp;
    const int ns = mdp.n_states();
    const int na = mdp.n_actions();
    const int da = mdp.action_dim();
    const double noise_scale = config.explore_noise * min_grid_spacing(mdp);

    Rng rng(seed);
    std::vector<Eigen::VectorXd> anchors = initial_anchors(config, rng);
    std::vector<Eigen::VectorXd> expert_points(ns);
    for (int s = 0; s < ns; ++s) expert_points[s] = mdp.action_point(config.expert_actions[s]);

    RunRecord record;
    record.seed = seed;

    DiscriminatorTable disc;
    bool disc_built = false;

    for (int t = 0; t < config.iterations; ++t) {
        const double sigma = config.mode == TrainMode::kDe
                                 ? config.sigma0 * std::pow(config.decay, t)
                                 : config.sigma_fixed;

        GaussianKernelPolicy imitator;
        imitator.kernel = KernelKind::kKroneckerDelta;
        imitator.sigma = sigma;
        for (int s = 0; s < ns; ++s) imitator.anchors.emplace_back(s, anchors[s]);

        // The expert demonstrations come from the same policy class at the
        // current temperature, so matched anchors mean matched occupancies.
        GaussianKernelPolicy expert;
        expert.kernel = KernelKind::kKroneckerDelta;
        expert.sigma = sigma;
        for (int s = 0; s < ns; ++s) expert.anchors.emplace_back(s, expert_points[s]);

        TraceRow row;
        row.iteration = t;
        row.sigma = sigma;

        Eigen::VectorXd update = Eigen::VectorXd::Zero(ns * da);
        try {
            const EstimatorContext ctx = EstimatorContext::build(mdp, imitator);
            const OccupancyMeasures occ_e =
                occupancy_measures(mdp, policy_table_from_gaussian(expert, mdp));

            row.js = js_divergence(ctx.occ.rho, occ_e.rho);

            if (!disc_built || t % config.disc_refresh == 0) {
                if (config.disc_kind == DiscriminatorKind::kExact) {
                    disc = optimal_discriminator(occ_e, ctx.occ, ns, na);
                } else {
                    Eigen::MatrixXd expert_counts = Eigen::MatrixXd::Zero(ns, na);
                    Eigen::MatrixXd agent_counts = Eigen::MatrixXd::Zero(ns, na);
                    for (int b = 0; b < config.batch_size; ++b) {
                        const int sa = rng.categorical(std::span<const double>(
                            occ_e.rho.data(), static_cast<size_t>(occ_e.rho.size())));
                        const IndexedPair p = IndexedPair::from_flat(sa, na);
                        expert_counts(p.state, p.action) += 1.0;
                    }
                    for (int b = 0; b < config.batch_size; ++b) {
                        const int sa = rng.categorical(std::span<const double>(
                            ctx.occ.rho.data(), static_cast<size_t>(ctx.occ.rho.size())));
                        IndexedPair p = IndexedPair::from_flat(sa, na);
                        if (config.mode == TrainMode::kDe && noise_scale > 0.0) {
                            Eigen::VectorXd point = mdp.action_point(p.action);
                            for (int k = 0; k < da; ++k) point(k) += noise_scale * rng.normal();
                            p.action = mdp.nearest_action(point);
                        }
                        agent_counts(p.state, p.action) += 1.0;
                    }
                    if (config.credo.has_value() &&
                        config.credo->variant == CredoVariant::kFilter) {
                        // Clip the expert set against the unfiltered estimate,
                        // then re-estimate from what survives.
                        const DiscriminatorTable raw = empirical_discriminator(
                            expert_counts, agent_counts, config.smoothing);
                        for (int s = 0; s < ns; ++s) {
                            for (int a = 0; a < na; ++a) {
                                if (expert_counts(s, a) == 0.0) continue;
                                bool clamped = false;
                                const double d = raw.value_clamped(s, a, kDiscClampEps, &clamped);
                                if (clamped) ++row.clamp_count;
                                if (reward(config.reward_kind, d) >= config.credo->c) {
                                    row.credo_dropped += static_cast<long>(expert_counts(s, a));
                                    expert_counts(s, a) = 0.0;
                                }
                            }
                        }
                    }
                    disc = empirical_discriminator(expert_counts, agent_counts, config.smoothing);
                }
                disc_built = true;
            }

            row.p_expert = p_expert_statistic(disc, occ_e);

            // Candidate update pairs: the expert support, clipped when CREDO
            // filtering is on.
            std::vector<IndexedPair> candidates = expert_support(occ_e, na);
            if (config.disc_kind == DiscriminatorKind::kExact && config.credo.has_value() &&
                config.credo->variant == CredoVariant::kFilter) {
                const CredoSplit split =
                    credo_filter(candidates, disc, config.reward_kind, config.credo->c);
                row.credo_dropped = static_cast<long>(split.dropped.size());
                candidates = split.retained;
            }

            if (config.disc_kind == DiscriminatorKind::kExact) {
                if (!candidates.empty()) {
                    // Per-pair log factors and explosion diagnostics over the
                    // retained set. The update integrates the action
                    // conditional of each sampled state exactly, which keeps
                    // the importance weight bounded; rarely visited actions
                    // enter at their true mass instead of through a 1/rho_E
                    // spike.
                    std::vector<double> weights(candidates.size());
                    std::vector<double> dirac(candidates.size());
                    std::vector<Eigen::VectorXd> state_sum(
                        ns, Eigen::VectorXd::Zero(ns * da));
                    std::vector<double> state_mass(ns, 0.0);
                    for (std::size_t i = 0; i < candidates.size(); ++i) {
                        const IndexedPair pair = candidates[i];
                        const int sa = pair.flat(na);
                        weights[i] = occ_e.rho(sa);
                        const GradientReport report =
                            js_pair_gradient(mdp, ctx, occ_e, pair);
                        double log_factor = report.log_factor;
                        if (config.credo.has_value() &&
                            config.credo->variant == CredoVariant::kSaturate)
                            log_factor = std::max(log_factor, M_LN2 - config.credo->c);
                        dirac[i] = report.log_factor == 0.0
                                       ? 0.0
                                       : 2.0 * report.dirac_norm *
                                             std::abs(log_factor / report.log_factor);
                        state_sum[pair.state] += ctx.jac.entries.col(sa) * log_factor;
                        state_mass[pair.state] += occ_e.rho(sa);
                    }
                    double max_dirac = 0.0;
                    for (int b = 0; b < config.batch_size; ++b) {
                        const std::size_t i =
                            static_cast<std::size_t>(rng.categorical(weights));
                        update += state_sum[candidates[i].state] /
                                  state_mass[candidates[i].state];
                        max_dirac = std::max(max_dirac, dirac[i]);
                    }
                    update /= static_cast<double>(config.batch_size);
                    row.grad_norm = max_dirac;
                }
            } else {
                // Reward-weighted occupancy gradient; ascent on the expected
                // reward of the smoothed empirical discriminator.
                Eigen::VectorXd reward_vec(ns * na);
                for (int s = 0; s < ns; ++s) {
                    for (int a = 0; a < na; ++a) {
                        bool clamped = false;
                        const double d = disc.value_clamped(s, a, kDiscClampEps, &clamped);
                        if (clamped) ++row.clamp_count;
                        double r = reward(config.reward_kind, d);
                        if (config.credo.has_value() &&
                            config.credo->variant == CredoVariant::kSaturate)
                            r = std::min(r, config.credo->c);
                        reward_vec(s * na + a) = r;
                    }
                }
                update = -(ctx.jac.entries * reward_vec);
                row.grad_norm = update.norm();
            }
        } catch (const Error&) {
            // Numeric failures are data: flag the row as exploded.
            row.grad_norm = std::numeric_limits<double>::quiet_NaN();
        }

        record.trace.push_back(row);
        if (!std::isfinite(row.grad_norm) || row.grad_norm > config.explosion_threshold) {
            record.diverged = true;
            record.diverged_at = t;
            break;
        }
        if (!record.converged_at.has_value() && row.js < config.convergence_tol)
            record.converged_at = t;

        for (int s = 0; s < ns; ++s)
            anchors[s] -= config.step_size * update.segment(s * da, da);
    }

    record.final_js = record.trace.back().js;
    return record;
}

SweepSummary summarize_records(const std::vector<RunRecord>& records, double convergence_tol) {
    SweepSummary summary;
    summary.n_runs = static_cast<int>(records.size());
    if (records.empty()) return summary;

    std::vector<double> final_js;
    std::vector<double> iters_to_conv;
    for (const RunRecord& r : records) {
        final_js.push_back(r.final_js);
        if (r.diverged) ++summary.n_diverged;
        if (!r.diverged && r.final_js < convergence_tol) {
            ++summary.n_converged;
            iters_to_conv.push_back(static_cast<double>(r.converged_at.value()));
        }
    }
    summary.divergence_rate =
        static_cast<double>(summary.n_diverged) / static_cast<double>(summary.n_runs);

    if (!iters_to_conv.empty()) {
        std::sort(iters_to_conv.begin(), iters_to_conv.end());
        summary.median_iterations_to_convergence = percentile(iters_to_conv, 0.5);
    }
    std::sort(final_js.begin(), final_js.end());
    summary.final_js_quartiles = {percentile(final_js, 0.25), percentile(final_js, 0.5),
                                  percentile(final_js, 0.75)};
    return summary;
}

SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    const int n = static_cast<int>(config.seeds.size());
    std::vector<RunRecord> records(n);

    const int workers = std::min(thread_budget(), n);
    std::atomic<int> next{0};
    auto work = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            records[i] = run_gail(config, config.seeds[i]);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& th : pool) th.join();
    }

    SweepResult result;
    result.records = std::move(records);
    result.summary = summarize_records(result.records, config.convergence_tol);
    return result;
}

}  // namespace gaillab
