#pragma once

#include "gaillab/fixtures.hpp"
#include "gaillab/trainer.hpp"

namespace gaillab::testing {

/// Training configuration used by the desk-scale experiments: the canonical
/// disparity MDP, per-seed anchor initialization at one of two levels (a
/// basin the schedule can rescue and one it cannot), and a step size sized
/// so that batched updates cross the grid within the annealing window.
inline ExperimentConfig canonical_train_config(TrainMode mode) {
    ExperimentConfig config(canonical_mdp());
    config.expert_actions = canonical_expert_actions();
    config.mode = mode;
    config.sigma0 = 0.5;
    config.decay = 0.8;
    config.sigma_fixed = 0.3;
    config.reward_kind = RewardKind::kR1;
    config.disc_kind = DiscriminatorKind::kExact;
    config.iterations = 60;
    config.step_size = 0.3;
    config.batch_size = 128;
    config.explosion_threshold = 1e8;
    config.convergence_tol = 0.03;
    config.init.kind = InitKind::kLevels;
    config.init.levels = {0.0, 0.75};
    config.init.jitter = 0.0;
    config.seeds = {1};
    return config;
}

inline std::vector<std::uint64_t> twenty_seeds() {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
    return seeds;
}

}  // namespace gaillab::testing
