#pragma once

#include <utility>
#include <vector>

#include "gaillab/mdp.hpp"
#include "gaillab/policy.hpp"

namespace gaillab {

/// Shared disparity fixture: 5 states cycling deterministically
/// (s -> s+1 mod 5 under every action), 1-D action grid
/// {-1, -0.5, 0, 0.5, 1}, gamma = 0.9, start state 0. The expert plays +1
/// everywhere; the worst-case imitator anchors every state at -1, giving a
/// stable gap of two grid spans at the probed pair (state 0, action +1).
TabularMdp canonical_mdp();

std::vector<int> canonical_expert_actions();

/// One anchor per state at scalar action `value`.
std::vector<std::pair<int, Eigen::VectorXd>> canonical_anchors(double value);

IndexedPair canonical_pair();

/// Imitator policy on the canonical fixture with all anchors at `value`.
GaussianKernelPolicy canonical_policy(double anchor_value, double sigma);

}  // namespace gaillab
