#include "gaillab/fixtures.hpp"

namespace gaillab {

TabularMdp canonical_mdp() {
    const int ns = 5;
    const int na = 5;
    Eigen::MatrixXd grid(na, 1);
    grid << -1.0, -0.5, 0.0, 0.5, 1.0;

    Eigen::MatrixXd transition = Eigen::MatrixXd::Zero(ns * na, ns);
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a) transition(s * na + a, (s + 1) % ns) = 1.0;

    // Uniform start: combined with the cycle it makes every state's
    // visitation weight exactly 1/5, so the states are interchangeable.
    Eigen::VectorXd mu0 = Eigen::VectorXd::Constant(ns, 1.0 / ns);
    return TabularMdp(ns, grid, transition, 0.9, mu0);
}

std::vector<int> canonical_expert_actions() { return {4, 4, 4, 4, 4}; }

std::vector<std::pair<int, Eigen::VectorXd>> canonical_anchors(double value) {
    std::vector<std::pair<int, Eigen::VectorXd>> anchors;
    for (int s = 0; s < 5; ++s) {
        Eigen::VectorXd a(1);
        a << value;
        anchors.emplace_back(s, a);
    }
    return anchors;
}

IndexedPair canonical_pair() { return {0, 4}; }

GaussianKernelPolicy canonical_policy(double anchor_value, double sigma) {
    GaussianKernelPolicy policy;
    policy.kernel = KernelKind::kKroneckerDelta;
    policy.sigma = sigma;
    policy.anchors = canonical_anchors(anchor_value);
    return policy;
}

}  // namespace gaillab
