#include <doctest.h>

#include <cmath>

#include "gaillab/trainer.hpp"
#include "train_fixtures.hpp"

using namespace gaillab;

namespace {

OccupancyMeasures occ_of(std::initializer_list<double> values) {
    OccupancyMeasures occ;
    occ.rho = Eigen::VectorXd(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double v : values) occ.rho(i++) = v;
    return occ;
}

DiscriminatorTable table_of(std::initializer_list<double> values, int ns, int na) {
    Eigen::MatrixXd m(ns, na);
    Eigen::Index i = 0;
    for (double v : values) {
        m(i / na, i % na) = v;
        ++i;
    }
    DiscriminatorTable t;
    t.values = m;
    t.degenerate.setConstant(ns, na, false);
    t.undefined.setConstant(ns, na, false);
    return t;
}

std::vector<TraceRow> trace_of(std::initializer_list<double> norms) {
    std::vector<TraceRow> trace;
    int i = 0;
    for (double g : norms) {
        TraceRow row;
        row.iteration = i++;
        row.grad_norm = g;
        trace.push_back(row);
    }
    return trace;
}

}  // namespace

TEST_CASE("p_expert statistic") {
    DiscriminatorTable half = table_of({0.5, 0.5}, 1, 2);
    CHECK(p_expert_statistic(half, occ_of({0.3, 0.7})) == doctest::Approx(0.5).epsilon(1e-15));

    DiscriminatorTable ones = table_of({1.0, 1.0}, 1, 2);
    CHECK(p_expert_statistic(ones, occ_of({0.3, 0.7})) == 1.0);

    DiscriminatorTable mixed = table_of({0.8, 0.4}, 1, 2);
    CHECK(p_expert_statistic(mixed, occ_of({0.25, 0.75})) ==
          doctest::Approx(0.5).epsilon(1e-15));

    // Pairs outside the expert support contribute nothing.
    DiscriminatorTable skewed = table_of({0.9, 0.123}, 1, 2);
    CHECK(p_expert_statistic(skewed, occ_of({1.0, 0.0})) ==
          doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("divergence detection") {
    auto [none, none_at] = detect_divergence(trace_of({0.1, 0.5, 1.0}), 1e8);
    CHECK_FALSE(none);
    CHECK_FALSE(none_at.has_value());

    auto [hit, hit_at] = detect_divergence(trace_of({1.0, 10.0, 1e9, 5.0}), 1e8);
    CHECK(hit);
    CHECK(hit_at == 2);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto [bad, bad_at] = detect_divergence(trace_of({1.0, nan, 1.0}), 1e300);
    CHECK(bad);
    CHECK(bad_at == 1);
}

TEST_CASE("divergence rate") {
    auto make = [](int diverged, int total) {
        std::vector<RunRecord> records(total);
        for (int i = 0; i < diverged; ++i) records[i].diverged = true;
        return records;
    };
    CHECK(divergence_rate(make(0, 20)) == 0.0);
    CHECK(divergence_rate(make(4, 11)) == doctest::Approx(4.0 / 11.0).epsilon(1e-15));
    CHECK(divergence_rate(make(20, 20)) == 1.0);
    CHECK_THROWS_AS(divergence_rate({}), Error);
}

TEST_CASE("imitator started at the expert anchors is a fixed point") {
    for (TrainMode mode : {TrainMode::kDe, TrainMode::kSt}) {
        ExperimentConfig config = testing::canonical_train_config(mode);
        config.iterations = 25;
        config.init.kind = InitKind::kFixed;
        for (int s = 0; s < 5; ++s)
            config.init.anchors.push_back(config.mdp.action_point(4));

        const RunRecord record = run_gail(config, 3);
        CHECK_FALSE(record.diverged);
        for (const TraceRow& row : record.trace) CHECK(row.js < 1e-6);
        CHECK(record.converged_at == 0);
    }
}

TEST_CASE("runs are deterministic given config and seed") {
    ExperimentConfig config = testing::canonical_train_config(TrainMode::kDe);
    config.iterations = 20;
    const RunRecord a = run_gail(config, 7);
    const RunRecord b = run_gail(config, 7);

    REQUIRE(a.trace.size() == b.trace.size());
    CHECK(a.diverged == b.diverged);
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].grad_norm == b.trace[i].grad_norm);
        CHECK(a.trace[i].js == b.trace[i].js);
        CHECK(a.trace[i].p_expert == b.trace[i].p_expert);
    }
}

TEST_CASE("early stop on divergence is sticky under more iterations") {
    ExperimentConfig config = testing::canonical_train_config(TrainMode::kDe);
    config.init.levels = {0.0};  // the level the anneal cannot rescue
    const RunRecord short_run = run_gail(config, 5);
    REQUIRE(short_run.diverged);

    ExperimentConfig longer = config;
    longer.iterations *= 2;
    const RunRecord long_run = run_gail(longer, 5);
    CHECK(long_run.diverged);
    CHECK(long_run.diverged_at == short_run.diverged_at);
    CHECK(long_run.trace.size() == short_run.trace.size());
}

TEST_CASE("single-seed sweep summary mirrors the record") {
    ExperimentConfig config = testing::canonical_train_config(TrainMode::kSt);
    config.iterations = 40;
    config.seeds = {7};
    const SweepResult result = run_sweep(config);
    REQUIRE(result.records.size() == 1);
    const RunRecord& record = result.records.front();

    CHECK(result.summary.n_runs == 1);
    CHECK(result.summary.divergence_rate == (record.diverged ? 1.0 : 0.0));
    REQUIRE(result.summary.final_js_quartiles.has_value());
    CHECK((*result.summary.final_js_quartiles)[1] == record.final_js);
    if (!record.diverged && record.final_js < config.convergence_tol) {
        REQUIRE(result.summary.median_iterations_to_convergence.has_value());
        CHECK(*result.summary.median_iterations_to_convergence ==
              static_cast<double>(*record.converged_at));
    }
}

TEST_CASE("sweeps are reproducible") {
    ExperimentConfig config = testing::canonical_train_config(TrainMode::kDe);
    config.iterations = 20;
    config.seeds = {1, 2, 3, 4};
    const SweepResult a = run_sweep(config);
    const SweepResult b = run_sweep(config);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].final_js == b.records[i].final_js);
        CHECK(a.records[i].diverged == b.records[i].diverged);
    }
    CHECK(a.summary.divergence_rate == b.summary.divergence_rate);
}

TEST_CASE("credo filter keeps every update below the clip threshold") {
    ExperimentConfig config = testing::canonical_train_config(TrainMode::kDe);
    config.credo = CredoConfig{5.0, CredoVariant::kFilter};
    config.init.levels = {0.0};
    const RunRecord record = run_gail(config, 11);
    CHECK_FALSE(record.diverged);
    // Once the disparate pairs are clipped away the trace must stay finite.
    for (const TraceRow& row : record.trace) CHECK(std::isfinite(row.grad_norm));
}

TEST_CASE("saturate variant caps the reward but not the score factor") {
    ExperimentConfig plain = testing::canonical_train_config(TrainMode::kDe);
    plain.init.levels = {0.0};
    ExperimentConfig saturate = plain;
    saturate.credo = CredoConfig{5.0, CredoVariant::kSaturate};

    const RunRecord bare = run_gail(plain, 11);
    const RunRecord capped = run_gail(saturate, 11);
    for (const TraceRow& row : capped.trace) {
        CHECK(std::isfinite(row.grad_norm));
        CHECK(row.credo_dropped == 0);  // saturate caps, never drops
    }
    // Capping the log-discrepancy slows the diagnostic's growth, but the
    // score factor still scales with the inverse covariance, so the capped
    // run can only outlast the bare one; dropping the pairs is what removes
    // the blow-up entirely.
    REQUIRE(bare.diverged);
    if (capped.diverged) CHECK(*capped.diverged_at > *bare.diverged_at);
}

TEST_CASE("empirical discriminator mode runs deterministically") {
    ExperimentConfig config = testing::canonical_train_config(TrainMode::kDe);
    config.disc_kind = DiscriminatorKind::kEmpirical;
    config.smoothing = 0.5;
    config.iterations = 15;
    config.batch_size = 64;

    const RunRecord a = run_gail(config, 9);
    const RunRecord b = run_gail(config, 9);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].grad_norm == b.trace[i].grad_norm);
        CHECK(a.trace[i].p_expert == b.trace[i].p_expert);
        CHECK(a.trace[i].p_expert > 0.0);
        CHECK(a.trace[i].p_expert < 1.0);  // smoothing keeps the estimate interior
    }
}

TEST_CASE("config validation names the offending key") {
    ExperimentConfig config = testing::canonical_train_config(TrainMode::kDe);
    config.decay = 1.5;
    try {
        config.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.key == "decay");
    }

    ExperimentConfig bad_seeds = testing::canonical_train_config(TrainMode::kSt);
    bad_seeds.seeds.clear();
    CHECK_THROWS_AS(bad_seeds.validate(), ValidationError);
}
