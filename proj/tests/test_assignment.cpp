#include "lfa/assignment.hpp"

#include "lfa/eval.hpp"
#include "lfa/synth.hpp"

#include "doctest.h"
#include "support.hpp"

using namespace lfa;

TEST_CASE("sinkhorn on a constant cost is uniform") {
    const SinkhornResult r = sinkhorn_from_cost(Matrix::Constant(6, 3, 0.7), SinkhornConfig{});
    CHECK((r.plan.data - Matrix::Constant(6, 3, 1.0 / 3.0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.plan.mode == AssignmentMode::soft);
    CHECK(r.col_residuals.size() == 100);
}

TEST_CASE("converged sinkhorn marginals on random instances") {
    Rng rng(51);
    for (int trial = 0; trial < 20; ++trial) {
        const Index c = 2 + static_cast<Index>(rng.below(8));
        const Index n = c * (2 + static_cast<Index>(rng.below(6)));
        const Matrix x = lfa::test::random_unit_rows(n, 6, rng);
        const auto y = PrototypeMatrix::from_raw(gaussian_matrix(c, 6, 1.0, rng));
        SinkhornConfig cfg;
        cfg.iters = 3000;
        const SinkhornResult r = sinkhorn_from_cost(cosine_cost(x, Matrix::Identity(6, 6), y), cfg);
        const Vector rows = r.plan.data.rowwise().sum();
        const RowVector cols = r.plan.data.colwise().sum();
        CHECK((rows.array() - 1.0).abs().maxCoeff() < 1e-6);
        CHECK((cols.array() - static_cast<double>(n) / static_cast<double>(c)).abs().maxCoeff() < 1e-3);
        CHECK(r.col_residuals.back() < 1e-3);
        for (std::size_t k = 1; k < r.col_residuals.size(); ++k) {
            CHECK(r.col_residuals[k] <= r.col_residuals[k - 1] + 1e-12);
        }
    }
}

TEST_CASE("default sinkhorn nearly balances clustered data") {
    SynthSpec spec;
    spec.rotation_scale = 0.7;
    spec.seed = 50;
    const auto data = synth_generate(spec);
    const SinkhornResult r = sinkhorn_from_cost(
        cosine_cost(data.train.features.data(), Matrix::Identity(32, 32), data.prototypes), SinkhornConfig{});
    // 100 sweeps at epsilon 0.05 leave columns within 2% of N / C here.
    CHECK(r.col_residuals.back() < 0.02 * 16.0);
    CHECK(r.col_residuals.back() < 0.1 * r.col_residuals.front());
    CHECK((r.plan.data.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("low-epsilon 2x2 plan concentrates on the optimal permutation") {
    Rng rng(52);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix cost(2, 2);
        for (Index i = 0; i < 2; ++i)
            for (Index j = 0; j < 2; ++j) cost(i, j) = rng.uniform();
        const double keep = cost(0, 0) + cost(1, 1);
        const double swap = cost(0, 1) + cost(1, 0);
        if (std::abs(keep - swap) < 0.05) continue;
        SinkhornConfig cfg;
        cfg.epsilon = 5e-3;
        cfg.iters = 2000;
        const AssignmentMatrix plan = sinkhorn_from_cost(cost, cfg).plan;
        const Matrix& p = plan.data;
        Matrix oracle = Matrix::Zero(2, 2);
        if (keep < swap) {
            oracle(0, 0) = oracle(1, 1) = 1.0;
        } else {
            oracle(0, 1) = oracle(1, 0) = 1.0;
        }
        CHECK(harden(plan).plan.data == oracle);
        CHECK((p - oracle).cwiseAbs().maxCoeff() < 1e-2);
    }
}

TEST_CASE("sinkhorn column weights and validation") {
    Rng rng(53);
    const Matrix x = lfa::test::random_unit_rows(12, 4, rng);
    const auto y = PrototypeMatrix::from_raw(gaussian_matrix(3, 4, 1.0, rng));
    SinkhornConfig cfg;
    cfg.col_weights = {1.0, 2.0, 3.0};
    const Matrix p = sinkhorn_from_cost(cosine_cost(x, Matrix::Identity(4, 4), y), cfg).plan.data;
    const RowVector cols = p.colwise().sum();
    CHECK(cols(0) == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(cols(2) == doctest::Approx(6.0).epsilon(1e-3));

    SinkhornConfig bad;
    bad.epsilon = 0.0;
    try {
        sinkhorn_from_cost(Matrix::Zero(2, 2), bad);
        FAIL("expected InvalidConfig");
    } catch (const Error& e) {
        CHECK(e.name() == "InvalidConfig");
    }
    bad = {};
    bad.col_weights = {1.0, -1.0};
    CHECK_THROWS_AS(sinkhorn_from_cost(Matrix::Zero(2, 2), bad), Error);
    Matrix nan_cost = Matrix::Zero(2, 2);
    nan_cost(0, 0) = std::nan("");
    try {
        sinkhorn_from_cost(nan_cost, SinkhornConfig{});
        FAIL("expected NonFiniteInput");
    } catch (const Error& e) {
        CHECK(e.name() == "NonFiniteInput");
    }
}

TEST_CASE("harden rules") {
    AssignmentMatrix p{Matrix(3, 2), AssignmentMode::soft};
    p.data << 0.7, 0.3, 0.5, 0.5, 0.0, 1.0;
    const Hardened h = harden(p);
    CHECK(h.labels == std::vector<int>{0, 0, 1});
    CHECK(h.plan.mode == AssignmentMode::hard);
    const auto one_hot = AssignmentMatrix::one_hot({1, 0, 2}, 3);
    CHECK(harden(one_hot).plan.data == one_hot.data);
}

TEST_CASE("entropy summaries") {
    CHECK(label_entropy({0, 0, 0}, 3) == 0.0);
    CHECK(label_entropy({0, 1, 2, 3}, 4) == doctest::Approx(std::log(4.0)));
    AssignmentMatrix u{Matrix::Constant(2, 4, 0.25), AssignmentMode::soft};
    CHECK(mean_row_entropy(u) == doctest::Approx(std::log(4.0)));
    CHECK(mean_row_entropy(AssignmentMatrix::one_hot({0, 1}, 2)) == 0.0);
}

namespace {

SynthData mild(std::uint64_t seed) {
    SynthSpec spec;
    spec.rotation_scale = 0.7;
    spec.seed = seed;
    return synth_generate(spec);
}

}  // namespace

TEST_CASE("ulfa with zero rounds is beta-Procrustes of the first Sinkhorn plan") {
    const auto data = mild(54);
    const auto& x = data.train.features;
    const UlfaResult r = ulfa(x, data.prototypes, 0, BetaParam{0.5}, RefineConfig{}, SinkhornConfig{});
    const AssignmentMatrix p = sinkhorn(x, LinearMap::identity(x.dim()), data.prototypes, SinkhornConfig{});
    const LinearMap expected =
        beta_procrustes(orthogonal_procrustes(x, p.data * data.prototypes.data()), BetaParam{0.5});
    CHECK(r.w.data == expected.data);
    CHECK(r.initial_plan.data == p.data);
}

TEST_CASE("ulfa recovers the labels of a mildly rotated problem and is deterministic") {
    const auto data = mild(6);
    RefineConfig cfg;
    cfg.seed = 6;
    const auto& x = data.train.features;
    const UlfaResult a = ulfa(x, data.prototypes, 1, BetaParam{0.5}, cfg, SinkhornConfig{});
    const UlfaResult b = ulfa(x, data.prototypes, 1, BetaParam{0.5}, cfg, SinkhornConfig{});
    CHECK(a.w.data == b.w.data);
    const double zero_shot =
        top1_accuracy(classify(x, LinearMap::identity(x.dim()), data.prototypes).predictions, data.train.labels);
    const double recovered = top1_accuracy(harden(a.final_plan).labels, data.train.labels);
    CHECK(recovered >= 0.9);
    CHECK(recovered > zero_shot);
    CHECK_THROWS_AS(ulfa(x, data.prototypes, -1, BetaParam{0.5}, cfg, SinkhornConfig{}), Error);
}
