#include "support.hpp"

#include "tlnet/rollout.hpp"

#include <doctest.h>

#include <sstream>

using namespace tlnet;
using namespace tlnet::testing;

namespace {

DeepONetModel heat_model(const Equation& eq, std::uint64_t seed) {
    DeepONetOptions o;
    o.p = 8;
    o.q = 4;
    o.width = 12;
    o.depth = 3;
    o.boundary = boundary_mode_for(eq.grid.boundary);
    return make_deeponet(o, SensorGrid::from_grid(eq.grid), seed);
}

} // namespace

TEST_CASE("rollout applies the step function and checks every state") {
    const Vec f0 = (Vec(2) << 1.0, -0.5).finished();
    const Mat t = rollout([](const Vec& f) -> Vec { return 2.0 * f; }, f0, 4);
    REQUIRE(t.cols() == 5);
    for (Index n = 0; n <= 4; ++n) CHECK((t.col(n) - std::pow(2.0, double(n)) * f0).norm() == 0.0);

    try {
        rollout([](const Vec& f) -> Vec { return f * 1e300; }, f0, 5);
        FAIL("expected BlowupError");
    } catch (const BlowupError& e) {
        CHECK(e.step == 2);
    }
    CHECK_THROWS_AS(rollout([](const Vec& f) -> Vec { return f; }, f0, 0), std::invalid_argument);
    CHECK_THROWS_AS(rollout([](const Vec&) -> Vec { return Vec::Zero(3); }, f0, 1), ShapeError);
}

TEST_CASE("reference rollout repeats the propagator") {
    const auto eq = Equation::allen_cahn(1e-3, 0.1, Grid::periodic(16));
    RolloutConfig cfg;
    cfg.steps = 5;
    cfg.scheme = Scheme::CrankNicolson;
    const Vec f0 = random_vector(16, 2, 0.5);
    const Mat t = rollout_reference(eq, f0, cfg);
    Vec f = f0;
    for (Index n = 1; n <= 5; ++n) {
        f = cn_step(eq, cfg.propagator(), f);
        CHECK((t.col(n) - f).norm() < 1e-12);
    }
}

TEST_CASE("vanilla rollout feeds the network its own output") {
    const auto eq = Equation::reaction_diffusion(1e-2, 0.0, Grid::dirichlet(16));
    const auto m = heat_model(eq, 1);
    RolloutConfig cfg;
    cfg.steps = 3;
    const Vec f0 = random_vector(16, 3, 0.5);
    const Mat t = rollout_vanilla(m, f0, cfg);
    Vec f = f0;
    for (Index n = 1; n <= 3; ++n) {
        f = eval_grid(m, f);
        CHECK((t.col(n) - f).norm() < 1e-12 * (1.0 + f.norm()));
    }
    auto zero = m;
    zero.w.setZero();
    CHECK(rollout_vanilla(zero, f0, cfg).rightCols(3).norm() == 0.0);
}

TEST_CASE("transfer-learning rollout schedule") {
    const auto eq = Equation::reaction_diffusion(1e-2, 0.0, Grid::periodic(16));
    const auto m = heat_model(eq, 2);
    TLConfig tl;
    tl.n_c = 8;
    RolloutConfig cfg;
    cfg.steps = 6;
    cfg.tl = true;
    const Vec f0 = random_vector(16, 4, 0.5);

    cfg.tl_every = 7; // never refits within K steps
    const auto none = rollout_tl(m, eq, f0, cfg, tl);
    CHECK(none.weights.empty());
    CHECK((none.trajectory - rollout_vanilla(m, f0, cfg)).norm() < 1e-12);

    cfg.tl_every = 2;
    const auto some = rollout_tl(m, eq, f0, cfg, tl);
    CHECK(some.update_steps == std::vector<Index>{1, 3, 5});
    CHECK(some.weights.size() == 3);
    CHECK(some.failed_steps.empty());

    cfg.tl_every = 1;
    const auto every = rollout_tl(m, eq, f0, cfg, tl);
    REQUIRE(every.weights.size() == 6);
    // each step uses the closed-form refit against the current state
    const TransferLearner learner(m, eq, cfg.propagator(), tl);
    for (Index n = 0; n < 6; ++n) {
        const Vec w = learner.update_linear(every.trajectory.col(n)).w;
        CHECK((every.weights[std::size_t(n)] - w).norm() < 1e-10 * (1.0 + w.norm()));
        CHECK((every.trajectory.col(n + 1) - learner.predict(every.trajectory.col(n), w)).norm() <
              1e-10 * (1.0 + every.trajectory.col(n + 1).norm()));
    }
}

TEST_CASE("error metrics follow their definitions") {
    const Mat r1 = random_matrix(5, 4, 1), r2 = random_matrix(5, 4, 2);
    const Mat p1 = random_matrix(5, 4, 3), p2 = random_matrix(5, 4, 4);
    const std::vector<Mat> pred{p1, p2}, ref{r1, r2};
    for (Index k = 0; k < 4; ++k) {
        const double e = 0.5 * ((p1.col(k) - r1.col(k)).norm() / r1.col(k).norm() +
                                (p2.col(k) - r2.col(k)).norm() / r2.col(k).norm());
        CHECK(rel_err_step(pred, ref, k) == doctest::Approx(e).epsilon(1e-14));
    }
    double num = 0.0, den = 0.0;
    for (Index n = 1; n <= 3; ++n) {
        num += (p1.col(n) - r1.col(n)).squaredNorm() + (p2.col(n) - r2.col(n)).squaredNorm();
        den += r1.col(n).squaredNorm() + r2.col(n).squaredNorm();
    }
    CHECK(rel_err_agg(pred, ref, 3) == doctest::Approx(std::sqrt(num / den)).epsilon(1e-14));
    CHECK(rel_err_step(ref, ref, 2) == 0.0);

    // invariant under a common rescaling of prediction and reference
    const std::vector<Mat> sp{7.0 * p1, 7.0 * p2}, sr{7.0 * r1, 7.0 * r2};
    CHECK(rel_err_agg(sp, sr, 3) == doctest::Approx(rel_err_agg(pred, ref, 3)).epsilon(1e-13));
    CHECK(rel_err_step(sp, sr, 1) == doctest::Approx(rel_err_step(pred, ref, 1)).epsilon(1e-13));

    Mat z = r1;
    z.col(2).setZero();
    CHECK_THROWS_AS(rel_err_step(pred, std::vector<Mat>{z, r2}, 2), UndefinedError);
    CHECK_THROWS_AS(rel_err_agg(pred, std::vector<Mat>{Mat::Zero(5, 4), Mat::Zero(5, 4)}, 3), UndefinedError);
    CHECK_THROWS_AS(rel_err_step(pred, std::vector<Mat>{r1}, 1), ShapeError);
}

TEST_CASE("error report and CSV layout") {
    const Mat r = random_matrix(3, 4, 1), p = random_matrix(3, 4, 2);
    const auto rep = make_error_report({p}, {r}, 0.05);
    CHECK(rep.per_step.size() == 3);
    CHECK(rep.horizon == doctest::Approx(0.15));
    std::ostringstream os;
    write_error_csv(os, rep);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "step,t,rel_err");
    std::getline(is, line);
    CHECK(line == "1,0.05," + format_double(rep.per_step[0]));
    CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
    CHECK(format_double(0.25) == "0.25");
}
