#include "support.hpp"

#include "tlnet/transfer.hpp"

#include <doctest.h>

#include <set>

using namespace tlnet;
using namespace tlnet::testing;

namespace {

DeepONetModel model_for(const Equation& eq, Index q, std::uint64_t seed) {
    DeepONetOptions o;
    o.p = 12;
    o.q = q;
    o.width = 16;
    o.depth = 3;
    o.boundary = boundary_mode_for(eq.grid.boundary);
    return make_deeponet(o, SensorGrid::from_grid(eq.grid), seed);
}

// Dense oracle: step residual at the chosen rows as an explicit function of
// w, built from the full basis matrix and the full spatial operator.
Vec residual_oracle(const DeepONetModel& m, const Equation& eq, const PropagatorConfig& cfg,
                    const Vec& f, const Vec& w, const std::vector<Index>& rows) {
    const Vec g = basis_grid(m, f) * w;
    const Vec r = residual(eq, cfg, g, f);
    Vec out(Index(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) out[Index(k)] = r[rows[k]];
    return out;
}

} // namespace

TEST_CASE("sensor subsampling") {
    const auto s = subsample_sensors(64, 32);
    CHECK(s.size() == 32);
    for (Index i = 0; i < 32; ++i) CHECK(s[std::size_t(i)] == 2 * i);
    CHECK(subsample_sensors(10, 3) == std::vector<Index>{0, 3, 6});
    const auto r = subsample_sensors(50, 20, SubsampleMode::Random, 4);
    CHECK(std::set<Index>(r.begin(), r.end()).size() == 20);
    CHECK(std::is_sorted(r.begin(), r.end()));
    CHECK(r.back() < 50);
    CHECK(r == subsample_sensors(50, 20, SubsampleMode::Random, 4));
    CHECK(r != subsample_sensors(50, 20, SubsampleMode::Random, 5));
    CHECK_THROWS_AS(subsample_sensors(10, 11), std::invalid_argument);
    CHECK_THROWS_AS(subsample_sensors(10, 0), std::invalid_argument);
}

TEST_CASE("least squares drops small singular values") {
    // exact rank-deficient system: minimum-norm solution
    Mat a(3, 2);
    a << 1, 1, 1, 1, 1, 1;
    const Vec b = Vec::Constant(3, 2.0);
    const auto r = lstsq(a, b, 1e-6);
    CHECK(r.rank == 1);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-12));

    const Mat full = random_matrix(8, 3, 1);
    const Vec x = random_vector(3, 2);
    const auto s = lstsq(full, full * x, 1e-10);
    CHECK(s.rank == 3);
    CHECK((s.x - x).norm() < 1e-12);
    // normal equations hold for an inconsistent right side
    const Vec rhs = random_vector(8, 3);
    const auto t = lstsq(full, rhs, 1e-10);
    CHECK((full.transpose() * (full * t.x - rhs)).norm() < 1e-12);

    CHECK_THROWS_AS(lstsq(Mat::Zero(3, 2), b, 1e-6), DegenerateBasisError);
    Mat nan = full;
    nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(lstsq(nan, rhs, 1e-6), NumericError);
}

TEST_CASE("linear system matches the dense residual and recovers planted weights") {
    for (auto boundary : {0, 1})
        for (auto scheme : {Scheme::BackwardEuler, Scheme::CrankNicolson}) {
            const Grid g = boundary ? Grid::periodic(32) : Grid::dirichlet(32);
            const auto eq = Equation::reaction_diffusion(1e-2, 0.0, g);
            const PropagatorConfig cfg{0.05, scheme};
            const auto m = model_for(eq, 6, 3);
            TLConfig tl;
            tl.n_c = 16;
            const TransferLearner learner(m, eq, cfg, tl);
            const Vec f = random_vector(32, 4, 0.5);
            const auto [a, b] = learner.assemble_linear(f);
            const Vec w = random_vector(6, 5);
            CHECK((a * w - b - residual_oracle(m, eq, cfg, f, w, learner.rows())).norm() < 1e-10);

            const auto sol = lstsq(a, a * w, 1e-12);
            CHECK((sol.x - w).squaredNorm() / 6.0 < 1e-16);

            const auto up = learner.update_linear(f);
            CHECK((a.transpose() * (a * up.w - b)).norm() < 1e-8 * (1.0 + a.norm() * b.norm()));
            // random initial bases can be nearly dependent, so rank may drop below q
            CHECK(up.rank >= 1);
            CHECK(up.rank <= 6);
            const Mat phi = basis_grid(m, f);
            CHECK((learner.predict(f, up.w) - phi * up.w).norm() < 1e-13 * phi.norm() * up.w.norm());
        }
}

TEST_CASE("nonlinear residual Jacobian agrees with central differences") {
    const std::vector<Equation> eqs{Equation::reaction_diffusion(1e-2, 0.5, Grid::dirichlet(24)),
                                    Equation::allen_cahn(1e-3, 0.5, Grid::periodic(24)),
                                    Equation::cahn_hilliard(1e-4, 0.01, Grid::periodic(24))};
    for (const auto& eq : eqs) {
        const PropagatorConfig cfg{0.05, Scheme::CrankNicolson};
        const auto m = model_for(eq, 5, 8);
        TLConfig tl;
        tl.n_c = 8;
        const TransferLearner learner(m, eq, cfg, tl);
        const Vec f = random_vector(24, 1, 0.5);
        const Mat h = coefficient_matrix(m, branch_features(m, f).col(0));
        const Vec w = random_vector(5, 2);
        const auto [r, jac] = learner.residual_and_jacobian(h, f, w);
        CHECK((r - residual_oracle(m, eq, cfg, f, w, learner.rows())).norm() < 1e-10);
        for (Index j = 0; j < 5; ++j) {
            const Vec col = central_diff(
                [&](const Vec& x) { return learner.residual_and_jacobian(h, f, x).first[0]; }, w);
            CHECK(std::abs(col[j] - jac(0, j)) < 1e-6 * (1.0 + std::abs(jac(0, j))));
        }
        CHECK_THROWS_AS(learner.assemble_linear(f), std::invalid_argument);
    }
}

TEST_CASE("nonlinear refit does not raise the cost and auto dispatch follows linearity") {
    const auto eq = Equation::allen_cahn(1e-3, 1.0, Grid::periodic(32));
    const PropagatorConfig cfg{0.05, Scheme::BackwardEuler};
    const auto m = model_for(eq, 8, 11);
    TLConfig tl;
    tl.method = TLMethod::NonlinearLM;
    const TransferLearner learner(m, eq, cfg, tl);
    const Vec f = random_vector(32, 6, 0.5);
    const Vec r0 = residual_oracle(m, eq, cfg, f, m.w, learner.rows());
    const auto up = learner.update(f);
    CHECK(up.cost <= 0.5 * r0.squaredNorm());
    CHECK(up.cost == doctest::Approx(0.5 * residual_oracle(m, eq, cfg, f, up.w, learner.rows()).squaredNorm()).epsilon(1e-10));
    // stationarity of the least-squares cost
    const Mat h = coefficient_matrix(m, branch_features(m, f).col(0));
    const auto [r, jac] = learner.residual_and_jacobian(h, f, up.w);
    CHECK((jac.transpose() * r).norm() < 1e-3 * (1.0 + jac.norm() * r.norm()));

    // on a linear equation the nonlinear solver reaches the closed form
    const auto lin = Equation::reaction_diffusion(1e-2, 0.0, Grid::periodic(32));
    const auto ml = model_for(lin, 8, 11);
    tl.ftol = 1e-12;
    tl.xtol = 1e-12;
    const TransferLearner nl(ml, lin, cfg, tl);
    const auto exact = nl.update_linear(f);
    const auto iter = nl.update(f);
    CHECK(iter.cost <= exact.cost * (1.0 + 1e-6) + 1e-14);
}

TEST_CASE("transfer learning rejects unsupported setups") {
    const auto rte = Equation::radiative_transfer(1.0, Grid::phase_space(8, 4));
    DeepONetOptions o;
    o.p = 4;
    o.q = 2;
    o.width = 6;
    o.depth = 2;
    o.boundary = BoundaryMode::DirichletMask;
    o.velocity_input = true;
    const auto m = make_deeponet(o, SensorGrid::from_grid(rte.grid), 1);
    CHECK_THROWS_AS(TransferLearner(m, rte, PropagatorConfig{}, TLConfig{}), std::invalid_argument);

    const auto eq = Equation::reaction_diffusion(1e-2, 0.0, Grid::periodic(16));
    TLConfig tl;
    tl.n_c = 17;
    CHECK_THROWS_AS(TransferLearner(model_for(eq, 3, 1), eq, PropagatorConfig{}, tl), std::invalid_argument);
    tl.n_c = 8;
    tl.rcond = 0.0;
    CHECK_THROWS_AS(tl.validate(), std::invalid_argument);
    CHECK(tl_method_from_string(to_string(TLMethod::NonlinearLM)) == TLMethod::NonlinearLM);
}
