#include "support.hpp"

#include "tlnet/grf.hpp"
#include "tlnet/pde.hpp"

#include <doctest.h>

#include <numbers>
#include <set>

using namespace tlnet;
using namespace tlnet::testing;

TEST_CASE("kernels follow their closed forms") {
    const double l = 0.3;
    const Point a{0.1, -0.4}, b{0.65, 0.2};
    const double dx = a.x - b.x, dv = a.v - b.v;
    CHECK(kernel_eval({KernelKind::SqExp1D, l}, a, b) ==
          doctest::Approx(std::exp(-dx * dx / (2 * l * l))).epsilon(1e-15));
    const double s = std::sin(std::numbers::pi * dx);
    CHECK(kernel_eval({KernelKind::Periodic1D, l}, a, b) ==
          doctest::Approx(std::exp(-s * s / (2 * l * l))).epsilon(1e-15));
    CHECK(kernel_eval({KernelKind::PhaseSpace1D, l}, a, b) ==
          doctest::Approx(std::exp(-(dx * dx + dv * dv) / (2 * l * l))).epsilon(1e-15));
    for (auto k : {KernelKind::SqExp1D, KernelKind::Periodic1D, KernelKind::PhaseSpace1D}) {
        CHECK(kernel_eval({k, l}, a, a) == 1.0);
        CHECK(kernel_eval({k, l}, a, b) == kernel_eval({k, l}, b, a));
    }
    // periodic kernel has period one
    CHECK(kernel_eval({KernelKind::Periodic1D, l}, {0.1, 0}, {0.3, 0}) ==
          doctest::Approx(kernel_eval({KernelKind::Periodic1D, l}, {1.1, 0}, {0.3, 0})).epsilon(1e-14));
    CHECK_THROWS_AS((KernelSpec{KernelKind::SqExp1D, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("sensor grids enumerate x-major and validate ordering") {
    const auto g = SensorGrid::from_grid(Grid::phase_space(4, 2));
    REQUIRE(g.size() == 8);
    CHECK(g.points[1].x == g.points[0].x);
    CHECK(g.points[1].v > g.points[0].v);
    CHECK(g.points[2].x > g.points[1].x);
    g.validate();
    SensorGrid bad;
    bad.points = {{0.5, 0}, {0.2, 0}};
    CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("covariance factor reproduces the Gram matrix") {
    const auto grid = SensorGrid::from_grid(Grid::dirichlet(32));
    const Mat k = cov_matrix({KernelKind::SqExp1D, 0.2}, grid);
    CHECK((k - k.transpose()).norm() == 0.0);
    CHECK((k.diagonal().array() == 1.0).all());
    const auto f = factorize_covariance(k);
    CHECK(f.jitter >= 1e-10);
    CHECK(f.jitter <= 1e-6);
    const Mat diff = f.lower * f.lower.transpose() - k - f.jitter * Mat::Identity(32, 32);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f.lower.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() == 0.0);
}

TEST_CASE("indefinite covariance is rejected") {
    Mat k = Mat::Identity(3, 3);
    k(2, 2) = -1.0;
    CHECK_THROWS_AS(factorize_covariance(k), DegenerateKernelError);
}

TEST_CASE("sample rows do not depend on the requested count") {
    const auto grid = SensorGrid::from_grid(Grid::periodic(16));
    const auto f = factorize_covariance(cov_matrix({KernelKind::Periodic1D, 0.5}, grid));
    const Mat a = sample_gp(f, 3, 77);
    const Mat b = sample_gp(f, 6, 77);
    CHECK(a == b.topRows(3));
    CHECK(sample_gp(f, 3, 78) != a);
}

TEST_CASE("Monte Carlo covariance roughly matches the kernel") {
    const auto grid = SensorGrid::from_grid(Grid::periodic(16));
    const KernelSpec spec{KernelKind::Periodic1D, 0.5};
    const Mat x = sample_gp(spec, grid, 4000, 3);
    const Mat cov = (x.transpose() * x) / double(x.rows());
    const Mat k = cov_matrix(spec, grid);
    CHECK((cov - k).cwiseAbs().maxCoeff() < 0.1);
    CHECK(std::abs(x.mean()) < 0.05);
}

TEST_CASE("Dirichlet initial conditions vanish at both ends") {
    const auto eq = Equation::reaction_diffusion(1e-3, 1e-3, Grid::dirichlet(20));
    const Mat ics = sample_initial_conditions(eq, {KernelKind::SqExp1D, 0.2}, 5, 1);
    CHECK(ics.rows() == 5);
    CHECK(ics.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(ics.col(19).cwiseAbs().maxCoeff() == 0.0);
    const auto sensors = SensorGrid::from_grid(eq.grid);
    const Vec a = Vec::Constant(20, 2.0);
    const Vec f = make_ic_dirichlet(sensors, a);
    for (Index i = 0; i < 20; ++i) {
        const double x = sensors.points[i].x;
        CHECK(f[i] == doctest::Approx(2.0 * x * (1.0 - x)).epsilon(1e-15));
    }
}

TEST_CASE("phase-space initial conditions are positive and honor the inflow data") {
    const auto eq = Equation::radiative_transfer(1.0, Grid::phase_space(16, 8));
    const Mat ics = sample_initial_conditions(eq, {KernelKind::PhaseSpace1D, 1.0}, 3, 5);
    CHECK(ics.minCoeff() > 0.0);
    const Grid& g = eq.grid;
    for (Index r = 0; r < ics.rows(); ++r)
        for (Index m = 0; m < g.n_v; ++m) {
            if (g.v[m] > 0) CHECK(ics(r, m) == doctest::Approx(eq.inflow_left).epsilon(1e-14));
            if (g.v[m] < 0)
                CHECK(ics(r, (g.n_x - 1) * g.n_v + m) == doctest::Approx(eq.inflow_right).epsilon(1e-14));
        }
    Vec neg = Vec::Ones(g.size());
    neg[4] = -0.1;
    CHECK_FALSE(make_ic_rte(g, neg).has_value());
}

TEST_CASE("rejection sampling gives up after its draw budget") {
    // A tiny length scale makes every draw rough, so positive draws are
    // practically impossible on a large grid.
    const auto eq = Equation::radiative_transfer(1.0, Grid::phase_space(32, 8));
    CHECK_THROWS_AS(sample_initial_conditions(eq, {KernelKind::PhaseSpace1D, 0.01}, 2, 1), std::runtime_error);
}

TEST_CASE("training pool holds base draws and their propagator images") {
    const auto eq = Equation::reaction_diffusion(1e-3, 1e-3, Grid::dirichlet(24));
    PropagatorConfig cfg;
    cfg.dt = 0.05;
    TrainingSetOptions o;
    o.n_base = 4;
    o.n_passes = 3;
    o.pairs = 50;
    o.points_per_function = 6;
    o.seed = 9;
    const auto set = build_training_set(eq, cfg, {KernelKind::SqExp1D, 0.2}, o);
    REQUIRE(set.pool.functions.rows() == 12);
    const Propagator prop(eq, cfg);
    for (Index s = 0; s < 4; ++s)
        for (Index j = 1; j < 3; ++j) {
            const Vec prev = set.pool.functions.row(s * 3 + j - 1).transpose();
            const Vec next = set.pool.functions.row(s * 3 + j).transpose();
            CHECK((prop.step(prev) - next).norm() < 1e-12);
        }

    CHECK(set.pair_count() == 50);
    CHECK(set.function_ids.size() == 9); // ceil(50 / 6)
    std::set<Index> ids(set.function_ids.begin(), set.function_ids.end());
    CHECK(ids.size() == set.function_ids.size());
    for (const auto& pts : set.points) {
        CHECK(std::set<Index>(pts.begin(), pts.end()).size() == pts.size());
        CHECK(std::is_sorted(pts.begin(), pts.end()));
        CHECK(pts.front() >= 0);
        CHECK(pts.back() < 24);
    }
    CHECK(set.points.back().size() == 2);
    CHECK(set.inputs().cols() == 9);
    CHECK(set.inputs().col(0) == set.pool.functions.row(set.function_ids[0]).transpose());

    const auto again = build_training_set(eq, cfg, {KernelKind::SqExp1D, 0.2}, o);
    CHECK(again.pool.functions == set.pool.functions);
    CHECK(again.points == set.points);
    o.seed = 10;
    CHECK(build_training_set(eq, cfg, {KernelKind::SqExp1D, 0.2}, o).pool.functions != set.pool.functions);
}

TEST_CASE("collocation selection bounds") {
    TrainingSet set;
    set.pool.functions = Mat::Zero(3, 4);
    CHECK_THROWS_AS(select_collocation(set, 4, 13, 2, 0), std::invalid_argument);
    select_collocation(set, 4, 12, 2, 0); // every pair
    CHECK(set.pair_count() == 12);
    CHECK(set.function_ids.size() == 3);
}
