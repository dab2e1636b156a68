#include "support.hpp"

#include "tlnet/experiment.hpp"

#include <doctest.h>

#include <fstream>

using namespace tlnet;
using namespace tlnet::testing;

namespace {

ExperimentConfig tiny_config(const std::string& eq) {
    auto c = default_config(eq);
    c.N_x = 16;
    c.N_b = 3;
    c.n_t = 3;
    c.M = 40;
    c.points_per_function = 5;
    c.p = 6;
    c.q = 4;
    c.width = 10;
    c.depth = 3;
    c.schedule.batch = 20;
    c.schedule.max_iters = 30;
    c.schedule.loss_tol = 1e-12;
    c.tl.n_c = 8;
    c.K = 5;
    c.N_e = 2;
    c.seed = 11;
    return c;
}

} // namespace

TEST_CASE("config JSON round trip and validation") {
    auto c = tiny_config("ac");
    c.schedule.lr0 = 2e-3;
    c.tl_method = "nonlinear_lm";
    c.scheme = Scheme::CrankNicolson;
    const auto j = to_json(c);
    const auto back = config_from_json(j, default_config("rd"));
    CHECK(to_json(back) == j);
    CHECK(back.scheme == Scheme::CrankNicolson);
    CHECK(back.schedule.lr0 == 2e-3);

    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"no_such_key", 1}}, c), FormatError);

    TempDir dir("config");
    {
        std::ofstream os(dir.file("c.json"));
        os << R"({"eq": "ch", "q": 9})";
    }
    const auto loaded = load_config(dir.file("c.json"));
    CHECK(loaded.eq == "ch");
    CHECK(loaded.q == 9);
    CHECK(loaded.kernel.kind == KernelKind::Periodic1D);
    CHECK(loaded.equation().grid.boundary == BoundaryTag::Periodic);
}

TEST_CASE("auto TL method follows linearity of the step") {
    auto c = tiny_config("rd");
    CHECK(c.tl_config().method == TLMethod::NonlinearLM);
    c.k = 0.0;
    CHECK(c.tl_config().method == TLMethod::LinearLstsq);
    c = tiny_config("ac");
    CHECK(c.tl_config().method == TLMethod::NonlinearLM);
}

TEST_CASE("dataset file round trip") {
    const auto c = tiny_config("rd");
    const auto set = generate_data(c);
    TempDir dir("dataset");
    save_dataset(dir.file("d.bin"), set, c);
    const auto back = load_dataset(dir.file("d.bin"));
    CHECK(back.pool.functions == set.pool.functions);
    CHECK(back.function_ids == set.function_ids);
    CHECK(back.points == set.points);

    std::string bytes = read_file(dir.file("d.bin"));
    {
        std::ofstream os(dir.file("t.bin"), std::ios::binary);
        os << bytes.substr(0, bytes.size() - 16);
    }
    CHECK_THROWS_AS(load_dataset(dir.file("t.bin")), FormatError);
    bytes[0] = 'Z';
    {
        std::ofstream os(dir.file("m.bin"), std::ios::binary);
        os << bytes;
    }
    CHECK_THROWS_AS(load_dataset(dir.file("m.bin")), FormatError);
}

TEST_CASE("trajectory file round trip") {
    const auto c = tiny_config("ac");
    const std::vector<Mat> t{random_matrix(16, 6, 1), random_matrix(16, 6, 2)};
    TempDir dir("traj");
    save_trajectories(dir.file("t.bin"), t, c);
    nlohmann::json header;
    const auto back = load_trajectories(dir.file("t.bin"), &header);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == t[0]);
    CHECK(back[1] == t[1]);
    CHECK(header.is_object());
}

TEST_CASE("test initial conditions are disjoint from the training draws") {
    const auto c = tiny_config("rd");
    const Mat ics = test_initial_conditions(c);
    CHECK(ics.rows() == 16);
    CHECK(ics.cols() == 2);
    const auto set = generate_data(c);
    for (Index s = 0; s < set.pool.functions.rows(); ++s)
        for (Index e = 0; e < 2; ++e) CHECK(set.pool.functions.row(s).transpose() != ics.col(e));
}

TEST_CASE("small pipeline writes its outputs deterministically") {
    for (const std::string eq : {"rd", "ac"}) {
        const auto c = tiny_config(eq);
        TempDir a("pipe_a"), b("pipe_b");
        const auto r1 = run_pipeline(c, a.path.string());
        const auto r2 = run_pipeline(c, b.path.string());
        REQUIRE(r1.transfer.has_value());
        CHECK(r1.vanilla.per_step.size() == 5);
        CHECK(r1.training.iterations == 30);
        for (const char* f : {"train_log.csv", "errors_vanilla.csv", "errors_tl.csv", "model.bin"})
            CHECK(read_file(a.file(f)) == read_file(b.file(f)));
        const auto summary = nlohmann::json::parse(read_file(a.file("summary.json")));
        CHECK(summary.contains("vanilla"));
        CHECK(summary["tl"]["updates"] == 10);
        CHECK(summary["train"]["iterations"] == 30);
        CHECK(r2.transfer->aggregate == r1.transfer->aggregate);
    }
    auto cont = tiny_config("rd");
    cont.loss = "cont";
    cont.time_nodes = 5;
    const auto r = run_pipeline(cont);
    CHECK_FALSE(r.transfer.has_value());
    CHECK(r.vanilla.per_step.size() == 5);
    CHECK_THROWS_AS(run_pipeline(tiny_config("rte")), std::invalid_argument);
}
