// tlnet: data generation, training, rollouts and numerical studies.

#include "tlnet/binary_io.hpp"
#include "tlnet/experiment.hpp"
#include "tlnet/studies.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace tlnet;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
};

// Optional overrides shared by the pipeline subcommands. Unset flags leave
// the config value alone.
struct Overrides {
    std::optional<std::string> eq, scheme, loss;
    std::optional<Index> p, q, width, depth, M, max_iters, K, tl_every, N_e, N_x, N_c;
    std::optional<double> tol, dt;

    void attach(CLI::App* app, bool training) {
        app->add_option("--eq", eq, "equation: rd, ac, ch, rte");
        app->add_option("--scheme", scheme, "backward_euler (be) or crank_nicolson (cn)");
        app->add_option("--dt", dt, "time step");
        app->add_option("--N-x", N_x, "spatial grid size");
        if (training) {
            app->add_option("--loss", loss, "step or cont")->check(CLI::IsMember({"step", "cont"}));
            app->add_option("--p", p, "trunk feature count");
            app->add_option("--q", q, "last-layer width (TL dimension)");
            app->add_option("--width", width, "hidden width");
            app->add_option("--depth", depth, "hidden depth");
            app->add_option("--M", M, "collocation pairs");
            app->add_option("--max-iters", max_iters, "Adam iteration cap");
            app->add_option("--tol", tol, "stop when the full-set loss falls below this");
        } else {
            app->add_option("--K", K, "rollout steps");
            app->add_option("--tl-every", tl_every, "refit w every this many steps");
            app->add_option("--N-e", N_e, "test initial conditions");
            app->add_option("--N-c", N_c, "TL collocation rows");
        }
    }

    void apply(ExperimentConfig& c) const {
        if (scheme) c.scheme = scheme_from_string(*scheme);
        if (dt) c.dt = *dt;
        if (N_x) c.N_x = *N_x;
        if (loss) c.loss = *loss;
        if (p) c.p = *p;
        if (q) c.q = *q;
        if (width) c.width = *width;
        if (depth) c.depth = *depth;
        if (M) c.M = *M;
        if (max_iters) c.schedule.max_iters = *max_iters;
        if (tol) c.schedule.loss_tol = *tol;
        if (K) c.K = *K;
        if (tl_every) c.tl_every = *tl_every;
        if (N_e) c.N_e = *N_e;
        if (N_c) c.tl.n_c = *N_c;
    }
};

ExperimentConfig resolve_config(const Globals& g, const Overrides& o) {
    nlohmann::json file = nlohmann::json::object();
    if (!g.config.empty()) {
        std::ifstream is(g.config);
        if (!is) throw FormatError("cannot open config " + g.config);
        try {
            file = nlohmann::json::parse(is);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("config " + g.config + ": " + e.what());
        }
    }
    std::string eq = "rd";
    if (o.eq)
        eq = *o.eq;
    else if (file.is_object() && file.contains("eq"))
        eq = file["eq"].get<std::string>();
    auto cfg = config_from_json(file, default_config(eq));
    cfg.eq = to_string(equation_from_string(eq));
    o.apply(cfg);
    if (g.seed) cfg.seed = *g.seed;
    cfg.validate();
    return cfg;
}

fs::path out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / name;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw FormatError("cannot open " + p.string() + " for writing");
    return os;
}

void write_json(const fs::path& p, const nlohmann::json& j) {
    auto os = open_out(p);
    os << j.dump(2) << '\n';
}

double elapsed(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

void print_progress(const TrainLogEntry& e) {
    std::fprintf(stderr, "iter %lld  lr %.3e  loss %.6e\n", static_cast<long long>(e.iter), e.lr, e.loss);
}

int cmd_gen_data(const Globals& g, const Overrides& o) {
    const auto cfg = resolve_config(g, o);
    if (cfg.eq == "rte") throw std::invalid_argument("gen-data: rte training data is not supported");
    const auto set = generate_data(cfg);
    const auto path = out_path(g, "dataset.bin");
    save_dataset(path.string(), set, cfg);
    std::cout << "wrote " << path.string() << " (" << set.pool.functions.rows() << " functions, "
              << set.pair_count() << " pairs)\n";
    return 0;
}

int cmd_train(const Globals& g, const Overrides& o, const std::string& data_path) {
    const auto cfg = resolve_config(g, o);
    if (cfg.eq == "rte") throw std::invalid_argument("train: rte training is not supported");
    const auto start = std::chrono::steady_clock::now();
    const TrainingSet data = data_path.empty() ? generate_data(cfg) : load_dataset(data_path);
    TrainOptions opts;
    opts.schedule = cfg.schedule;
    opts.on_record = print_progress;
    const auto seed = derive_seed(cfg.seed, 3);
    std::vector<TrainLogEntry> history;
    std::int64_t iters = 0;
    bool converged = false;
    const auto model_path = out_path(g, "model.bin");
    if (cfg.loss == "cont") {
        auto r = train(initial_cont_model(cfg), cfg.equation(), cfg.loss_spec(), data, opts, seed);
        save_model(model_path.string(), r.model.net, r.model.t0);
        history = std::move(r.history);
        iters = r.iterations;
        converged = r.converged;
    } else {
        auto r = train(initial_model(cfg), cfg.equation(), cfg.loss_spec(), data, opts, seed);
        save_model(model_path.string(), r.model);
        history = std::move(r.history);
        iters = r.iterations;
        converged = r.converged;
    }
    {
        auto os = open_out(out_path(g, "train_log.csv"));
        write_train_log(os, history);
    }
    nlohmann::json summary = {{"iterations", iters},
                              {"converged", converged},
                              {"final_loss", history.back().loss},
                              {"runtime_seconds", elapsed(start)},
                              {"config", to_json(cfg)}};
    write_json(out_path(g, "train_summary.json"), summary);
    std::cout << "wrote " << model_path.string() << " after " << iters << " iterations, loss "
              << history.back().loss << '\n';
    return 0;
}

int cmd_rollout(const Globals& g, const Overrides& o, const std::string& kind,
                const std::string& model_path_in) {
    const auto cfg = resolve_config(g, o);
    const Mat ics = test_initial_conditions(cfg);
    const auto start = std::chrono::steady_clock::now();
    std::vector<Mat> traj;
    nlohmann::json info = {{"kind", kind}};
    if (kind == "reference") {
        if (cfg.eq == "rte") {
            const auto eq = cfg.equation();
            const RteStepper stepper(eq, cfg.dt);
            using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
            const Index nx = eq.grid.n_x, nv = eq.grid.n_v;
            // States are flattened x-major, matching the sensor order.
            const auto advance = [&](const Vec& f) -> Vec {
                const Mat dist = Eigen::Map<const RowMat>(f.data(), nx, nv);
                const RowMat next = stepper.step(RteState::from_distribution(eq.grid, eq.eps, dist))
                                        .distribution(eq.eps);
                return Eigen::Map<const Vec>(next.data(), next.size());
            };
            for (Index e = 0; e < ics.cols(); ++e) traj.push_back(rollout(advance, ics.col(e), cfg.K));
        } else {
            traj = reference_rollouts(cfg, ics);
        }
    } else {
        const auto model_path =
            model_path_in.empty() ? (fs::path(g.out_dir) / "model.bin").string() : model_path_in;
        double t0 = 0.0;
        const auto model = load_model(model_path, &t0);
        if (model.time_input) {
            if (kind == "tl") throw std::invalid_argument("rollout: TL needs a single-step model");
            traj = cont_rollouts(cfg, ContModel{model, t0}, ics);
        } else if (kind == "vanilla") {
            traj = vanilla_rollouts(cfg, model, ics);
        } else {
            auto r = tl_rollouts(cfg, model, ics);
            traj = std::move(r.trajectories);
            info["updates"] = r.updates;
            info["failures"] = r.failures;
        }
    }
    const auto path = out_path(g, "trajectories_" + kind + ".bin");
    save_trajectories(path.string(), traj, cfg);
    info["runtime_seconds"] = elapsed(start);
    std::cout << info.dump() << '\n';
    return 0;
}

int cmd_eval(const Globals& g, const std::string& pred_path, const std::string& ref_path,
             const std::string& name) {
    const auto start = std::chrono::steady_clock::now();
    nlohmann::json header;
    const auto ref = load_trajectories(ref_path, &header);
    const auto pred = load_trajectories(pred_path);
    const auto report = make_error_report(pred, ref, header.at("dt").get<double>());
    {
        auto os = open_out(out_path(g, "errors_" + name + ".csv"));
        write_error_csv(os, report);
    }
    nlohmann::json summary = {{"aggregate", report.aggregate},
                              {"final_step", report.per_step.back()},
                              {"ensemble", report.ensemble},
                              {"horizon", report.horizon},
                              {"runtime_seconds", elapsed(start)},
                              {"config", header}};
    write_json(out_path(g, "summary_" + name + ".json"), summary);
    std::cout << name << " aggregate relative error " << format_double(report.aggregate) << '\n';
    return 0;
}

int cmd_run(const Globals& g, const Overrides& o) {
    const auto cfg = resolve_config(g, o);
    const auto res = run_pipeline(cfg, g.out_dir, print_progress);
    std::cout << "vanilla aggregate " << format_double(res.vanilla.aggregate) << '\n';
    if (res.transfer) std::cout << "tl aggregate      " << format_double(res.transfer->aggregate) << '\n';
    return 0;
}

int cmd_bound_check(const Globals& g, BoundHarnessConfig bc) {
    if (g.seed) bc.seed = *g.seed;
    const auto start = std::chrono::steady_clock::now();
    const auto r = bound_check(bc);
    nlohmann::json j = {{"n", bc.n},
                        {"eta", bc.eta},
                        {"delta", bc.delta},
                        {"K", bc.steps},
                        {"trials", r.trials},
                        {"seed", bc.seed},
                        {"violations_general", r.violations_general},
                        {"violations_contracting", r.violations_contracting},
                        {"contracting_checked", r.contracting_checked},
                        {"max_ratio_general", r.max_ratio_general},
                        {"max_ratio_contracting", r.max_ratio_contracting},
                        {"max_observed", r.max_observed},
                        {"runtime_seconds", elapsed(start)}};
    write_json(out_path(g, "bound_check.json"), j);
    std::cout << j.dump(2) << '\n';
    return r.violations() == 0 ? 0 : 1;
}

int cmd_order_study(const Globals& g, const Overrides& o, std::vector<double> dts, double horizon) {
    auto cfg = resolve_config(g, o);
    const auto eq = cfg.equation();
    const Vec f0 = sample_initial_conditions(eq, cfg.kernel, 1, derive_seed(cfg.seed, 4)).row(0).transpose();
    const auto study = order_study(eq, cfg.scheme, dts, f0, horizon);
    {
        auto os = open_out(out_path(g, "order_study.csv"));
        os << "dt,error\n";
        for (std::size_t i = 0; i < study.dts.size(); ++i)
            os << format_double(study.dts[i]) << ',' << format_double(study.errors[i]) << '\n';
    }
    for (std::size_t i = 0; i < study.dts.size(); ++i)
        std::printf("dt %-8g error %.6e\n", study.dts[i], study.errors[i]);
    std::printf("slope %.4f\n", study.slope);
    return 0;
}

int cmd_dissipativity(const Globals& g, Index count, Index steps, double dt, double d) {
    const auto eq = Equation::reaction_diffusion(d, 0.0, Grid::periodic(64));
    const std::uint64_t seed = g.seed.value_or(0);
    const auto r = dissipativity_study(eq, {KernelKind::Periodic1D, 0.5}, count, steps, dt, seed);
    nlohmann::json j = {{"trajectories", r.trajectories},
                        {"violating", r.violating},
                        {"worst_increase", r.worst_increase},
                        {"steps", steps},
                        {"dt", dt},
                        {"d", d},
                        {"seed", seed}};
    write_json(out_path(g, "dissipativity.json"), j);
    std::cout << j.dump(2) << '\n';
    return r.violating == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Operator-network propagators with per-step transfer learning"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON config; keys are the experiment field names")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();

    Overrides gen_o, train_o, roll_o, run_o, study_o;

    auto* gen = app.add_subcommand("gen-data", "sample initial conditions and write dataset.bin");
    gen_o.attach(gen, true);

    auto* tr = app.add_subcommand("train", "train a model and write model.bin and train_log.csv");
    train_o.attach(tr, true);
    std::string data_path;
    tr->add_option("--data", data_path, "dataset from gen-data (default: generate in memory)")
        ->check(CLI::ExistingFile);

    auto* ro = app.add_subcommand("rollout", "roll test initial conditions forward");
    roll_o.attach(ro, false);
    bool reference = false, vanilla = false, tl = false;
    auto* f_ref = ro->add_flag("--reference", reference, "reference implicit solver");
    auto* f_van = ro->add_flag("--vanilla", vanilla, "trained model, fixed weights");
    auto* f_tl = ro->add_flag("--tl", tl, "trained model with per-step last-layer refits");
    f_ref->excludes(f_van)->excludes(f_tl);
    f_van->excludes(f_tl);
    std::string model_path;
    ro->add_option("--model", model_path, "checkpoint (default: <out-dir>/model.bin)");

    auto* ev = app.add_subcommand("eval", "relative errors of a rollout against a reference");
    std::string pred_path, ref_path, eval_name;
    ev->add_option("--pred", pred_path, "predicted trajectories")->required()->check(CLI::ExistingFile);
    ev->add_option("--ref", ref_path, "reference trajectories")->required()->check(CLI::ExistingFile);
    ev->add_option("--name", eval_name, "output suffix (default: stem of --pred)");

    auto* run = app.add_subcommand("run", "gen-data, train, rollouts and eval in one go");
    run_o.attach(run, true);
    run->add_option("--K", run_o.K, "rollout steps");
    run->add_option("--tl-every", run_o.tl_every, "refit w every this many steps");
    run->add_option("--N-e", run_o.N_e, "test initial conditions");

    auto* bc = app.add_subcommand("bound-check", "long-time error bound for perturbed linear maps");
    BoundHarnessConfig bcfg;
    bc->add_option("--n", bcfg.n, "state dimension")->capture_default_str();
    bc->add_option("--eta", bcfg.eta, "spectral norm of P")->capture_default_str();
    bc->add_option("--delta", bcfg.delta, "spectral norm of the perturbation")->capture_default_str();
    bc->add_option("--K", bcfg.steps, "steps")->capture_default_str();
    bc->add_option("--trials", bcfg.trials, "trials")->capture_default_str();
    bc->add_option("--probes", bcfg.probes, "random unit probes per trial")->capture_default_str();

    auto* cn = app.add_subcommand("cn-study", "temporal convergence order of the reference scheme");
    study_o.attach(cn, false);
    std::vector<double> dts{0.4, 0.2, 0.1, 0.05};
    double horizon = 4.0;
    cn->add_option("--dts", dts, "time steps")->capture_default_str();
    cn->add_option("--horizon", horizon, "final time")->capture_default_str();

    auto* di = app.add_subcommand("dissipativity", "L2 norm decay of periodic diffusion under BE");
    Index d_count = 100, d_steps = 200;
    double d_dt = 0.05, d_coef = 1e-3;
    di->add_option("--count", d_count, "trajectories")->capture_default_str();
    di->add_option("--steps", d_steps, "steps per trajectory")->capture_default_str();
    di->add_option("--dt", d_dt, "time step")->capture_default_str();
    di->add_option("--d", d_coef, "diffusion coefficient")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_gen_data(g, gen_o);
        if (*tr) return cmd_train(g, train_o, data_path);
        if (*ro) {
            if (!reference && !vanilla && !tl) throw CLI::RequiredError("--reference, --vanilla or --tl");
            return cmd_rollout(g, roll_o, reference ? "reference" : vanilla ? "vanilla" : "tl", model_path);
        }
        if (*ev) {
            if (eval_name.empty()) eval_name = fs::path(pred_path).stem().string();
            const std::string prefix = "trajectories_";
            if (eval_name.rfind(prefix, 0) == 0) eval_name = eval_name.substr(prefix.size());
            return cmd_eval(g, pred_path, ref_path, eval_name);
        }
        if (*run) return cmd_run(g, run_o);
        if (*bc) return cmd_bound_check(g, bcfg);
        if (*cn) {
            if (!study_o.scheme) study_o.scheme = "crank_nicolson";
            return cmd_order_study(g, study_o, dts, horizon);
        }
        if (*di) return cmd_dissipativity(g, d_count, d_steps, d_dt, d_coef);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
