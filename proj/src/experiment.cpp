#include "tlnet/experiment.hpp"
#include "tlnet/binary_io.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

namespace tlnet {

namespace {

inline constexpr std::string_view kDatasetMagic = "TLNETDAT";
inline constexpr std::string_view kTrajectoryMagic = "TLNETTRJ";

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return is;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

void save_dataset(const std::string& path, const TrainingSet& set, const ExperimentConfig& cfg) {
    nlohmann::json h;
    h["config"] = to_json(cfg);
    h["n_base"] = set.pool.n_base;
    h["n_passes"] = set.pool.n_passes;
    h["seed"] = set.pool.seed;
    h["rows"] = set.pool.functions.rows();
    h["cols"] = set.pool.functions.cols();
    h["function_ids"] = set.function_ids;
    h["points"] = set.points;
    auto os = open_out(path);
    write_container(os, kDatasetMagic, h);
    BinaryWriter w(os);
    w.matrix(set.pool.functions);
    if (!os) throw FormatError("save_dataset: write failed");
}

TrainingSet load_dataset(const std::string& path) {
    auto is = open_in(path);
    const auto h = read_container_header(is, kDatasetMagic);
    TrainingSet set;
    try {
        set.pool.n_base = h.at("n_base").get<Index>();
        set.pool.n_passes = h.at("n_passes").get<Index>();
        set.pool.seed = h.at("seed").get<std::uint64_t>();
        const auto rows = h.at("rows").get<Index>();
        const auto cols = h.at("cols").get<Index>();
        set.function_ids = h.at("function_ids").get<std::vector<Index>>();
        set.points = h.at("points").get<std::vector<std::vector<Index>>>();
        BinaryReader r(is);
        set.pool.functions = r.matrix(rows, cols);
        if (set.function_ids.size() != set.points.size())
            throw FormatError("dataset: selection lists differ in length");
        for (std::size_t s = 0; s < set.function_ids.size(); ++s) {
            if (set.function_ids[s] < 0 || set.function_ids[s] >= rows)
                throw FormatError("dataset: function id out of range");
            for (Index i : set.points[s])
                if (i < 0 || i >= cols) throw FormatError("dataset: point index out of range");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset header: ") + e.what());
    }
    return set;
}

void save_trajectories(const std::string& path, const std::vector<Mat>& trajectories,
                       const ExperimentConfig& cfg) {
    require_shape(!trajectories.empty(), "save_trajectories: nothing to write");
    const Index n = trajectories.front().rows(), cols = trajectories.front().cols();
    for (const auto& t : trajectories)
        require_shape(t.rows() == n && t.cols() == cols, "save_trajectories: ragged ensemble");
    nlohmann::json h;
    h["eq"] = cfg.eq;
    h["d"] = cfg.d;
    h["k"] = cfg.k;
    h["d1"] = cfg.d1;
    h["d2"] = cfg.d2;
    h["eps"] = cfg.eps;
    h["N_x"] = cfg.N_x;
    h["N_v"] = cfg.N_v;
    h["boundary"] = to_string(cfg.equation().grid.boundary);
    h["dt"] = cfg.dt;
    h["scheme"] = to_string(cfg.scheme);
    h["members"] = trajectories.size();
    h["steps"] = cols - 1;
    h["state_length"] = n;
    auto os = open_out(path);
    write_container(os, kTrajectoryMagic, h);
    BinaryWriter w(os);
    for (const auto& t : trajectories) w.matrix(t.transpose()); // step-major
    if (!os) throw FormatError("save_trajectories: write failed");
}

std::vector<Mat> load_trajectories(const std::string& path, nlohmann::json* header) {
    auto is = open_in(path);
    const auto h = read_container_header(is, kTrajectoryMagic);
    std::vector<Mat> out;
    try {
        const auto members = h.at("members").get<Index>();
        const auto steps = h.at("steps").get<Index>();
        const auto n = h.at("state_length").get<Index>();
        if (members < 1 || steps < 0 || n < 1) throw FormatError("trajectory: corrupt header");
        BinaryReader r(is);
        for (Index e = 0; e < members; ++e) out.push_back(r.matrix(steps + 1, n).transpose());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("trajectory header: ") + e.what());
    }
    if (header) *header = h;
    return out;
}

TrainingSet generate_data(const ExperimentConfig& cfg) {
    PropagatorConfig p;
    p.dt = cfg.dt;
    p.scheme = cfg.scheme;
    return build_training_set(cfg.equation(), p, cfg.kernel, cfg.data_options());
}

DeepONetModel initial_model(const ExperimentConfig& cfg) {
    return make_deeponet(cfg.model_options(), SensorGrid::from_grid(cfg.equation().grid),
                         derive_seed(cfg.seed, 2));
}

ContModel initial_cont_model(const ExperimentConfig& cfg) {
    return make_cont_model(cfg.model_options(), SensorGrid::from_grid(cfg.equation().grid), cfg.t0,
                           derive_seed(cfg.seed, 2));
}

Mat test_initial_conditions(const ExperimentConfig& cfg) {
    return sample_initial_conditions(cfg.equation(), cfg.kernel, cfg.N_e, derive_seed(cfg.seed, 4))
        .transpose();
}

std::vector<Mat> reference_rollouts(const ExperimentConfig& cfg, const Mat& ics) {
    const auto rc = cfg.rollout_config();
    const Propagator prop(cfg.equation(), rc.propagator());
    std::vector<Mat> out;
    for (Index e = 0; e < ics.cols(); ++e)
        out.push_back(rollout([&](const Vec& f) { return prop.step(f); }, ics.col(e), rc.steps));
    return out;
}

std::vector<Mat> vanilla_rollouts(const ExperimentConfig& cfg, const DeepONetModel& model,
                                  const Mat& ics) {
    std::vector<Mat> out;
    for (Index e = 0; e < ics.cols(); ++e)
        out.push_back(rollout_vanilla(model, ics.col(e), cfg.rollout_config()));
    return out;
}

std::vector<Mat> cont_rollouts(const ExperimentConfig& cfg, const ContModel& model, const Mat& ics) {
    if (cfg.dt > model.t0) throw std::invalid_argument("cont_rollouts: dt exceeds t0");
    const auto pts = trunk_points(model.net, model.net.sensors.points, cfg.dt);
    std::vector<Mat> out;
    for (Index e = 0; e < ics.cols(); ++e)
        out.push_back(rollout([&](const Vec& f) -> Vec { return eval_points(model.net, f, pts).col(0); },
                              ics.col(e), cfg.K));
    return out;
}

TLRollouts tl_rollouts(const ExperimentConfig& cfg, const DeepONetModel& model, const Mat& ics) {
    const auto rc = cfg.rollout_config();
    const TransferLearner learner(model, cfg.equation(), rc.propagator(), cfg.tl_config());
    TLRollouts out;
    for (Index e = 0; e < ics.cols(); ++e) {
        auto r = rollout_tl(learner, ics.col(e), rc);
        out.updates += Index(r.update_steps.size());
        out.failures += Index(r.failed_steps.size());
        out.trajectories.push_back(std::move(r.trajectory));
    }
    return out;
}

nlohmann::json summary_json(const ErrorReport& report, double runtime_seconds,
                            const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["aggregate"] = report.aggregate;
    j["final_step"] = report.per_step.empty() ? 0.0 : report.per_step.back();
    j["ensemble"] = report.ensemble;
    j["horizon"] = report.horizon;
    j["runtime_seconds"] = runtime_seconds;
    j["config"] = to_json(cfg);
    return j;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir,
                            const std::function<void(const TrainLogEntry&)>& progress) {
    cfg.validate();
    if (cfg.eq == "rte")
        throw std::invalid_argument("run_pipeline: training is implemented for rd, ac and ch");
    PipelineResult res;
    const auto eq = cfg.equation();
    TrainOptions opts;
    opts.schedule = cfg.schedule;
    opts.on_record = progress;

    auto start = std::chrono::steady_clock::now();
    const TrainingSet data = generate_data(cfg);
    const Mat ics = test_initial_conditions(cfg);
    std::optional<ContModel> cont;
    if (cfg.loss == "cont") {
        auto r = train(initial_cont_model(cfg), eq, cfg.loss_spec(), data, opts, derive_seed(cfg.seed, 3));
        res.training.model = r.model.net;
        res.training.history = std::move(r.history);
        res.training.iterations = r.iterations;
        res.training.converged = r.converged;
        cont = std::move(r.model);
    } else {
        res.training = train(initial_model(cfg), eq, cfg.loss_spec(), data, opts, derive_seed(cfg.seed, 3));
    }
    res.train_seconds = seconds_since(start);

    start = std::chrono::steady_clock::now();
    const auto ref = reference_rollouts(cfg, ics);
    const auto vanilla = cont ? cont_rollouts(cfg, *cont, ics) : vanilla_rollouts(cfg, res.training.model, ics);
    res.vanilla = make_error_report(vanilla, ref, cfg.dt);
    if (!cont) {
        auto tl = tl_rollouts(cfg, res.training.model, ics);
        res.transfer = make_error_report(tl.trajectories, ref, cfg.dt);
        res.tl_updates = tl.updates;
        res.tl_failures = tl.failures;
    }
    res.rollout_seconds = seconds_since(start);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path dir(out_dir);
        {
            auto os = open_out((dir / "train_log.csv").string());
            write_train_log(os, res.training.history);
        }
        {
            auto os = open_out((dir / "errors_vanilla.csv").string());
            write_error_csv(os, res.vanilla);
        }
        if (res.transfer) {
            auto os = open_out((dir / "errors_tl.csv").string());
            write_error_csv(os, *res.transfer);
        }
        save_model((dir / "model.bin").string(), res.training.model, cont ? cont->t0 : 0.0);
        nlohmann::json summary;
        summary["vanilla"] = summary_json(res.vanilla, res.rollout_seconds, cfg);
        if (res.transfer) {
            summary["tl"] = summary_json(*res.transfer, res.rollout_seconds, cfg);
            summary["tl"]["updates"] = res.tl_updates;
            summary["tl"]["failures"] = res.tl_failures;
        }
        summary["train"] = {{"iterations", res.training.iterations},
                            {"converged", res.training.converged},
                            {"final_loss", res.training.history.back().loss},
                            {"runtime_seconds", res.train_seconds}};
        auto os = open_out((dir / "summary.json").string());
        os << summary.dump(2) << '\n';
    }
    return res;
}

} // namespace tlnet
