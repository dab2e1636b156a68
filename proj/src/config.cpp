#include "tlnet/experiment.hpp"

#include <fstream>
#include <set>

namespace tlnet {

Equation ExperimentConfig::equation() const {
    const auto kind = equation_from_string(eq);
    switch (kind) {
    case EquationKind::ReactionDiffusion: return Equation::reaction_diffusion(d, k, Grid::dirichlet(N_x));
    case EquationKind::AllenCahn: return Equation::allen_cahn(d1, d2, Grid::periodic(N_x));
    case EquationKind::CahnHilliard: return Equation::cahn_hilliard(d1, d2, Grid::periodic(N_x));
    case EquationKind::RadiativeTransfer:
        return Equation::radiative_transfer(eps, Grid::phase_space(N_x, N_v));
    }
    throw std::invalid_argument("unknown equation " + eq);
}

LossSpec ExperimentConfig::loss_spec() const {
    LossSpec s;
    s.dt = dt;
    s.boundary_penalty = boundary_penalty;
    s.time_nodes = time_nodes;
    if (loss == "cont")
        s.mode = LossMode::Cont;
    else if (loss == "step")
        s.mode = scheme == Scheme::CrankNicolson ? LossMode::SingleStepCN : LossMode::SingleStepBE;
    else
        throw std::invalid_argument("loss must be \"step\" or \"cont\", got " + loss);
    return s;
}

RolloutConfig ExperimentConfig::rollout_config() const {
    RolloutConfig r;
    r.steps = K;
    r.dt = dt;
    r.scheme = scheme;
    r.tl_every = tl_every;
    return r;
}

TLConfig ExperimentConfig::tl_config() const {
    TLConfig t = tl;
    if (tl_method == "auto")
        t.method = equation().is_linear() ? TLMethod::LinearLstsq : TLMethod::NonlinearLM;
    else
        t.method = tl_method_from_string(tl_method);
    t.seed = derive_seed(seed, 5);
    return t;
}

DeepONetOptions ExperimentConfig::model_options() const {
    DeepONetOptions o;
    o.p = p;
    o.q = q;
    o.width = width;
    o.depth = depth;
    o.activation = activation;
    o.modified = modified;
    o.boundary = boundary_mode_for(equation().grid.boundary);
    return o;
}

TrainingSetOptions ExperimentConfig::data_options() const {
    TrainingSetOptions o;
    o.n_base = N_b;
    o.n_passes = n_t;
    o.pairs = M;
    o.points_per_function = points_per_function;
    o.seed = derive_seed(seed, 1);
    return o;
}

void ExperimentConfig::validate() const {
    equation().validate();
    kernel.validate();
    schedule.validate();
    tl.validate();
    (void)loss_spec();
    (void)tl_config();
    if (!(dt > 0.0)) throw std::invalid_argument("config: dt must be positive");
    if (N_b < 1 || n_t < 1 || M < 1 || points_per_function < 1)
        throw std::invalid_argument("config: N_b, n_t, M, points_per_function must be positive");
    if (p < 1 || q < 1 || width < 1 || depth < 1)
        throw std::invalid_argument("config: p, q, width, depth must be positive");
    if (K < 1 || tl_every < 1 || N_e < 1)
        throw std::invalid_argument("config: K, tl_every, N_e must be positive");
    if (loss == "cont" && (!(t0 >= dt) || time_nodes < 3))
        throw std::invalid_argument("config: continuous-time loss needs t0 >= dt and 3+ time nodes");
}

ExperimentConfig default_config(const std::string& eq) {
    ExperimentConfig c;
    c.eq = to_string(equation_from_string(eq));
    if (c.eq == "ac" || c.eq == "ch") c.kernel = {KernelKind::Periodic1D, 0.5};
    if (c.eq == "rte") {
        c.N_x = 32;
        c.N_v = 16;
        c.kernel = {KernelKind::PhaseSpace1D, 1.0};
    }
    return c;
}

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "eq", "d", "k", "d1", "d2", "eps", "N_x", "N_v", "dt", "scheme", "kernel", "length_scale",
        "N_b", "n_t", "M", "points_per_function", "p", "q", "width", "depth", "activation",
        "modified", "lr0", "decay", "decay_every", "batch", "max_iters", "loss_tol", "loss",
        "boundary_penalty", "time_nodes", "t0", "N_c", "tl_method", "rcond", "ftol", "xtol",
        "lm_max_iters", "subsample", "K", "tl_every", "N_e", "seed"};
    return keys;
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

} // namespace

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
    if (!j.is_object()) throw FormatError("config: top level must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!known_keys().count(key)) throw FormatError("config: unknown key \"" + key + "\"");
    try {
        read(j, "eq", c.eq);
        read(j, "d", c.d);
        read(j, "k", c.k);
        read(j, "d1", c.d1);
        read(j, "d2", c.d2);
        read(j, "eps", c.eps);
        read(j, "N_x", c.N_x);
        read(j, "N_v", c.N_v);
        read(j, "dt", c.dt);
        if (j.contains("scheme")) c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
        if (j.contains("kernel")) c.kernel.kind = kernel_from_string(j.at("kernel").get<std::string>());
        read(j, "length_scale", c.kernel.length_scale);
        read(j, "N_b", c.N_b);
        read(j, "n_t", c.n_t);
        read(j, "M", c.M);
        read(j, "points_per_function", c.points_per_function);
        read(j, "p", c.p);
        read(j, "q", c.q);
        read(j, "width", c.width);
        read(j, "depth", c.depth);
        if (j.contains("activation")) {
            const auto a = j.at("activation").get<std::string>();
            if (a != "tanh" && a != "sine") throw FormatError("config: activation must be tanh or sine");
            c.activation = a == "tanh" ? Activation::Tanh : Activation::Sine;
        }
        read(j, "modified", c.modified);
        read(j, "lr0", c.schedule.lr0);
        read(j, "decay", c.schedule.decay);
        read(j, "decay_every", c.schedule.decay_every);
        read(j, "batch", c.schedule.batch);
        read(j, "max_iters", c.schedule.max_iters);
        read(j, "loss_tol", c.schedule.loss_tol);
        read(j, "loss", c.loss);
        read(j, "boundary_penalty", c.boundary_penalty);
        read(j, "time_nodes", c.time_nodes);
        read(j, "t0", c.t0);
        read(j, "N_c", c.tl.n_c);
        read(j, "tl_method", c.tl_method);
        read(j, "rcond", c.tl.rcond);
        read(j, "ftol", c.tl.ftol);
        read(j, "xtol", c.tl.xtol);
        read(j, "lm_max_iters", c.tl.lm_max_iters);
        if (j.contains("subsample")) {
            const auto s = j.at("subsample").get<std::string>();
            if (s != "stride" && s != "random") throw FormatError("config: subsample must be stride or random");
            c.tl.subsample = s == "stride" ? SubsampleMode::Stride : SubsampleMode::Random;
        }
        read(j, "K", c.K);
        read(j, "tl_every", c.tl_every);
        read(j, "N_e", c.N_e);
        read(j, "seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("config " + path + ": " + e.what());
    }
    const std::string eq = j.is_object() && j.contains("eq") ? j["eq"].get<std::string>() : "rd";
    return config_from_json(j, default_config(eq));
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["eq"] = c.eq;
    j["d"] = c.d;
    j["k"] = c.k;
    j["d1"] = c.d1;
    j["d2"] = c.d2;
    j["eps"] = c.eps;
    j["N_x"] = c.N_x;
    j["N_v"] = c.N_v;
    j["dt"] = c.dt;
    j["scheme"] = to_string(c.scheme);
    j["kernel"] = to_string(c.kernel.kind);
    j["length_scale"] = c.kernel.length_scale;
    j["N_b"] = c.N_b;
    j["n_t"] = c.n_t;
    j["M"] = c.M;
    j["points_per_function"] = c.points_per_function;
    j["p"] = c.p;
    j["q"] = c.q;
    j["width"] = c.width;
    j["depth"] = c.depth;
    j["activation"] = c.activation == Activation::Tanh ? "tanh" : "sine";
    j["modified"] = c.modified;
    j["lr0"] = c.schedule.lr0;
    j["decay"] = c.schedule.decay;
    j["decay_every"] = c.schedule.decay_every;
    j["batch"] = c.schedule.batch;
    j["max_iters"] = c.schedule.max_iters;
    j["loss_tol"] = c.schedule.loss_tol;
    j["loss"] = c.loss;
    j["boundary_penalty"] = c.boundary_penalty;
    j["time_nodes"] = c.time_nodes;
    j["t0"] = c.t0;
    j["N_c"] = c.tl.n_c;
    j["tl_method"] = c.tl_method;
    j["rcond"] = c.tl.rcond;
    j["ftol"] = c.tl.ftol;
    j["xtol"] = c.tl.xtol;
    j["lm_max_iters"] = c.tl.lm_max_iters;
    j["subsample"] = c.tl.subsample == SubsampleMode::Stride ? "stride" : "random";
    j["K"] = c.K;
    j["tl_every"] = c.tl_every;
    j["N_e"] = c.N_e;
    j["seed"] = c.seed;
    return j;
}

} // namespace tlnet
