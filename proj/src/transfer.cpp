#include "tlnet/transfer.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tlnet {

std::string to_string(TLMethod m) {
    return m == TLMethod::LinearLstsq ? "linear_lstsq" : "nonlinear_lm";
}

TLMethod tl_method_from_string(const std::string& s) {
    if (s == "linear_lstsq" || s == "linear") return TLMethod::LinearLstsq;
    if (s == "nonlinear_lm" || s == "nonlinear") return TLMethod::NonlinearLM;
    throw std::invalid_argument("unknown TL method: " + s);
}

void TLConfig::validate() const {
    if (n_c < 1) throw std::invalid_argument("TLConfig: N_c must be at least 1");
    if (!(rcond > 0.0 && rcond < 1.0) || !(ftol > 0.0) || !(xtol > 0.0) || lm_max_iters < 1)
        throw std::invalid_argument("TLConfig: invalid tolerances");
}

std::vector<Index> subsample_sensors(Index n_p, Index n_c, SubsampleMode mode, std::uint64_t seed) {
    if (n_c < 1 || n_c > n_p)
        throw std::invalid_argument("subsample_sensors: need 1 <= N_c <= N_p (N_c = " +
                                    std::to_string(n_c) + ", N_p = " + std::to_string(n_p) + ")");
    std::vector<Index> out(static_cast<std::size_t>(n_c));
    if (mode == SubsampleMode::Stride) {
        for (Index i = 0; i < n_c; ++i) out[std::size_t(i)] = i * n_p / n_c;
        return out;
    }
    std::vector<Index> all(static_cast<std::size_t>(n_p));
    std::iota(all.begin(), all.end(), Index(0));
    std::mt19937_64 rng(derive_seed(seed, 0x5AB5));
    for (Index i = 0; i < n_c; ++i) {
        std::uniform_int_distribution<Index> pick(i, n_p - 1);
        std::swap(all[std::size_t(i)], all[std::size_t(pick(rng))]);
    }
    std::copy(all.begin(), all.begin() + n_c, out.begin());
    std::sort(out.begin(), out.end());
    return out;
}

LstsqResult lstsq(const Mat& a, const Vec& b, double rcond) {
    require_shape(a.rows() == b.size(), "lstsq: row mismatch");
    if (!a.allFinite() || !b.allFinite()) throw NumericError("lstsq: non-finite system");
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    if (s.size() == 0 || !(s[0] > 0.0))
        throw DegenerateBasisError("lstsq: every singular value is below the cutoff");
    const double cutoff = rcond * s[0];
    LstsqResult out;
    Vec coeff = svd.matrixU().transpose() * b;
    for (Index i = 0; i < s.size(); ++i) {
        if (s[i] > cutoff) {
            coeff[i] /= s[i];
            ++out.rank;
        } else {
            coeff[i] = 0.0;
        }
    }
    out.x = svd.matrixV() * coeff;
    return out;
}

TransferLearner::TransferLearner(DeepONetModel model, Equation eq, PropagatorConfig cfg, TLConfig tl)
    : model_(std::move(model)), eq_(std::move(eq)), cfg_(cfg), tl_(tl) {
    model_.validate();
    eq_.validate();
    tl_.validate();
    if (eq_.kind == EquationKind::RadiativeTransfer)
        throw std::invalid_argument("TransferLearner: kinetic equations are not supported");
    const Index n = eq_.grid.n_x;
    require_shape(model_.sensor_count() == n, "TransferLearner: sensor count != grid size");
    rows_ = subsample_sensors(n, tl_.n_c, tl_.subsample, tl_.seed);

    const Index radius = eq_.stencil_radius();
    for (Index i : rows_)
        for (Index k = i - radius; k <= i + radius; ++k) {
            if (eq_.grid.boundary == BoundaryTag::Periodic)
                needed_.push_back(((k % n) + n) % n);
            else if (k >= 0 && k < n)
                needed_.push_back(k);
        }
    std::sort(needed_.begin(), needed_.end());
    needed_.erase(std::unique(needed_.begin(), needed_.end()), needed_.end());

    const auto pts = sensor_trunk_points(model_);
    trunk_all_ = trunk_features(model_, pts) * pts.mask.asDiagonal();
    trunk_needed_.resize(model_.p, Index(needed_.size()));
    for (std::size_t c = 0; c < needed_.size(); ++c)
        trunk_needed_.col(Index(c)) = trunk_all_.col(needed_[c]);
}

namespace {

Mat coefficients_for(const DeepONetModel& model, const Vec& f) {
    return coefficient_matrix(model, branch_features(model, f).col(0));
}

Mat take_rows(const Mat& m, const std::vector<Index>& rows) {
    Mat out(Index(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(Index(r)) = m.row(rows[r]);
    return out;
}

} // namespace

Mat TransferLearner::basis_rows(const Mat& h) const {
    const Mat local = trunk_needed_.transpose() * h;
    Mat full = Mat::Zero(eq_.grid.n_x, model_.q);
    for (std::size_t c = 0; c < needed_.size(); ++c) full.row(needed_[c]) = local.row(Index(c));
    return full;
}

Vec TransferLearner::rhs_rows(const Vec& f) const {
    require_shape(f.size() == eq_.grid.n_x, "transfer: state length != grid size");
    Vec b(Index(rows_.size()));
    for (std::size_t r = 0; r < rows_.size(); ++r) b[Index(r)] = f[rows_[r]];
    if (cfg_.scheme == Scheme::CrankNicolson)
        b += 0.5 * cfg_.dt * apply_spatial_rows(eq_, Mat(f), rows_).col(0);
    return b;
}

std::pair<Mat, Vec> TransferLearner::assemble_linear(const Mat& h, const Vec& f) const {
    if (!eq_.is_linear())
        throw std::invalid_argument("tl_update_linear: the step residual is not affine in w");
    const Mat phi = basis_rows(h);
    Mat a = take_rows(phi, rows_) -
            cfg_.implicit_weight() * cfg_.dt * apply_spatial_rows(eq_, phi, rows_);
    return {std::move(a), rhs_rows(f)};
}

std::pair<Mat, Vec> TransferLearner::assemble_linear(const Vec& f) const {
    return assemble_linear(coefficients_for(model_, f), f);
}

std::pair<Vec, Mat> TransferLearner::residual_and_jacobian(const Mat& h, const Vec& f,
                                                           const Vec& w) const {
    require_shape(w.size() == model_.q, "transfer: w length != q");
    const Mat phi = basis_rows(h);
    const Vec g = phi * w;
    const double a = cfg_.implicit_weight() * cfg_.dt;
    Vec r = take_rows(g, rows_).col(0) - a * apply_spatial_rows(eq_, Mat(g), rows_).col(0) -
            rhs_rows(f);
    Mat j = take_rows(phi, rows_) - a * apply_jacobian_rows(eq_, g, phi, rows_);
    return {std::move(r), std::move(j)};
}

TLResult TransferLearner::update_linear(const Vec& f) const {
    auto [a, b] = assemble_linear(f);
    auto sol = lstsq(a, b, tl_.rcond);
    TLResult out;
    out.cost = 0.5 * (a * sol.x - b).squaredNorm();
    out.w = std::move(sol.x);
    out.rank = sol.rank;
    return out;
}

TLResult TransferLearner::update_nonlinear(const Vec& f, const Vec& w_start) const {
    const Mat h = coefficients_for(model_, f);
    Vec w = w_start;
    auto [r, jac] = residual_and_jacobian(h, f, w);
    double cost = 0.5 * r.squaredNorm();
    if (!std::isfinite(cost)) throw NumericError("tl_update_nonlinear: non-finite initial cost");
    double lambda = 1e-3;

    TLResult out;
    for (int iter = 0; iter < tl_.lm_max_iters && cost > 0.0; ++iter) {
        const Mat jtj = jac.transpose() * jac;
        const Vec grad = jac.transpose() * r;
        Vec scale = jtj.diagonal();
        const double floor = std::max(scale.maxCoeff(), 1.0) * 1e-12;
        scale = scale.cwiseMax(floor);

        auto solve = [&](double lam) -> Vec {
            Mat m = jtj;
            m.diagonal() += lam * scale;
            return m.ldlt().solve(-grad);
        };

        Vec step, r_try;
        Mat j_try;
        double cost_try = 0.0;
        bool accepted = false;
        while (!accepted) {
            step = solve(lambda);
            std::tie(r_try, j_try) = residual_and_jacobian(h, f, w + step);
            cost_try = 0.5 * r_try.squaredNorm();
            if (std::isfinite(cost_try) && cost_try < cost) {
                accepted = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e16) {
                // Nothing left to gain when even the lightly damped step
                // predicts a negligible reduction: w is already a minimizer.
                const Vec s0 = solve(1e-3);
                const double predicted = -grad.dot(s0) - 0.5 * s0.dot(jtj * s0);
                if (predicted <= tl_.ftol * cost) {
                    out.iterations = iter;
                    out.w = w;
                    out.cost = cost;
                    return out;
                }
                throw StagnationError("tl_update_nonlinear: cost did not decrease", cost);
            }
        }
        const double rel = (cost - cost_try) / cost;
        w += step;
        r = std::move(r_try);
        jac = std::move(j_try);
        cost = cost_try;
        lambda = std::max(lambda / 10.0, 1e-12);
        out.iterations = iter + 1;
        if (rel < tl_.ftol || step.norm() < tl_.xtol * (tl_.xtol + w.norm())) break;
    }
    out.w = std::move(w);
    out.cost = cost;
    return out;
}

TLResult TransferLearner::update(const Vec& f) const { return update(f, model_.w); }

TLResult TransferLearner::update(const Vec& f, const Vec& w_start) const {
    if (tl_.method == TLMethod::LinearLstsq) return update_linear(f);
    return update_nonlinear(f, w_start);
}

Vec TransferLearner::predict(const Vec& f, const Vec& w) const {
    require_shape(w.size() == model_.q, "predict: w length != q");
    return trunk_all_.transpose() * (coefficients_for(model_, f) * w);
}

Vec tl_update_linear(const DeepONetModel& model, const Equation& eq, const PropagatorConfig& cfg,
                     const Vec& f, const TLConfig& tl) {
    return TransferLearner(model, eq, cfg, tl).update_linear(f).w;
}

Vec tl_update_nonlinear(const DeepONetModel& model, const Equation& eq,
                        const PropagatorConfig& cfg, const Vec& f, const TLConfig& tl) {
    return TransferLearner(model, eq, cfg, tl).update_nonlinear(f, model.w).w;
}

} // namespace tlnet
