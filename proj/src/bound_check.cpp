#include "tlnet/studies.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <random>

namespace tlnet {

void BoundHarnessConfig::validate() const {
    if (n < 1 || steps < 1 || trials < 0 || probes < 0)
        throw std::invalid_argument("BoundHarnessConfig: n, K must be positive");
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("BoundHarnessConfig: need 0 < eta <= 1");
    if (!(delta >= 0.0) || !std::isfinite(delta))
        throw std::invalid_argument("BoundHarnessConfig: delta must be non-negative");
}

namespace {

Mat gaussian_matrix(Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat m(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) m(i, j) = normal(rng);
    return m;
}

/// Rescales m to spectral norm `target` (zero when target is zero).
Mat with_norm(Mat m, double target) {
    if (target == 0.0) return Mat::Zero(m.rows(), m.cols());
    Eigen::JacobiSVD<Mat> svd(m);
    return m * (target / svd.singularValues()[0]);
}

Mat power(const Mat& a, Index k) {
    Mat out = Mat::Identity(a.rows(), a.cols());
    for (Index i = 0; i < k; ++i) out = a * out;
    return out;
}

double ratio(double observed, double bound) {
    if (bound > 0.0) return observed / bound;
    return observed > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

} // namespace

BoundReport bound_check(const BoundHarnessConfig& cfg) {
    cfg.validate();
    const double k = double(cfg.steps);
    const double general = cfg.delta * k * std::pow(1.0 + cfg.delta, k);
    const double contracting = cfg.delta * k * std::pow(0.5 * (1.0 + cfg.eta), k - 1.0);

    BoundReport rep;
    rep.contracting_checked = cfg.contracting();
    for (Index t = 0; t < cfg.trials; ++t) {
        std::mt19937_64 rng(derive_seed(cfg.seed, std::uint64_t(t)));
        const Mat p = with_norm(gaussian_matrix(cfg.n, rng), cfg.eta);
        const Mat e = with_norm(gaussian_matrix(cfg.n, rng), cfg.delta);
        const Mat p_nn = p * (Mat::Identity(cfg.n, cfg.n) + e);
        const Mat diff = power(p, cfg.steps) - power(p_nn, cfg.steps);

        Eigen::JacobiSVD<Mat> svd(diff, Eigen::ComputeFullV);
        double observed = (diff * svd.matrixV().col(0)).norm();
        std::normal_distribution<double> normal(0.0, 1.0);
        Vec probe(cfg.n);
        for (Index s = 0; s < cfg.probes; ++s) {
            for (Index i = 0; i < cfg.n; ++i) probe[i] = normal(rng);
            observed = std::max(observed, (diff * probe.normalized()).norm());
        }

        rep.max_observed = std::max(rep.max_observed, observed);
        rep.max_ratio_general = std::max(rep.max_ratio_general, ratio(observed, general));
        if (observed > general * (1.0 + 1e-12)) ++rep.violations_general;
        if (rep.contracting_checked) {
            rep.max_ratio_contracting =
                std::max(rep.max_ratio_contracting, ratio(observed, contracting));
            if (observed > contracting * (1.0 + 1e-12)) ++rep.violations_contracting;
        }
        ++rep.trials;
    }
    return rep;
}

} // namespace tlnet
