#ifndef TLNET_TESTS_SUPPORT_HPP
#define TLNET_TESTS_SUPPORT_HPP

#include "tlnet/common.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>

#include <unistd.h>

namespace tlnet::testing {

/// Central differences of a scalar function of a parameter vector.
inline Vec central_diff(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
    Vec g(x.size());
    Vec y = x;
    for (Index i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double step = h * std::max(1.0, std::abs(xi));
        y[i] = xi + step;
        const double fp = f(y);
        y[i] = xi - step;
        const double fm = f(y);
        y[i] = xi;
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

/// Normwise relative error ||a - b|| / ||b||.
inline double rel_error(const Vec& a, const Vec& b) {
    const double den = b.norm();
    return den == 0.0 ? a.norm() : (a - b).norm() / den;
}

inline Mat random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Mat m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
    return m;
}

inline Vec random_vector(Index n, std::uint64_t seed, double scale = 1.0) {
    return random_matrix(n, 1, seed, scale).col(0);
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / ("tlnet_" + name + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace tlnet::testing

#endif
