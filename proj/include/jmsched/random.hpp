#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace jms {

using Rng = std::mt19937_64;

/// Independent stream keyed by a seed and a path of indices (chain, subject, rep, ...).
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * path.size());
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto p : path) push(p);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

/// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
    // 53 random bits shifted off zero
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double std_normal(Rng& rng) {
    // Box-Muller on our own uniforms keeps streams identical across standard libraries.
    const double u1 = uniform_open(rng), u2 = uniform_open(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643 * u2);
}

inline Eigen::VectorXd std_normal_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index k = 0; k < n; ++k) z(k) = std_normal(rng);
    return z;
}

/// Gamma(shape, rate) by Marsaglia-Tsang, with the shape < 1 boost.
inline double gamma_draw(Rng& rng, double shape, double rate) {
    if (shape < 1.0) {
        const double u = uniform_open(rng);
        return gamma_draw(rng, shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = std_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_open(rng);
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v / rate;
    }
}

/// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale / x).
inline double inverse_gamma_draw(Rng& rng, double shape, double scale) { return 1.0 / gamma_draw(rng, shape, scale); }

inline double chi_square_draw(Rng& rng, double df) { return gamma_draw(rng, 0.5 * df, 0.5); }

/// Wishart(df, scale) by the Bartlett decomposition.
inline Eigen::MatrixXd wishart_draw(Rng& rng, double df, const Eigen::MatrixXd& scale) {
    const Eigen::Index p = scale.rows();
    const Eigen::MatrixXd L = scale.llt().matrixL();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        A(i, i) = std::sqrt(chi_square_draw(rng, df - static_cast<double>(i)));
        for (Eigen::Index j = 0; j < i; ++j) A(i, j) = std_normal(rng);
    }
    const Eigen::MatrixXd LA = L * A;
    return LA * LA.transpose();
}

/// Inverse-Wishart(df, scale): W^{-1} with W ~ Wishart(df, scale^{-1}).
inline Eigen::MatrixXd inverse_wishart_draw(Rng& rng, double df, const Eigen::MatrixXd& scale) {
    const Eigen::MatrixXd scale_inv = scale.inverse();
    const Eigen::MatrixXd W = wishart_draw(rng, df, 0.5 * (scale_inv + scale_inv.transpose()));
    const Eigen::MatrixXd out = W.inverse();
    return 0.5 * (out + out.transpose());
}

/// Multivariate Student-t draw: location + L z / sqrt(w/df), L the Cholesky factor of the scale.
inline Eigen::VectorXd student_t_draw(Rng& rng, const Eigen::VectorXd& location, const Eigen::MatrixXd& chol_lower,
                                      double df) {
    const Eigen::VectorXd z = std_normal_vector(rng, location.size());
    const double w = chi_square_draw(rng, df);
    return location + chol_lower * z * std::sqrt(df / w);
}

/// Log density of the multivariate t up to the constant shared by all points.
inline double student_t_log_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& location,
                                   const Eigen::MatrixXd& chol_lower, double df) {
    const Eigen::VectorXd z = chol_lower.triangularView<Eigen::Lower>().solve(x - location);
    return -0.5 * (df + static_cast<double>(x.size())) * std::log1p(z.squaredNorm() / df);
}

/// Index drawn uniformly from {0, ..., n-1}.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(n)) % n;
}

}  // namespace jms
