#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace jms {

/// B-spline basis on [lo, hi] with the boundary knots replicated degree+1 times.
/// Values are computed with the Cox-de Boor triangular scheme.
class BSplineBasis {
public:
    BSplineBasis() = default;
    BSplineBasis(int degree, std::vector<double> interior_knots, double lo, double hi);

    /// Basis with `num_basis` functions whose interior knots sit at equally
    /// spaced quantiles of `data`.
    static BSplineBasis from_quantiles(std::span<const double> data, int num_basis, int degree, double lo,
                                       double hi);

    int degree() const noexcept { return degree_; }
    int size() const noexcept { return static_cast<int>(knots_.size()) - degree_ - 1; }
    double lower() const noexcept { return lo_; }
    double upper() const noexcept { return hi_; }
    const std::vector<double>& interior_knots() const noexcept { return interior_; }
    /// Full knot vector including replicated boundary knots.
    const std::vector<double>& knots() const noexcept { return knots_; }
    /// Distinct knot locations lo, interior..., hi.
    std::vector<double> breakpoints() const;

    Eigen::VectorXd eval(double t) const;
    Eigen::VectorXd deriv(double t) const;
    /// Derivative of the given order (0 = values). Used internally for
    /// the natural-spline boundary constraints.
    Eigen::VectorXd derivative(double t, int order) const;

private:
    int find_span(double t) const;
    void check_domain(double t) const;

    int degree_ = 0;
    double lo_ = 0.0;
    double hi_ = 1.0;
    std::vector<double> interior_;
    std::vector<double> knots_;
};

/// Natural cubic spline basis (no intercept column): cubic B-splines projected
/// onto the null space of the second-derivative constraints at both boundary
/// knots. Linear outside the boundary interval.
class NaturalCubicBasis {
public:
    NaturalCubicBasis() = default;
    NaturalCubicBasis(std::vector<double> interior_knots, double lo, double hi);

    int size() const noexcept { return static_cast<int>(projection_.cols()); }
    double lower() const noexcept { return bspline_.lower(); }
    double upper() const noexcept { return bspline_.upper(); }
    const std::vector<double>& interior_knots() const noexcept { return bspline_.interior_knots(); }
    std::vector<double> breakpoints() const { return bspline_.breakpoints(); }

    Eigen::VectorXd eval(double t) const;
    Eigen::VectorXd deriv(double t) const;

private:
    Eigen::VectorXd inside(double t, int order) const;

    BSplineBasis bspline_;
    Eigen::MatrixXd projection_;  // (Q-1) x (Q-3)
};

/// r-th order difference penalty with a fixed ridge.
struct DifferencePenalty {
    static constexpr double kRidge = 1e-6;

    int order = 2;
    int dim = 0;
    double ridge = kRidge;

    /// Delta_r, shape (dim - order) x dim.
    Eigen::MatrixXd difference_matrix() const;
    /// Numerical rank of Delta_r^T Delta_r (dim - order).
    int penalty_rank() const;
};

/// K = Delta_r^T Delta_r + ridge * I.
Eigen::MatrixXd penalty_matrix(const DifferencePenalty& p);

/// Quadrature rule on the reference interval [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    int degree = 0;  // algebraic degree of exactness

    static QuadratureRule gauss_legendre(int n);
    static const QuadratureRule& gauss_kronrod15();
};

/// Weighted sum of f at the affinely mapped nodes. Throws NumericError on a
/// non-finite integrand value.
double integrate(const std::function<double(double)>& f, double a, double b, const QuadratureRule& rule);

/// Splits [a, b] at every breakpoint strictly inside it and additionally
/// caps panel width at `max_width` (if > 0). Returns panel boundaries.
std::vector<double> composite_panels(double a, double b, std::span<const double> breakpoints,
                                     double max_width = 0.0);

/// Composite rule over the panels returned by composite_panels.
double integrate_composite(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints, const QuadratureRule& rule,
                           double max_width = 0.0);

}  // namespace jms
