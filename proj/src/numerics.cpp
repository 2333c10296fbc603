#include "jmsched/numerics.hpp"

#include "jmsched/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace jms {

BSplineBasis::BSplineBasis(int degree, std::vector<double> interior_knots, double lo, double hi)
    : degree_(degree), lo_(lo), hi_(hi), interior_(std::move(interior_knots)) {
    if (degree_ < 0) throw ConfigError("B-spline degree must be nonnegative");
    if (!(lo_ < hi_)) throw ConfigError("B-spline boundary knots must satisfy lo < hi");
    double prev = lo_;
    for (double k : interior_) {
        if (!(k > prev)) throw ConfigError("B-spline knots must be strictly ascending inside the boundary");
        prev = k;
    }
    if (!(hi_ > prev)) throw ConfigError("B-spline interior knots must lie below the upper boundary");

    knots_.assign(static_cast<size_t>(degree_ + 1), lo_);
    knots_.insert(knots_.end(), interior_.begin(), interior_.end());
    knots_.insert(knots_.end(), static_cast<size_t>(degree_ + 1), hi_);
}

BSplineBasis BSplineBasis::from_quantiles(std::span<const double> data, int num_basis, int degree, double lo,
                                          double hi) {
    const int n_interior = num_basis - degree - 1;
    if (n_interior < 0) throw ConfigError("number of basis functions must exceed the spline degree");
    std::vector<double> sorted;
    for (double x : data)
        if (x > lo && x < hi) sorted.push_back(x);
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> interior;
    if (n_interior > 0) {
        if (sorted.size() < 2) {
            for (int k = 1; k <= n_interior; ++k) interior.push_back(lo + (hi - lo) * k / (n_interior + 1));
        } else {
            // type-7 quantiles at probabilities k / (n_interior + 1)
            const double n = static_cast<double>(sorted.size());
            for (int k = 1; k <= n_interior; ++k) {
                const double h = (n - 1.0) * k / (n_interior + 1);
                const auto j = static_cast<size_t>(std::floor(h));
                const double frac = h - static_cast<double>(j);
                const double q = j + 1 < sorted.size() ? sorted[j] + frac * (sorted[j + 1] - sorted[j]) : sorted[j];
                interior.push_back(q);
            }
            // ties in the data collapse quantiles; spread them out
            const double eps = 1e-6 * (hi - lo);
            for (size_t k = 0; k < interior.size(); ++k) {
                const double floor_k = (k == 0 ? lo : interior[k - 1]) + eps;
                interior[k] = std::max(interior[k], floor_k);
            }
            if (!interior.empty() && interior.back() >= hi - eps) {
                interior.clear();
                for (int k = 1; k <= n_interior; ++k) interior.push_back(lo + (hi - lo) * k / (n_interior + 1));
            }
        }
    }
    return BSplineBasis(degree, std::move(interior), lo, hi);
}

std::vector<double> BSplineBasis::breakpoints() const {
    std::vector<double> out{lo_};
    out.insert(out.end(), interior_.begin(), interior_.end());
    out.push_back(hi_);
    return out;
}

void BSplineBasis::check_domain(double t) const {
    if (!(t >= lo_ && t <= hi_)) {
        std::ostringstream os;
        os << "t = " << t << " outside B-spline boundary [" << lo_ << ", " << hi_ << "]";
        throw DomainError(os.str());
    }
}

int BSplineBasis::find_span(double t) const {
    const int n = size();
    if (t >= hi_) return n - 1;
    // last index i with knots[i] <= t, restricted to [degree, n-1]
    auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, t);
    return static_cast<int>(it - knots_.begin()) - 1;
}

Eigen::VectorXd BSplineBasis::eval(double t) const { return derivative(t, 0); }

Eigen::VectorXd BSplineBasis::deriv(double t) const { return derivative(t, 1); }

Eigen::VectorXd BSplineBasis::derivative(double t, int order) const {
    check_domain(t);
    const int p = degree_;
    const int n_basis = size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_basis);
    if (order > p) return out;

    const int i = find_span(t);
    const auto& U = knots_;

    // Triangular table of basis values and knot differences.
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(static_cast<size_t>(p + 1)), right(static_cast<size_t>(p + 1));
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - U[i + 1 - j];
        right[j] = U[i + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }

    if (order == 0) {
        for (int j = 0; j <= p; ++j) out(i - p + j) = ndu(j, p);
        return out;
    }

    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        double d = 0.0;
        for (int k = 1; k <= order; ++k) {
            d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            std::swap(s1, s2);
        }
        out(i - p + r) = d;
    }
    double factor = p;
    for (int k = 1; k < order; ++k) factor *= (p - k);
    out *= factor;
    return out;
}

NaturalCubicBasis::NaturalCubicBasis(std::vector<double> interior_knots, double lo, double hi)
    : bspline_(3, std::move(interior_knots), lo, hi) {
    const int q = bspline_.size();
    // Second-derivative constraints at both boundaries, intercept column dropped.
    Eigen::MatrixXd constraints(2, q - 1);
    constraints.row(0) = bspline_.derivative(lo, 2).tail(q - 1).transpose();
    constraints.row(1) = bspline_.derivative(hi, 2).tail(q - 1).transpose();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraints.transpose());
    const Eigen::MatrixXd full_q = qr.householderQ() * Eigen::MatrixXd::Identity(q - 1, q - 1);
    projection_ = full_q.rightCols(q - 3);
}

Eigen::VectorXd NaturalCubicBasis::inside(double t, int order) const {
    const Eigen::VectorXd b = bspline_.derivative(t, order);
    return projection_.transpose() * b.tail(b.size() - 1);
}

Eigen::VectorXd NaturalCubicBasis::eval(double t) const {
    if (t < lower()) return inside(lower(), 0) + (t - lower()) * inside(lower(), 1);
    if (t > upper()) return inside(upper(), 0) + (t - upper()) * inside(upper(), 1);
    return inside(t, 0);
}

Eigen::VectorXd NaturalCubicBasis::deriv(double t) const {
    return inside(std::clamp(t, lower(), upper()), 1);
}

Eigen::MatrixXd DifferencePenalty::difference_matrix() const {
    if (order < 1) throw ConfigError("penalty order must be positive");
    if (dim <= order) throw ConfigError("penalty dimension must exceed its order");
    Eigen::MatrixXd delta = Eigen::MatrixXd::Identity(dim, dim);
    for (int r = 0; r < order; ++r) {
        const Eigen::Index rows = delta.rows() - 1;
        delta = (delta.bottomRows(rows) - delta.topRows(rows)).eval();
    }
    return delta;
}

int DifferencePenalty::penalty_rank() const {
    const Eigen::MatrixXd d = difference_matrix();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.transpose() * d, Eigen::EigenvaluesOnly);
    const double tol = 1e-9 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    return static_cast<int>((es.eigenvalues().array() > tol).count());
}

Eigen::MatrixXd penalty_matrix(const DifferencePenalty& p) {
    if (!(p.ridge > 0.0)) throw ConfigError("penalty ridge must be positive");
    const Eigen::MatrixXd d = p.difference_matrix();
    Eigen::MatrixXd k = d.transpose() * d;
    k.diagonal().array() += p.ridge;
    return k;
}

QuadratureRule QuadratureRule::gauss_legendre(int n) {
    if (n < 1) throw ConfigError("Gauss-Legendre rule needs at least one node");
    QuadratureRule rule;
    rule.nodes.resize(static_cast<size_t>(n));
    rule.weights.resize(static_cast<size_t>(n));
    rule.degree = 2 * n - 1;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at converged x
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<size_t>(i)] = -x;
        rule.nodes[static_cast<size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<size_t>(i)] = w;
        rule.weights[static_cast<size_t>(n - 1 - i)] = w;
    }
    if (n % 2 == 1) rule.nodes[static_cast<size_t>(n / 2)] = 0.0;
    return rule;
}

const QuadratureRule& QuadratureRule::gauss_kronrod15() {
    static const QuadratureRule rule = [] {
        // QUADPACK qk15 Kronrod abscissae and weights
        constexpr double xgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
        constexpr double wgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
        QuadratureRule r;
        for (int i = 0; i < 7; ++i) {
            r.nodes.push_back(-xgk[i]);
            r.weights.push_back(wgk[i]);
        }
        r.nodes.push_back(0.0);
        r.weights.push_back(wgk[7]);
        for (int i = 6; i >= 0; --i) {
            r.nodes.push_back(xgk[i]);
            r.weights.push_back(wgk[i]);
        }
        r.degree = 22;
        return r;
    }();
    return rule;
}

double integrate(const std::function<double(double)>& f, double a, double b, const QuadratureRule& rule) {
    if (a == b) return 0.0;
    if (a > b) throw DomainError("integrate requires a <= b");
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (size_t k = 0; k < rule.nodes.size(); ++k) {
        const double x = mid + half * rule.nodes[k];
        const double fx = f(x);
        if (!std::isfinite(fx)) throw NumericError("non-finite integrand value", x);
        sum += rule.weights[k] * fx;
    }
    return half * sum;
}

std::vector<double> composite_panels(double a, double b, std::span<const double> breakpoints, double max_width) {
    std::vector<double> cuts{a};
    for (double k : breakpoints)
        if (k > a && k < b) cuts.push_back(k);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    if (!(max_width > 0.0)) return cuts;
    std::vector<double> out{cuts.front()};
    for (size_t k = 1; k < cuts.size(); ++k) {
        const double lo = cuts[k - 1], hi = cuts[k];
        const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_width - 1e-12)));
        for (int j = 1; j < pieces; ++j) out.push_back(lo + (hi - lo) * j / pieces);
        out.push_back(hi);
    }
    return out;
}

double integrate_composite(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints, const QuadratureRule& rule, double max_width) {
    if (a == b) return 0.0;
    if (a > b) throw DomainError("integrate requires a <= b");
    const auto panels = composite_panels(a, b, breakpoints, max_width);
    double sum = 0.0;
    for (size_t k = 1; k < panels.size(); ++k) sum += integrate(f, panels[k - 1], panels[k], rule);
    return sum;
}

}  // namespace jms
