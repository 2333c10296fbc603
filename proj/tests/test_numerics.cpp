#include "doctest.h"
#include "oracles.hpp"

#include "jmsched/error.hpp"
#include "jmsched/numerics.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace jms;

namespace {

std::vector<double> grid(double lo, double hi, int n) {
    std::vector<double> out;
    for (int k = 0; k <= n; ++k) out.push_back(lo + (hi - lo) * k / n);
    return out;
}

}  // namespace

TEST_CASE("B-spline values agree with the recursive definition") {
    for (int degree : {0, 1, 2, 3, 4}) {
        const BSplineBasis B(degree, {0.5, 1.5, 1.6, 3.2}, 0.0, 4.0);
        CHECK(B.size() == degree + 1 + 4);
        for (double t : grid(0.0, 4.0, 173)) {
            const Eigen::VectorXd v = B.eval(t);
            for (int i = 0; i < B.size(); ++i) CHECK(v(i) == doctest::Approx(oracle::cox_de_boor(B.knots(), i, degree, t)).epsilon(1e-12));
        }
    }
}

TEST_CASE("B-spline derivative matches the derivative recurrence") {
    const int p = 3;
    const BSplineBasis B(p, {1.0, 2.0, 2.7}, 0.0, 5.0);
    const auto& k = B.knots();
    for (double t : grid(0.01, 4.99, 97)) {
        const Eigen::VectorXd d = B.deriv(t);
        for (int i = 0; i < B.size(); ++i) {
            const auto u = static_cast<std::size_t>(i);
            double ref = 0.0;
            if (k[u + p] > k[u]) ref += p / (k[u + p] - k[u]) * oracle::cox_de_boor(k, i, p - 1, t);
            if (k[u + p + 1] > k[u + 1]) ref -= p / (k[u + p + 1] - k[u + 1]) * oracle::cox_de_boor(k, i + 1, p - 1, t);
            CHECK(d(i) == doctest::Approx(ref).epsilon(1e-10).scale(1.0));
        }
    }
}

TEST_CASE("B-spline basis is a nonnegative partition of unity with local support") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 10.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> interior;
        for (int j = 0; j < 6; ++j) interior.push_back(U(rng));
        std::sort(interior.begin(), interior.end());
        const BSplineBasis B(3, interior, 0.0, 10.0);
        for (int s = 0; s < 50; ++s) {
            const double t = U(rng);
            const Eigen::VectorXd v = B.eval(t);
            CHECK(std::abs(v.sum() - 1.0) < 1e-12);
            CHECK(v.minCoeff() >= 0.0);
            CHECK((v.array() > 0.0).count() <= 4);
            CHECK(std::abs(B.deriv(t).sum()) < 1e-9);
        }
    }
}

TEST_CASE("B-spline knots must be strictly inside the boundary and ascending") {
    CHECK_THROWS_AS(BSplineBasis(3, {1.0, 1.0}, 0.0, 4.0), ConfigError);
    CHECK_THROWS_AS(BSplineBasis(3, {0.0}, 0.0, 4.0), ConfigError);
    CHECK_THROWS_AS(BSplineBasis(3, {2.0}, 4.0, 0.0), ConfigError);
}

TEST_CASE("B-spline evaluation outside the boundary is a domain error") {
    const BSplineBasis B(3, {2.0}, 0.0, 4.0);
    CHECK_THROWS_AS(B.eval(-0.1), DomainError);
    CHECK_THROWS_AS(B.eval(4.0001), DomainError);
    CHECK_THROWS_AS(B.eval(std::numeric_limits<double>::quiet_NaN()), DomainError);
    CHECK(B.eval(4.0)(B.size() - 1) == doctest::Approx(1.0));
}

TEST_CASE("quantile knots follow the data") {
    std::vector<double> data;
    for (int k = 1; k <= 99; ++k) data.push_back(k * 0.1);
    const auto B = BSplineBasis::from_quantiles(data, 7, 3, 0.0, 10.0);
    CHECK(B.size() == 7);
    REQUIRE(B.interior_knots().size() == 3);
    CHECK(B.interior_knots()[0] == doctest::Approx(2.55));
    CHECK(B.interior_knots()[1] == doctest::Approx(5.0));
    CHECK(B.interior_knots()[2] == doctest::Approx(7.45));
    CHECK_THROWS_AS(BSplineBasis::from_quantiles(data, 3, 3, 0.0, 10.0), ConfigError);
}

TEST_CASE("natural cubic basis spans the truncated-power natural spline space") {
    const std::vector<double> interior = {1.0, 2.5, 4.0};
    const NaturalCubicBasis N(interior, 0.0, 6.0);
    CHECK(N.size() == static_cast<int>(interior.size()) + 1);
    std::vector<double> all = {0.0};
    all.insert(all.end(), interior.begin(), interior.end());
    all.push_back(6.0);

    const auto ts = grid(0.0, 6.0, 120);
    const auto n = static_cast<Eigen::Index>(ts.size());
    Eigen::MatrixXd A(n, N.size() + 1), R(n, N.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, 0) = 1.0;
        A.row(i).tail(N.size()) = N.eval(ts[static_cast<std::size_t>(i)]).transpose();
        R.row(i) = oracle::natural_spline_truncated(all, ts[static_cast<std::size_t>(i)]).transpose();
    }
    const Eigen::MatrixXd coef = A.colPivHouseholderQr().solve(R);
    CHECK((A * coef - R).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    CHECK(lu.rank() == N.size() + 1);
}

TEST_CASE("natural cubic basis is linear beyond the boundary knots") {
    const NaturalCubicBasis N({1.0, 2.0}, 0.0, 3.0);
    const Eigen::VectorXd d_hi = N.deriv(3.0);
    for (double t : {3.5, 5.0, 9.0}) {
        CHECK((N.deriv(t) - d_hi).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((N.eval(t) - (N.eval(3.0) + (t - 3.0) * d_hi)).cwiseAbs().maxCoeff() < 1e-9);
    }
    const Eigen::VectorXd d_lo = N.deriv(0.0);
    CHECK((N.eval(-1.0) - (N.eval(0.0) - d_lo)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("difference penalty") {
    const DifferencePenalty p{2, 6};
    const Eigen::MatrixXd Delta = p.difference_matrix();
    CHECK(Delta.rows() == 4);
    CHECK(Delta.cols() == 6);
    CHECK(Delta(0, 0) == 1.0);
    CHECK(Delta(0, 1) == -2.0);
    CHECK(Delta(0, 2) == 1.0);
    CHECK(Delta(3, 5) == 1.0);
    // annihilates polynomials of degree < order
    const Eigen::VectorXd linear = Eigen::VectorXd::LinSpaced(6, -1.0, 4.0);
    CHECK((Delta * linear).norm() < 1e-12);
    const Eigen::MatrixXd K = penalty_matrix(p);
    CHECK((K - K.transpose()).norm() == 0.0);
    const Eigen::MatrixXd ridge = K - Delta.transpose() * Delta;
    CHECK((ridge - DifferencePenalty::kRidge * Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(K.llt().info() == Eigen::Success);
    CHECK(p.penalty_rank() == 4);
    CHECK(DifferencePenalty{3, 10}.penalty_rank() == 7);
}

TEST_CASE("Gauss-Legendre nodes and weights match the Golub-Welsch eigenproblem") {
    for (int n : {1, 3, 8, 15, 30}) {
        const auto rule = QuadratureRule::gauss_legendre(n);
        auto [x, w] = oracle::golub_welsch(n);
        REQUIRE(rule.nodes.size() == static_cast<std::size_t>(n));
        std::vector<std::pair<double, double>> got, ref;
        for (int k = 0; k < n; ++k) {
            got.emplace_back(rule.nodes[static_cast<std::size_t>(k)], rule.weights[static_cast<std::size_t>(k)]);
            ref.emplace_back(x[static_cast<std::size_t>(k)], w[static_cast<std::size_t>(k)]);
        }
        std::sort(got.begin(), got.end());
        std::sort(ref.begin(), ref.end());
        for (int k = 0; k < n; ++k) {
            CHECK(got[static_cast<std::size_t>(k)].first == doctest::Approx(ref[static_cast<std::size_t>(k)].first).epsilon(1e-12).scale(1.0));
            CHECK(got[static_cast<std::size_t>(k)].second == doctest::Approx(ref[static_cast<std::size_t>(k)].second).epsilon(1e-12));
        }
    }
}

TEST_CASE("quadrature rules integrate polynomials up to their degree exactly") {
    for (const QuadratureRule* rule : {&QuadratureRule::gauss_kronrod15()}) {
        CHECK(rule->degree == 22);
        for (int k = 0; k <= rule->degree; ++k) {
            const double exact = (std::pow(3.0, k + 1) - std::pow(-1.0, k + 1)) / (k + 1);
            const double got = integrate([k](double x) { return std::pow(x, k); }, -1.0, 3.0, *rule);
            CHECK(got == doctest::Approx(exact).epsilon(1e-12));
        }
    }
    const auto gl = QuadratureRule::gauss_legendre(4);
    const double miss = integrate([](double x) { return std::pow(x, 8); }, -1.0, 1.0, gl);
    CHECK(std::abs(miss - 2.0 / 9.0) > 1e-6);
}

TEST_CASE("integration reports non-finite integrands") {
    const auto& rule = QuadratureRule::gauss_kronrod15();
    CHECK_THROWS_AS(integrate([](double x) { return x > 0.5 ? std::numeric_limits<double>::infinity() : 1.0; }, 0.0,
                              1.0, rule),
                    NumericError);
}

TEST_CASE("composite panels split at breakpoints and cap their width") {
    const std::vector<double> bp = {-1.0, 0.5, 2.0, 7.0};
    const auto p = composite_panels(0.0, 3.0, bp);
    CHECK(p == std::vector<double>{0.0, 0.5, 2.0, 3.0});
    const auto capped = composite_panels(0.0, 3.0, bp, 0.6);
    for (std::size_t k = 1; k < capped.size(); ++k) CHECK(capped[k] - capped[k - 1] <= 0.6 + 1e-12);
    CHECK(std::find(capped.begin(), capped.end(), 2.0) != capped.end());

    // a kink at a breakpoint is integrated to rounding
    auto kinked = [](double x) { return std::exp(std::abs(x - 1.3)); };
    const double exact = (std::exp(1.3) - 1.0) + (std::exp(1.7) - 1.0);
    const std::vector<double> kink = {1.3};
    CHECK(integrate_composite(kinked, 0.0, 3.0, kink, QuadratureRule::gauss_kronrod15()) ==
          doctest::Approx(exact).epsilon(1e-13));
    CHECK(integrate_composite(kinked, 1.0, 1.0, kink, QuadratureRule::gauss_kronrod15()) == 0.0);
    CHECK_THROWS_AS(integrate_composite(kinked, 2.0, 1.0, kink, QuadratureRule::gauss_kronrod15()), DomainError);
}
