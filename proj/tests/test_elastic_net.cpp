#include "doctest.h"
#include "support.hpp"

#include "skpca/elastic_net.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>

using namespace skpca;

namespace {

EnetProblem make_problem(Matrix K2, double ridge, double l1, Vector b) {
    return {std::make_shared<const Matrix>(std::move(K2)), ridge, l1, std::move(b)};
}

// Random well-posed instance: K2 = G G' + eps I, b = K2 a.
EnetProblem random_problem(Index n, std::mt19937_64& rng, double l1_scale) {
    Matrix K2 = test::random_psd(n, n, rng) / static_cast<double>(n);
    const Vector a = test::random_matrix(n, 1, rng).col(0);
    Vector b = K2 * a;
    const double ridge = 1e-2 * K2.diagonal().mean();
    const double l1 = l1_scale * 2.0 * b.cwiseAbs().maxCoeff();
    return make_problem(std::move(K2), ridge, l1, std::move(b));
}

// Exhaustive grid over [-2,2]^2 followed by exact refinement over the nine
// sign patterns (each smooth piece is a quadratic with a closed-form minimum).
struct GridOracle {
    double value = std::numeric_limits<double>::infinity();
    Vector beta = Vector::Zero(2);
    double grid_value = std::numeric_limits<double>::infinity();
};

GridOracle grid_oracle(const Matrix& K2, double ridge, double l1, const Vector& b) {
    GridOracle o;
    for (int i = 0; i <= 400; ++i) {
        for (int j = 0; j <= 400; ++j) {
            const Vector x{{-2.0 + 0.01 * i, -2.0 + 0.01 * j}};
            const double v = test::enet_objective_oracle(K2, ridge, l1, b, x);
            if (v < o.grid_value) o.grid_value = v;
        }
    }
    o.value = o.grid_value;
    const std::array<int, 3> signs{-1, 0, 1};
    for (int s0 : signs) {
        for (int s1 : signs) {
            const int s[2] = {s0, s1};
            Vector x = Vector::Zero(2);
            std::vector<int> act;
            for (int k = 0; k < 2; ++k) {
                if (s[k] != 0) act.push_back(k);
            }
            if (!act.empty()) {
                const Index m = static_cast<Index>(act.size());
                Matrix A(m, m);
                Vector r(m);
                for (Index a = 0; a < m; ++a) {
                    for (Index c = 0; c < m; ++c) A(a, c) = K2(act[a], act[c]);
                    A(a, a) += ridge;
                    r(a) = b(act[a]) - 0.5 * l1 * s[act[a]];
                }
                const Vector y = A.ldlt().solve(r);
                bool ok = true;
                for (Index a = 0; a < m; ++a) {
                    ok = ok && (y(a) * s[act[a]] > 0.0);
                    x(act[a]) = y(a);
                }
                if (!ok) continue;
            }
            const double v = test::enet_objective_oracle(K2, ridge, l1, b, x);
            if (v < o.value) {
                o.value = v;
                o.beta = x;
            }
        }
    }
    return o;
}

}  // namespace

TEST_CASE("zero L1 weight reproduces the ridge closed form") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        const Index n = 12;
        EnetProblem p = random_problem(n, rng, 0.0);
        REQUIRE(p.l1 == 0.0);
        Matrix A = *p.K2;
        A.diagonal().array() += p.ridge;
        const Vector closed = A.llt().solve(p.linear);
        const EnetSolution s = solve_enet(p);
        CHECK(s.converged);
        CHECK((s.beta - closed).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(kkt_residual(p, closed) <= 1e-10);

        EnetOptions cd;
        cd.polish = false;
        cd.tol = 1e-9;
        const EnetSolution plain = solve_enet(p, cd);
        CHECK(plain.converged);
        CHECK(test::kkt_oracle(*p.K2, p.ridge, p.l1, p.linear, plain.beta) <= 1e-9);
    }
}

TEST_CASE("large L1 weight annihilates every coordinate") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 10; ++t) {
        EnetProblem p = random_problem(8, rng, 1.0);
        const EnetSolution s = solve_enet(p);
        CHECK(s.beta.isZero(0.0));
        CHECK(s.kkt_residual == 0.0);
        CHECK(kkt_residual(p, Vector::Zero(8)) == 0.0);
        EnetOptions warm;
        warm.warm_start = Vector::Ones(8);
        CHECK(solve_enet(p, warm).beta.isZero(0.0));
    }
}

TEST_CASE("n=2 instances agree with the grid oracle") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> eig(1.0, 3.0);
    std::uniform_real_distribution<double> l1w(0.0, 2.0);
    for (int t = 0; t < 40; ++t) {
        const double th = unit(rng) * 3.14159;
        Matrix U(2, 2);
        U << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        const Matrix K2 = U * Vector{{eig(rng), eig(rng)}}.asDiagonal() * U.transpose();
        const Vector b{{unit(rng), unit(rng)}};
        const double ridge = 0.1, l1 = l1w(rng);
        const EnetProblem p = make_problem(K2, ridge, l1, b);
        const GridOracle o = grid_oracle(K2, ridge, l1, b);
        const EnetSolution s = solve_enet(p);
        CHECK(o.value <= o.grid_value);
        CHECK(std::abs(s.objective - o.value) <= 1e-8);
        CHECK(std::abs(test::enet_objective_oracle(K2, ridge, l1, b, s.beta) - s.objective) <= 1e-12);
        CHECK((s.beta - o.beta).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("kkt_residual") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        EnetProblem p = random_problem(10, rng, 0.2);
        const EnetSolution s = solve_enet(p);
        REQUIRE(s.converged);
        CHECK(s.kkt_residual <= 1e-6);
        CHECK(std::abs(kkt_residual(p, s.beta) - test::kkt_oracle(*p.K2, p.ridge, p.l1, p.linear, s.beta)) <= 1e-12);
        Index nz = -1;
        for (Index i = 0; i < s.beta.size(); ++i) {
            if (s.beta(i) != 0.0) nz = i;
        }
        REQUIRE(nz >= 0);
        Vector bumped = s.beta;
        bumped(nz) += 0.1;
        CHECK(kkt_residual(p, bumped) > 1e-3);
    }
    EnetProblem p = random_problem(4, rng, 0.0);
    CHECK_THROWS_AS(kkt_residual(p, Vector::Zero(3)), Error);
}

TEST_CASE("sweeps never increase the objective") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
        EnetProblem p = random_problem(25, rng, 0.05);
        for (bool polish : {false, true}) {
            EnetOptions o;
            o.record_objective = true;
            o.polish = polish;
            const EnetSolution s = solve_enet(p, o);
            REQUIRE(s.sweep_objectives.size() >= 2);
            for (std::size_t k = 1; k < s.sweep_objectives.size(); ++k) {
                const double prev = s.sweep_objectives[k - 1];
                CHECK(s.sweep_objectives[k] <= prev + 1e-12 * std::max(1.0, std::abs(prev)));
            }
        }
    }
}

TEST_CASE("coordinate order does not change the optimum") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t) {
        EnetProblem p = random_problem(20, rng, 0.1);
        EnetOptions fwd, rev, shuf;
        for (Index i = 0; i < 20; ++i) rev.order.push_back(19 - i);
        shuf.order = rev.order;
        std::shuffle(shuf.order.begin(), shuf.order.end(), rng);
        const double a = solve_enet(p, fwd).objective;
        CHECK(std::abs(solve_enet(p, rev).objective - a) <= 10 * fwd.tol);
        CHECK(std::abs(solve_enet(p, shuf).objective - a) <= 10 * fwd.tol);
    }
    EnetProblem p = random_problem(3, rng, 0.1);
    EnetOptions bad;
    bad.order = {0, 1};
    CHECK_THROWS_AS(solve_enet(p, bad), Error);
}

TEST_CASE("iteration cap reports non-convergence with the best iterate") {
    std::mt19937_64 rng(9);
    EnetProblem p = random_problem(30, rng, 0.01);
    EnetOptions o;
    o.max_iter = 1;
    o.polish = false;
    o.tol = 1e-14;
    const EnetSolution s = solve_enet(p, o);
    CHECK_FALSE(s.converged);
    CHECK(s.iterations == 1);
    CHECK(std::isfinite(s.objective));
    CHECK(s.objective <= 0.0);
}

TEST_CASE("invalid problems") {
    SUBCASE("unbounded") {
        Matrix K2 = Matrix::Zero(2, 2);
        K2(0, 0) = 1.0;
        CHECK_THROWS_AS(solve_enet(make_problem(K2, 0.0, 0.0, Vector{{1.0, 1.0}})), Error);
        Matrix R = Matrix::Ones(2, 2);
        CHECK_THROWS_AS(solve_enet(make_problem(R, 0.0, 0.1, Vector{{1.0, -1.0}})), Error);
        // Enough L1 weight makes the same problem bounded.
        const EnetSolution s = solve_enet(make_problem(K2, 0.0, 2.5, Vector{{1.0, 1.0}}));
        CHECK(s.beta.isZero(0.0));
    }
    SUBCASE("non-finite") {
        const Matrix K2 = Matrix::Identity(2, 2);
        CHECK_THROWS_AS(solve_enet(make_problem(K2, 0.1, 0.0, Vector{{1.0, std::nan("")}})), Error);
        Matrix bad = K2;
        bad(0, 1) = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(solve_enet(make_problem(bad, 0.1, 0.0, Vector{{1.0, 1.0}})), Error);
    }
    SUBCASE("bad weights and shapes") {
        const Matrix K2 = Matrix::Identity(2, 2);
        CHECK_THROWS_AS(solve_enet(make_problem(K2, -0.1, 0.0, Vector::Ones(2))), Error);
        CHECK_THROWS_AS(solve_enet(make_problem(K2, 0.1, -1.0, Vector::Ones(2))), Error);
        CHECK_THROWS_AS(solve_enet(make_problem(K2, 0.1, 0.0, Vector::Ones(3))), Error);
        EnetOptions o;
        o.tol = 0.0;
        CHECK_THROWS_AS(solve_enet(make_problem(K2, 0.1, 0.0, Vector::Ones(2)), o), Error);
    }
}
