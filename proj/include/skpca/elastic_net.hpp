#pragma once

// Naive elastic-net subproblem for one coefficient column:
//
//   minimize  b'(K2 + ridge I)b - 2 t'b + l1 |b|_1
//
// solved by cyclic coordinate descent, finished by an exact active-set
// (feature-sign) phase once the support has roughly settled.

#include "skpca/common.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace skpca {

struct EnetProblem {
    std::shared_ptr<const Matrix> K2;  // shared read-only across column solves
    double ridge = 0.0;
    double l1 = 0.0;
    Vector linear;  // K2 * alpha_j

    Index size() const noexcept { return linear.size(); }
    /// Throws if dimensions disagree, weights are negative or inputs are non-finite.
    void validate() const;
};

struct EnetOptions {
    double tol = 1e-6;
    int max_iter = 10'000;              // full sweeps
    std::vector<Index> order;           // coordinate order; empty = 0..n-1
    std::optional<Vector> warm_start;
    bool record_objective = false;      // fill EnetSolution::sweep_objectives
    bool polish = true;                 // run the exact active-set finish after a few sweeps
};

struct EnetSolution {
    Vector beta;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> sweep_objectives;
};

double enet_objective(const EnetProblem& p, const Vector& beta);

/// Largest subgradient violation of the optimality conditions at beta.
double kkt_residual(const EnetProblem& p, const Vector& beta);

EnetSolution solve_enet(const EnetProblem& p, const EnetOptions& opts = {});

}  // namespace skpca
