#pragma once

// Sparse kernel PCA by alternating minimization: an elastic-net step for the
// sparse coefficients beta and a generalized Procrustes step for the
// constraint-satisfying loadings alpha (alpha' K alpha = I).

#include "skpca/kernel.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace skpca {

struct AlgoConfig {
    Index m = 1;                   // number of components
    std::optional<double> ridge;   // unset: 1e-4 * lambda_max(K)^2
    double l1_ratio = 0.0;         // per-column L1 weight divided by ridge
    double outer_tol = 1e-5;
    int max_outer_iter = 200;
    double enet_tol = 1e-6;
    int enet_max_iter = 10'000;
    std::uint64_t seed = 0;
    Exec exec = Exec::parallel;

    void validate() const;
};

/// Ridge weight used for a fit: the configured value or the scale-matched default.
double effective_ridge(const AlgoConfig& cfg, const EigenBasis& eig);

struct SparseBasis {
    Matrix alpha;            // n x m, alpha' K alpha = I
    Matrix beta;             // n x m, sparse
    Matrix normalized_beta;  // columns scaled to unit kernel norm; zero columns stay zero
    std::vector<double> objective_trace;
    std::vector<Index> zero_columns;
    double sparsity_pct = 0.0;
    double ridge = 0.0;
    double l1 = 0.0;
    int outer_iterations = 0;
    bool converged = false;
    bool degenerate = false;  // every beta column is zero

    Index size() const noexcept { return beta.rows(); }
    Index components() const noexcept { return beta.cols(); }
};

struct ProcrustesResult {
    Matrix alpha;
    bool degenerate = false;  // fewer than m nonzero singular values: maximizer not unique
    Vector singular_values;
};

/// Shared per-fit quantities: centered K, its eigendecomposition and K^2.
struct FitContext {
    const GramMatrix* K = nullptr;
    EigenBasis eig;  // full retained-rank decomposition of K
    std::shared_ptr<const Matrix> K2;

    static FitContext prepare(const GramMatrix& K);
};

Matrix init_alpha(const EigenBasis& eig, Index m);

/// Column j solves the elastic net with linear term K^2 alpha_j.
Matrix update_beta(const FitContext& ctx, const Matrix& alpha, const AlgoConfig& cfg,
                   const Matrix* warm_start = nullptr);
Matrix update_beta(const GramMatrix& K, const Matrix& alpha, const AlgoConfig& cfg);

/// argmax tr(alpha' B) subject to alpha' Q alpha = I over the retained range of Q.
ProcrustesResult generalized_procrustes(const Matrix& B, const EigenBasis& q_eig);
ProcrustesResult generalized_procrustes(const Matrix& B, const Matrix& Q);

ProcrustesResult update_alpha(const FitContext& ctx, const Matrix& beta);
ProcrustesResult update_alpha(const GramMatrix& K, const Matrix& beta);

/// tr(K) - 2 tr(alpha' K^2 beta) + tr(beta'(K^2 + ridge I) beta) + l1 * sum_j |beta_j|_1
double skpca_objective(const FitContext& ctx, const Matrix& alpha, const Matrix& beta, double ridge,
                       double l1);

SparseBasis fit_skpca(const GramMatrix& K, const AlgoConfig& cfg);
SparseBasis fit_skpca(const FitContext& ctx, const AlgoConfig& cfg);

/// Classical KPCA basis: beta_j = E_j / sqrt(D_j).
SparseBasis kpca_dense(const GramMatrix& K, Index m);
SparseBasis kpca_dense(const EigenBasis& eig, Index m);

/// Keeps the `keep` largest-magnitude entries per column (lower index wins
/// ties) and renormalizes to unit kernel norm.
SparseBasis naive_threshold(const SparseBasis& dense, const GramMatrix& K, Index keep);

/// Percent of entries with |beta_ij| > 1e-12.
double sparsity_pct(const Matrix& beta);
double sparsity_pct(const SparseBasis& basis);

/// Mean number of nonzero entries per column, rounded to the nearest integer
/// (at least 1). Used to match naive thresholding to an SKPCA fit.
Index mean_nonzeros_per_column(const Matrix& beta);

/// Scales each column c to c' K c = 1. Returns indices of columns left at zero.
std::vector<Index> normalize_columns(Matrix& columns, const Matrix& K);

}  // namespace skpca
