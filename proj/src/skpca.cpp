#include "skpca/skpca.hpp"
#include "skpca/elastic_net.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

namespace skpca {

namespace {

constexpr std::string_view kModule = "skpca";
constexpr double kZero = 1e-12;

bool is_zero_column(const Matrix& M, Index j) {
    return M.col(j).cwiseAbs().maxCoeff() <= kZero;
}

// Flips alpha and beta columns together so beta's largest-magnitude entry is
// positive; a zero beta column takes its sign from alpha.
void fix_pair_signs(Matrix& alpha, Matrix& beta) {
    for (Index j = 0; j < beta.cols(); ++j) {
        const Matrix& ref = is_zero_column(beta, j) ? alpha : beta;
        Index arg = 0;
        ref.col(j).cwiseAbs().maxCoeff(&arg);
        if (ref(arg, j) < 0.0) {
            alpha.col(j) *= -1.0;
            beta.col(j) *= -1.0;
        }
    }
}

}  // namespace

void AlgoConfig::validate() const {
    require(m >= 1, kModule, "component count m must be >= 1");
    require(!ridge || (std::isfinite(*ridge) && *ridge > 0.0), kModule, "ridge must be positive");
    require(std::isfinite(l1_ratio) && l1_ratio >= 0.0, kModule, "l1_ratio must be >= 0");
    require(outer_tol > 0.0, kModule, "outer_tol must be positive");
    require(max_outer_iter >= 1, kModule, "max_outer_iter must be >= 1");
    require(enet_tol > 0.0, kModule, "enet_tol must be positive");
    require(enet_max_iter >= 1, kModule, "enet_max_iter must be >= 1");
}

double effective_ridge(const AlgoConfig& cfg, const EigenBasis& eig) {
    if (cfg.ridge) return *cfg.ridge;
    const double lambda_max = eig.rank() > 0 ? eig.values(0) : 0.0;
    require(lambda_max > 0.0, kModule, "Gram matrix has no positive eigenvalue");
    return 1e-4 * lambda_max * lambda_max;
}

FitContext FitContext::prepare(const GramMatrix& K) {
    FitContext ctx;
    ctx.K = &K;
    ctx.eig = top_eigen(K, K.size());
    Matrix K2 = K.values * K.values;
    K2 = 0.5 * (K2 + K2.transpose()).eval();
    ctx.K2 = std::make_shared<const Matrix>(std::move(K2));
    return ctx;
}

Matrix init_alpha(const EigenBasis& eig, Index m) {
    require(m >= 1, kModule, "m must be >= 1");
    require(m <= eig.rank(), kModule,
            "m = " + std::to_string(m) + " exceeds retained rank " + std::to_string(eig.rank()));
    Matrix alpha(eig.vectors.rows(), m);
    for (Index j = 0; j < m; ++j) alpha.col(j) = eig.vectors.col(j) / std::sqrt(eig.values(j));
    return alpha;
}

Matrix update_beta(const FitContext& ctx, const Matrix& alpha, const AlgoConfig& cfg,
                   const Matrix* warm_start) {
    const Matrix& K2 = *ctx.K2;
    const Index n = K2.rows();
    const Index m = alpha.cols();
    require(alpha.rows() == n, kModule, "alpha has the wrong number of rows");
    require(alpha.allFinite(), kModule, "alpha has non-finite entries");
    const double ridge = effective_ridge(cfg, ctx.eig);
    const double l1 = cfg.l1_ratio * ridge;
    const Matrix linear = K2 * alpha;

    if (l1 == 0.0) {
        Matrix A = K2;
        A.diagonal().array() += ridge;
        Eigen::LLT<Matrix> llt(A);
        require(llt.info() == Eigen::Success, kModule, "K^2 + ridge I is not positive definite");
        return llt.solve(linear);
    }

    Matrix beta(n, m);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m));
    auto solve_column = [&](Index j) {
        try {
            EnetProblem p{ctx.K2, ridge, l1, linear.col(j)};
            EnetOptions opts;
            opts.tol = cfg.enet_tol;
            opts.max_iter = cfg.enet_max_iter;
            if (warm_start) opts.warm_start = Vector(warm_start->col(j));
            beta.col(j) = solve_enet(p, opts).beta;
        } catch (...) {
            errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
    };
    if (cfg.exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (Index j = 0; j < m; ++j) solve_column(j);
    } else {
        for (Index j = 0; j < m; ++j) solve_column(j);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return beta;
}

Matrix update_beta(const GramMatrix& K, const Matrix& alpha, const AlgoConfig& cfg) {
    const FitContext ctx = FitContext::prepare(K);
    return update_beta(ctx, alpha, cfg);
}

ProcrustesResult generalized_procrustes(const Matrix& B, const EigenBasis& q_eig) {
    const Index m = B.cols();
    const Index r = q_eig.rank();
    require(B.rows() == q_eig.vectors.rows(), kModule, "B and Q sizes differ");
    require(B.allFinite(), kModule, "B has non-finite entries");
    require(m <= r, kModule,
            "rank(Q) = " + std::to_string(r) + " is below the component count " + std::to_string(m));

    const Vector inv_sqrt = q_eig.values.array().rsqrt();
    // B* = Sigma^{-1/2} U' B, an r x m matrix.
    const Matrix b_star = inv_sqrt.asDiagonal() * (q_eig.vectors.transpose() * B);
    Eigen::JacobiSVD<Matrix> svd(b_star, Eigen::ComputeThinU | Eigen::ComputeThinV);

    ProcrustesResult out;
    out.singular_values = svd.singularValues();
    const double smax = out.singular_values.size() ? out.singular_values(0) : 0.0;
    Index nonzero = 0;
    for (Index k = 0; k < out.singular_values.size(); ++k) {
        if (out.singular_values(k) > 1e-12 * std::max(smax, 1e-300) && smax > 0.0) ++nonzero;
    }
    out.degenerate = nonzero < m;
    const Matrix alpha_star = svd.matrixU() * svd.matrixV().transpose();
    out.alpha = q_eig.vectors * (inv_sqrt.asDiagonal() * alpha_star);
    return out;
}

ProcrustesResult generalized_procrustes(const Matrix& B, const Matrix& Q) {
    return generalized_procrustes(B, top_eigen(Q, Q.rows()));
}

ProcrustesResult update_alpha(const FitContext& ctx, const Matrix& beta) {
    require(beta.allFinite(), kModule, "beta has non-finite entries");
    return generalized_procrustes(*ctx.K2 * beta, ctx.eig);
}

ProcrustesResult update_alpha(const GramMatrix& K, const Matrix& beta) {
    const FitContext ctx = FitContext::prepare(K);
    return update_alpha(ctx, beta);
}

double skpca_objective(const FitContext& ctx, const Matrix& alpha, const Matrix& beta, double ridge,
                       double l1) {
    const Matrix& K2 = *ctx.K2;
    const Matrix K2beta = K2 * beta;
    double l1_term = 0.0;
    for (Index j = 0; j < beta.cols(); ++j) l1_term += beta.col(j).lpNorm<1>();
    return ctx.K->values.trace() - 2.0 * (alpha.transpose() * K2beta).trace() +
           (beta.transpose() * K2beta).trace() + ridge * beta.squaredNorm() + l1 * l1_term;
}

std::vector<Index> normalize_columns(Matrix& columns, const Matrix& K) {
    std::vector<Index> zeros;
    for (Index j = 0; j < columns.cols(); ++j) {
        if (is_zero_column(columns, j)) {
            columns.col(j).setZero();
            zeros.push_back(j);
            continue;
        }
        const double norm_sq = columns.col(j).dot(K * columns.col(j));
        if (!(norm_sq > 0.0)) {
            columns.col(j).setZero();
            zeros.push_back(j);
            continue;
        }
        columns.col(j) /= std::sqrt(norm_sq);
    }
    return zeros;
}

SparseBasis fit_skpca(const FitContext& ctx, const AlgoConfig& cfg) {
    cfg.validate();
    require(ctx.K != nullptr && ctx.K2 != nullptr, kModule, "fit context is not prepared");
    require(cfg.m <= ctx.eig.rank(), kModule,
            "rank(K) = " + std::to_string(ctx.eig.rank()) + " is below m = " + std::to_string(cfg.m));

    SparseBasis out;
    out.ridge = effective_ridge(cfg, ctx.eig);
    out.l1 = cfg.l1_ratio * out.ridge;

    Matrix alpha = init_alpha(ctx.eig, cfg.m);
    Matrix beta;
    for (int it = 1; it <= cfg.max_outer_iter; ++it) {
        Matrix next = update_beta(ctx, alpha, cfg, it > 1 ? &beta : nullptr);
        alpha = update_alpha(ctx, next).alpha;
        out.objective_trace.push_back(skpca_objective(ctx, alpha, next, out.ridge, out.l1));
        out.outer_iterations = it;

        const double change =
            it > 1 ? (next - beta).cwiseAbs().maxCoeff() : std::numeric_limits<double>::infinity();
        const double scale = next.size() ? next.cwiseAbs().maxCoeff() : 0.0;
        beta = std::move(next);
        if (change <= cfg.outer_tol * (1.0 + scale)) {
            out.converged = true;
            break;
        }
    }

    fix_pair_signs(alpha, beta);
    for (Index j = 0; j < beta.cols(); ++j) {
        for (Index i = 0; i < beta.rows(); ++i) {
            if (std::abs(beta(i, j)) <= kZero) beta(i, j) = 0.0;
        }
    }
    out.alpha = std::move(alpha);
    out.beta = std::move(beta);
    out.normalized_beta = out.beta;
    out.zero_columns = normalize_columns(out.normalized_beta, ctx.K->values);
    out.degenerate = static_cast<Index>(out.zero_columns.size()) == cfg.m;
    out.sparsity_pct = sparsity_pct(out.beta);
    return out;
}

SparseBasis fit_skpca(const GramMatrix& K, const AlgoConfig& cfg) {
    const FitContext ctx = FitContext::prepare(K);
    return fit_skpca(ctx, cfg);
}

SparseBasis kpca_dense(const GramMatrix& K, Index m) { return kpca_dense(top_eigen(K, m), m); }

SparseBasis kpca_dense(const EigenBasis& eig, Index m) {
    require(eig.rank() >= m, kModule,
            "m = " + std::to_string(m) + " exceeds rank " + std::to_string(eig.rank()));
    SparseBasis out;
    out.alpha = init_alpha(eig, m);
    out.beta = out.alpha;
    out.normalized_beta = out.alpha;
    out.sparsity_pct = sparsity_pct(out.beta);
    out.converged = true;
    return out;
}

SparseBasis naive_threshold(const SparseBasis& dense, const GramMatrix& K, Index keep) {
    const Index n = dense.size();
    require(keep >= 1, kModule, "naive threshold keep count must be >= 1");
    require(keep <= n, kModule, "naive threshold keep count exceeds the number of points");
    require(K.size() == n, kModule, "Gram matrix size does not match the basis");

    const Matrix& src = dense.normalized_beta;
    Matrix kept = Matrix::Zero(n, src.cols());
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index j = 0; j < src.cols(); ++j) {
        std::iota(idx.begin(), idx.end(), Index{0});
        std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
            return std::abs(src(a, j)) > std::abs(src(b, j));
        });
        for (Index r = 0; r < keep; ++r) {
            const Index i = idx[static_cast<std::size_t>(r)];
            kept(i, j) = src(i, j);
        }
    }
    SparseBasis out;
    out.alpha = dense.alpha;
    out.beta = kept;
    out.normalized_beta = std::move(kept);
    out.zero_columns = normalize_columns(out.normalized_beta, K.values);
    out.degenerate = static_cast<Index>(out.zero_columns.size()) == src.cols();
    out.sparsity_pct = sparsity_pct(out.beta);
    out.converged = true;
    return out;
}

double sparsity_pct(const Matrix& beta) {
    if (beta.size() == 0) return 0.0;
    const auto nonzero = (beta.array().abs() > kZero).count();
    return 100.0 * static_cast<double>(nonzero) / static_cast<double>(beta.size());
}

double sparsity_pct(const SparseBasis& basis) { return sparsity_pct(basis.beta); }

Index mean_nonzeros_per_column(const Matrix& beta) {
    if (beta.cols() == 0) return 1;
    const auto nonzero = (beta.array().abs() > kZero).count();
    const auto mean = static_cast<double>(nonzero) / static_cast<double>(beta.cols());
    return std::max<Index>(1, static_cast<Index>(std::llround(mean)));
}

}  // namespace skpca
