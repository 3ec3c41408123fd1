#include "skpca/kernel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef SKPCA_HAVE_OPENMP
#include <omp.h>
#endif

namespace skpca {

namespace {

constexpr std::string_view kModule = "kernel_core";

double squared_distance(const double* x, const double* y, Index d) {
    double s = 0.0;
    for (Index k = 0; k < d; ++k) {
        const double diff = x[k] - y[k];
        s += diff * diff;
    }
    return s;
}

}  // namespace

int parallel_threads() {
#ifdef SKPCA_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

DataMatrix DataMatrix::make(RowMatrix rows, std::vector<std::int64_t> ids, Index min_rows) {
    require(rows.rows() >= min_rows, kModule,
            "data matrix needs at least " + std::to_string(min_rows) + " rows, got " +
                std::to_string(rows.rows()));
    require(rows.cols() >= 1, kModule, "data matrix needs dimension >= 1");
    require(rows.allFinite(), kModule, "data matrix contains non-finite entries");
    if (ids.empty()) {
        ids.resize(static_cast<std::size_t>(rows.rows()));
        std::iota(ids.begin(), ids.end(), std::int64_t{0});
    }
    require(static_cast<Index>(ids.size()) == rows.rows(), kModule,
            "row id count does not match row count");
    DataMatrix out;
    out.rows_ = std::move(rows);
    out.ids_ = std::move(ids);
    return out;
}

DataMatrix DataMatrix::subset(std::span<const Index> positions, Index min_rows) const {
    RowMatrix sub(static_cast<Index>(positions.size()), dim());
    std::vector<std::int64_t> sub_ids;
    sub_ids.reserve(positions.size());
    for (std::size_t r = 0; r < positions.size(); ++r) {
        const Index p = positions[r];
        require(p >= 0 && p < size(), kModule, "subset position out of range");
        sub.row(static_cast<Index>(r)) = rows_.row(p);
        sub_ids.push_back(ids_[static_cast<std::size_t>(p)]);
    }
    return make(std::move(sub), std::move(sub_ids), min_rows);
}

KernelParams KernelParams::make(double sigma_sq) {
    require(std::isfinite(sigma_sq) && sigma_sq > 0.0, kModule,
            "sigma_sq must be positive and finite");
    return KernelParams{sigma_sq};
}

CenteringStats CenteringStats::of(const GramMatrix& raw) {
    CenteringStats s;
    s.row_means = raw.values.rowwise().mean();
    s.grand_mean = s.row_means.mean();
    return s;
}

double rbf_eval(std::span<const double> x, std::span<const double> y, const KernelParams& params) {
    require(x.size() == y.size(), kModule, "rbf_eval dimension mismatch");
    require(params.sigma_sq > 0.0, kModule, "sigma_sq must be positive");
    for (std::size_t k = 0; k < x.size(); ++k) {
        require(std::isfinite(x[k]) && std::isfinite(y[k]), kModule, "rbf_eval non-finite input");
    }
    const double d2 = squared_distance(x.data(), y.data(), static_cast<Index>(x.size()));
    return std::exp(-d2 / (2.0 * params.sigma_sq));
}

KernelParams sigma_heuristic(const DataMatrix& X, Exec exec) {
    const Index n = X.size();
    require(n >= 2, kModule, "sigma heuristic needs at least two points");
    const Index d = X.dim();
    const double* base = X.rows().data();

    // Per-row partial sums, then an ordered reduction: the result does not
    // depend on the thread schedule.
    std::vector<double> partial(static_cast<std::size_t>(n), 0.0);
    auto row_sum = [&](Index i) {
        double s = 0.0;
        for (Index j = i + 1; j < n; ++j) s += squared_distance(base + i * d, base + j * d, d);
        partial[static_cast<std::size_t>(i)] = s;
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (Index i = 0; i < n; ++i) row_sum(i);
    } else {
        for (Index i = 0; i < n; ++i) row_sum(i);
    }
    const double total = std::accumulate(partial.begin(), partial.end(), 0.0);
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    const double sigma_sq = total / pairs;
    require(sigma_sq > 0.0, kModule, "all points are identical; sigma heuristic is zero");
    return KernelParams{sigma_sq};
}

GramMatrix gram(const DataMatrix& X, const KernelParams& params, Exec exec) {
    require(params.sigma_sq > 0.0 && std::isfinite(params.sigma_sq), kModule,
            "sigma_sq must be positive and finite");
    const Index n = X.size();
    const Index d = X.dim();
    const double* base = X.rows().data();
    const double scale = -1.0 / (2.0 * params.sigma_sq);

    GramMatrix K;
    K.values.resize(n, n);
    K.params = params;
    K.source_ids = X.ids();
    Matrix& v = K.values;

    auto fill_row = [&](Index i) {
        v(i, i) = 1.0;
        for (Index j = i + 1; j < n; ++j) {
            const double k = std::exp(scale * squared_distance(base + i * d, base + j * d, d));
            v(i, j) = k;
            v(j, i) = k;
        }
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 8)
        for (Index i = 0; i < n; ++i) fill_row(i);
    } else {
        for (Index i = 0; i < n; ++i) fill_row(i);
    }
    return K;
}

Vector kernel_row(std::span<const double> z, const DataMatrix& X, const KernelParams& params) {
    require(static_cast<Index>(z.size()) == X.dim(), kModule, "query dimension mismatch");
    for (double c : z) require(std::isfinite(c), kModule, "query contains non-finite entries");
    const Index n = X.size();
    const Index d = X.dim();
    const double scale = -1.0 / (2.0 * params.sigma_sq);
    Vector k(n);
    for (Index i = 0; i < n; ++i) {
        k(i) = std::exp(scale * squared_distance(z.data(), X.rows().data() + i * d, d));
    }
    return k;
}

GramMatrix center_gram(const GramMatrix& raw) {
    require(raw.values.rows() == raw.values.cols(), kModule, "center_gram needs a square matrix");
    const CenteringStats s = CenteringStats::of(raw);
    const Index n = raw.size();
    GramMatrix out;
    out.params = raw.params;
    out.source_ids = raw.source_ids;
    out.centered = true;
    out.values.resize(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            out.values(i, j) = raw.values(i, j) - s.row_means(i) - s.row_means(j) + s.grand_mean;
        }
    }
    // Symmetrize exactly; the two triangles differ only by rounding order.
    out.values = 0.5 * (out.values + out.values.transpose()).eval();
    return out;
}

Vector center_cross_kernel(const Vector& k_vec, const CenteringStats& stats) {
    require(k_vec.size() == stats.row_means.size(), kModule,
            "cross-kernel length does not match training size");
    const double mean_k = k_vec.mean();
    Vector out(k_vec.size());
    for (Index i = 0; i < k_vec.size(); ++i) {
        out(i) = k_vec(i) - mean_k - stats.row_means(i) + stats.grand_mean;
    }
    return out;
}

Vector center_cross_kernel(const Vector& k_vec, const GramMatrix& raw) {
    require(!raw.centered, kModule, "center_cross_kernel needs the raw (uncentered) Gram matrix");
    return center_cross_kernel(k_vec, CenteringStats::of(raw));
}

void fix_column_signs(Matrix& columns) {
    for (Index j = 0; j < columns.cols(); ++j) {
        Index arg = 0;
        double best = -1.0;
        for (Index i = 0; i < columns.rows(); ++i) {
            const double a = std::abs(columns(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (best > 0.0 && columns(arg, j) < 0.0) columns.col(j) *= -1.0;
    }
}

EigenBasis top_eigen(const Matrix& K, Index m) {
    require(m >= 1, kModule, "top_eigen needs m >= 1");
    require(K.rows() == K.cols(), kModule, "top_eigen needs a square matrix");
    const Index n = K.rows();
    require(m <= n, kModule, "top_eigen: m exceeds matrix size");
    const double scale = K.cwiseAbs().maxCoeff();
    const double asym = (K - K.transpose()).cwiseAbs().maxCoeff();
    require(asym <= 1e-12 * std::max(scale, 1.0), kModule,
            "matrix is not symmetric (residual " + std::to_string(asym) + ")");

    Eigen::SelfAdjointEigenSolver<Matrix> solver(K);
    require(solver.info() == Eigen::Success, kModule, "eigendecomposition failed");
    // Eigen returns ascending order.
    const Vector& ev = solver.eigenvalues();
    const double lambda_max = ev(n - 1);

    EigenBasis out;
    out.rank_tolerance = 1e-10 * std::max(lambda_max, 0.0);
    Index kept = 0;
    while (kept < m && ev(n - 1 - kept) > out.rank_tolerance) ++kept;
    out.truncated = kept < m;
    out.values.resize(kept);
    out.vectors.resize(n, kept);
    for (Index j = 0; j < kept; ++j) {
        out.values(j) = ev(n - 1 - j);
        out.vectors.col(j) = solver.eigenvectors().col(n - 1 - j);
    }
    fix_column_signs(out.vectors);
    return out;
}

EigenBasis top_eigen(const GramMatrix& K, Index m) { return top_eigen(K.values, m); }

}  // namespace skpca
