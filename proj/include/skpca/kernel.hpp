#pragma once

// RBF kernel evaluation, Gram matrices, kernel-space centering and the
// truncated eigendecomposition consumed by the rest of the pipeline.

#include "skpca/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace skpca {

/// n samples of dimension d, one per row, with stable integer ids.
class DataMatrix {
public:
    DataMatrix() = default;

    /// Validates n >= min_rows, d >= 1 and finiteness. Ids default to 0..n-1.
    static DataMatrix make(RowMatrix rows, std::vector<std::int64_t> ids = {},
                           Index min_rows = 2);

    Index size() const noexcept { return rows_.rows(); }
    Index dim() const noexcept { return rows_.cols(); }
    const RowMatrix& rows() const noexcept { return rows_; }
    const std::vector<std::int64_t>& ids() const noexcept { return ids_; }

    std::span<const double> row(Index i) const {
        return {rows_.data() + i * rows_.cols(), static_cast<std::size_t>(rows_.cols())};
    }

    /// Rows at the given positions, carrying their ids along.
    DataMatrix subset(std::span<const Index> positions, Index min_rows = 1) const;

private:
    RowMatrix rows_;
    std::vector<std::int64_t> ids_;
};

struct KernelParams {
    double sigma_sq = 1.0;

    static KernelParams make(double sigma_sq);
};

struct GramMatrix {
    Matrix values;
    bool centered = false;
    KernelParams params;
    std::vector<std::int64_t> source_ids;

    Index size() const noexcept { return values.rows(); }
};

/// Row means and grand mean of a raw Gram matrix. These are the constants
/// needed to center kernel rows of query points.
struct CenteringStats {
    Vector row_means;
    double grand_mean = 0.0;

    static CenteringStats of(const GramMatrix& raw);
};

struct EigenBasis {
    Vector values;   // nonincreasing, all > rank_tolerance
    Matrix vectors;  // n x r, orthonormal columns
    double rank_tolerance = 0.0;
    bool truncated = false;  // fewer than the requested pairs survived the floor

    Index rank() const noexcept { return values.size(); }
};

double rbf_eval(std::span<const double> x, std::span<const double> y, const KernelParams& params);

/// sigma^2 = mean squared distance over unordered pairs i != j.
KernelParams sigma_heuristic(const DataMatrix& X, Exec exec = Exec::parallel);

GramMatrix gram(const DataMatrix& X, const KernelParams& params, Exec exec = Exec::parallel);

/// Raw kernel values k(z, x_i) for every row of X.
Vector kernel_row(std::span<const double> z, const DataMatrix& X, const KernelParams& params);

/// Double centering K - 1K - K1 + 1K1.
GramMatrix center_gram(const GramMatrix& raw);

/// Centers a query kernel row against the raw training Gram statistics:
/// k_i - mean(k) - rowmean_i + grandmean.
Vector center_cross_kernel(const Vector& k_vec, const GramMatrix& raw);
Vector center_cross_kernel(const Vector& k_vec, const CenteringStats& stats);

/// Largest m eigenpairs, floored at 1e-10 * lambda_max. The sign of each
/// eigenvector is fixed so that its largest-magnitude entry is positive.
EigenBasis top_eigen(const GramMatrix& K, Index m);
EigenBasis top_eigen(const Matrix& K, Index m);

/// Flips the sign of every column so its largest-magnitude entry is positive
/// (first one wins on ties). Zero columns are left alone.
void fix_column_signs(Matrix& columns);

}  // namespace skpca
