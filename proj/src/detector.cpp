#include "skpca/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace skpca {

namespace {

constexpr std::string_view kModule = "detector";

double sq_dist(const double* a, const double* b, Index d) {
    double s = 0.0;
    for (Index k = 0; k < d; ++k) {
        const double t = a[k] - b[k];
        s += t * t;
    }
    return s;
}

// (1/n) sum_i k(z, x_i), evaluated over the side array.
double kernel_mean(std::span<const double> z, const DetectorModel& model) {
    const Index d = model.dim();
    const double scale = -1.0 / (2.0 * model.params.sigma_sq);
    const double* base = model.potential_points.data();
    double s = 0.0;
    for (Index p = 0; p < model.potential_points.rows(); ++p) {
        s += model.potential_weights(p) * std::exp(scale * sq_dist(z.data(), base + p * d, d));
    }
    return s / static_cast<double>(model.n_train);
}

void check_query(std::span<const double> z, const DetectorModel& model) {
    require(static_cast<Index>(z.size()) == model.dim(), kModule,
            "query dimension " + std::to_string(z.size()) + " does not match model dimension " +
                std::to_string(model.dim()));
    for (double c : z) require(std::isfinite(c), kModule, "query contains non-finite entries");
}

}  // namespace

std::size_t DetectorModel::nonzero_coeffs() const {
    return static_cast<std::size_t>((coeffs.array() != 0.0).count());
}

void DetectorModel::validate() const {
    require(q >= 1, kModule, "model needs q >= 1");
    require(params.sigma_sq > 0.0, kModule, "model sigma_sq must be positive");
    require(coeffs.rows() == retained_count() && coeffs.cols() == q, kModule,
            "coefficient matrix shape does not match retained points and q");
    require(static_cast<Index>(retained_ids.size()) == retained_count() &&
                static_cast<Index>(retained_index.size()) == retained_count() &&
                retained_row_means.size() == retained_count(),
            kModule, "retained point metadata is inconsistent");
    require(potential_points.rows() == potential_weights.size() &&
                (potential_points.rows() == 0 || potential_points.cols() == dim()),
            kModule, "potential side array is inconsistent");
    require(potential_points.rows() >= 1, kModule, "potential side array is empty");
    require(n_train >= 1, kModule, "n_train must be >= 1");
    require(std::isfinite(threshold), kModule, "threshold must be finite");
    for (Index j = 0; j < q; ++j) {
        require((coeffs.col(j).array() != 0.0).any(), kModule,
                "coefficient column " + std::to_string(j) + " has no nonzero entry");
    }
    for (Index i = 0; i < retained_count(); ++i) {
        require((coeffs.row(i).array() != 0.0).any(), kModule,
                "retained point " + std::to_string(i) + " carries no coefficient");
    }
}

double spherical_potential(std::span<const double> z, const DetectorModel& model) {
    check_query(z, model);
    // k(z, z) = 1 for the RBF kernel.
    return 1.0 - 2.0 * kernel_mean(z, model) + model.grand_mean;
}

ScoreDetail score_detail(std::span<const double> z, const DetectorModel& model) {
    check_query(z, model);
    const Index r = model.retained_count();
    const Index d = model.dim();
    const double mean_k = kernel_mean(z, model);
    const double scale = -1.0 / (2.0 * model.params.sigma_sq);

    Vector centered(r);
    for (Index i = 0; i < r; ++i) {
        const double k = std::exp(scale * sq_dist(z.data(), model.retained_points.data() + i * d, d));
        centered(i) = k - mean_k - model.retained_row_means(i) + model.grand_mean;
    }
    ScoreDetail out;
    out.potential = 1.0 - 2.0 * mean_k + model.grand_mean;
    for (Index j = 0; j < model.q; ++j) {
        const double proj = model.coeffs.col(j).dot(centered);
        out.projection_energy += proj * proj;
    }
    out.raw = out.potential - out.projection_energy;
    out.clamped = out.raw < 0.0;
    out.score = out.clamped ? 0.0 : out.raw;
    return out;
}

double reconstruction_error(std::span<const double> z, const DetectorModel& model) {
    return score_detail(z, model).score;
}

Verdict classify(std::span<const double> z, const DetectorModel& model) {
    Verdict v;
    v.score = reconstruction_error(z, model);
    v.label = v.score > model.threshold ? Label::outlier : Label::inlier;
    return v;
}

BatchScores score_batch(const RowMatrix& Z, const DetectorModel& model, Exec exec) {
    require(Z.cols() == model.dim(), kModule, "batch dimension does not match model");
    const Index n = Z.rows();
    BatchScores out;
    out.scores.resize(static_cast<std::size_t>(n));
    std::vector<char> clamped(static_cast<std::size_t>(n), 0);
    auto one = [&](Index i) {
        const ScoreDetail s = score_detail(
            std::span<const double>(Z.data() + i * Z.cols(), static_cast<std::size_t>(Z.cols())),
            model);
        out.scores[static_cast<std::size_t>(i)] = s.score;
        clamped[static_cast<std::size_t>(i)] = s.clamped ? 1 : 0;
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < n; ++i) one(i);
    } else {
        for (Index i = 0; i < n; ++i) one(i);
    }
    out.clamped = static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), 1));
    return out;
}

double quantile_threshold(std::vector<double> values, double p) {
    require(!values.empty(), kModule, "quantile of an empty set");
    require(p > 0.0 && p <= 1.0, kModule, "quantile must lie in (0, 1]");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

DetectorModel fit_detector(const DataMatrix& X, const GramMatrix& raw, const SparseBasis& basis,
                           ThresholdPolicy policy, Exec exec) {
    require(!raw.centered, kModule, "fit_detector needs the raw (uncentered) Gram matrix");
    require(raw.size() == X.size(), kModule, "Gram matrix size does not match the data");
    const Matrix& B = basis.normalized_beta;
    require(B.rows() == X.size(), kModule, "basis was not fitted on this data (row count differs)");

    std::vector<Index> cols;
    DetectorModel model;
    for (Index j = 0; j < B.cols(); ++j) {
        if ((B.col(j).array() != 0.0).any()) {
            cols.push_back(j);
        } else {
            model.dropped_columns.push_back(j);
        }
    }
    require(!cols.empty(), kModule, "basis is degenerate (all coefficient columns are zero)");

    const CenteringStats stats = CenteringStats::of(raw);
    for (Index i = 0; i < B.rows(); ++i) {
        bool any = false;
        for (Index j : cols) any = any || B(i, j) != 0.0;
        if (any) model.retained_index.push_back(i);
    }
    const Index r = static_cast<Index>(model.retained_index.size());
    const Index q = static_cast<Index>(cols.size());

    model.params = raw.params;
    model.q = q;
    model.n_train = X.size();
    model.retained_points.resize(r, X.dim());
    model.coeffs.resize(r, q);
    model.retained_row_means.resize(r);
    for (Index k = 0; k < r; ++k) {
        const Index i = model.retained_index[static_cast<std::size_t>(k)];
        model.retained_points.row(k) = X.rows().row(i);
        model.retained_ids.push_back(X.ids()[static_cast<std::size_t>(i)]);
        model.retained_row_means(k) = stats.row_means(i);
        for (Index c = 0; c < q; ++c) model.coeffs(k, c) = B(i, cols[static_cast<std::size_t>(c)]);
    }
    model.grand_mean = stats.grand_mean;
    model.potential_points = X.rows();
    model.potential_weights = Vector::Ones(X.size());
    model.potential_exact = true;

    if (policy.kind == ThresholdPolicy::Kind::external) {
        require(std::isfinite(policy.value), kModule, "external threshold must be finite");
        model.threshold = policy.value;
    } else {
        const BatchScores train = score_batch(X.rows(), model, exec);
        model.threshold = quantile_threshold(train.scores, policy.value);
    }
    model.validate();
    return model;
}

DetectorModel fit_detector(const DataMatrix& X, const SparseBasis& basis, const KernelParams& params,
                           ThresholdPolicy policy, Exec exec) {
    return fit_detector(X, gram(X, params, exec), basis, policy, exec);
}

DetectorModel compress(const DetectorModel& model, bool keep_potential_exact) {
    model.validate();
    DetectorModel out = model;
    if (keep_potential_exact) return out;

    const Index d = model.dim();
    const Index r = model.retained_count();
    Vector weights = Vector::Zero(r);
    double moved = 0.0;  // sum_p w_p * ||p - rep(p)||
    for (Index p = 0; p < model.potential_points.rows(); ++p) {
        const double* pt = model.potential_points.data() + p * d;
        Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < r; ++i) {
            const double dist = sq_dist(pt, model.retained_points.data() + i * d, d);
            if (dist < best_d) {
                best_d = dist;
                best = i;
            }
        }
        weights(best) += model.potential_weights(p);
        moved += model.potential_weights(p) * std::sqrt(best_d);
    }
    // |d/dr exp(-r^2 / (2 s^2))| <= exp(-1/2) / s.
    const double lipschitz = std::exp(-0.5) / std::sqrt(model.params.sigma_sq);
    out.potential_points = model.retained_points;
    out.potential_weights = std::move(weights);
    out.potential_exact = false;
    out.potential_error_bound =
        model.potential_error_bound + lipschitz * moved / static_cast<double>(model.n_train);
    return out;
}

}  // namespace skpca
