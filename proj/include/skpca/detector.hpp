#pragma once

// Reconstruction-error outlier detection in kernel feature space.
//
// score(z) = ||phi(z) - phi0||^2 - sum_j <phi(z) - phi0, v_j>^2
//
// with v_j = sum_i c_ij (phi(x_i) - phi0) built from the (sparse) basis.
// The model keeps only the training points that carry a nonzero coefficient;
// the training mean phi0 enters through scalar constants and a side array of
// points used for the kernel mean (1/n) sum_i k(z, x_i).

#include "skpca/kernel.hpp"
#include "skpca/skpca.hpp"

#include <cstdint>
#include <vector>

namespace skpca {

enum class Label { inlier, outlier };

struct Verdict {
    double score = 0.0;
    Label label = Label::inlier;
};

struct ThresholdPolicy {
    enum class Kind { quantile, external };
    Kind kind = Kind::quantile;
    double value = 0.95;

    static ThresholdPolicy quantile(double p) { return {Kind::quantile, p}; }
    static ThresholdPolicy external(double t) { return {Kind::external, t}; }
};

struct DetectorModel {
    KernelParams params;
    Index q = 0;
    Index n_train = 0;

    // Support of the coefficient matrix.
    RowMatrix retained_points;                   // r x d
    std::vector<std::int64_t> retained_ids;
    std::vector<Index> retained_index;           // positions in the training set
    Matrix coeffs;                               // r x q
    Vector retained_row_means;                   // raw Gram row means at retained points
    double grand_mean = 0.0;                     // (1/n^2) sum_ij k(x_i, x_j)

    // Side array for the kernel mean; all training points with unit weights
    // when exact, representatives with multiplicity weights otherwise.
    RowMatrix potential_points;
    Vector potential_weights;
    bool potential_exact = true;
    double potential_error_bound = 0.0;  // bound on |approx - exact| of the kernel mean

    double threshold = 0.0;
    std::vector<Index> dropped_columns;  // zero basis columns left out of q

    Index dim() const noexcept { return retained_points.cols(); }
    Index retained_count() const noexcept { return retained_points.rows(); }
    double mean_sq_term() const noexcept { return grand_mean; }
    std::size_t nonzero_coeffs() const;
    void validate() const;
};

struct ScoreDetail {
    double potential = 0.0;
    double projection_energy = 0.0;
    double raw = 0.0;    // potential - projection energy, unclamped
    double score = 0.0;  // max(raw, 0)
    bool clamped = false;
};

struct BatchScores {
    std::vector<double> scores;
    std::size_t clamped = 0;  // scores raised to 0 from a negative raw value
};

double spherical_potential(std::span<const double> z, const DetectorModel& model);
ScoreDetail score_detail(std::span<const double> z, const DetectorModel& model);
double reconstruction_error(std::span<const double> z, const DetectorModel& model);
Verdict classify(std::span<const double> z, const DetectorModel& model);

BatchScores score_batch(const RowMatrix& Z, const DetectorModel& model, Exec exec = Exec::parallel);

/// Builds a model from basis.normalized_beta. Zero columns are dropped from q
/// (listed in dropped_columns); an all-zero basis is an error.
DetectorModel fit_detector(const DataMatrix& X, const SparseBasis& basis, const KernelParams& params,
                           ThresholdPolicy policy = {}, Exec exec = Exec::parallel);
DetectorModel fit_detector(const DataMatrix& X, const GramMatrix& raw, const SparseBasis& basis,
                           ThresholdPolicy policy = {}, Exec exec = Exec::parallel);

/// Nearest-rank quantile: the ceil(p*n)-th smallest value.
double quantile_threshold(std::vector<double> values, double p);

/// Drops the full-training side array unless keep_potential_exact, replacing
/// it by the retained points weighted by how many training points they are
/// nearest to; potential_error_bound reports the induced error bound.
DetectorModel compress(const DetectorModel& model, bool keep_potential_exact);

}  // namespace skpca
