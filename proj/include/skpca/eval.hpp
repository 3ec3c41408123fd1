#pragma once

// Detection metrics and the experiment protocols built on them: F1, ROC and
// AUROC with outliers as the positive class, sparsity sweeps, repeated
// seeded trials and the representability probe.

#include "skpca/detector.hpp"
#include "skpca/kernel.hpp"
#include "skpca/skpca.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace skpca {

struct LabeledScores {
    std::vector<double> scores;
    std::vector<Label> labels;

    std::size_t positives() const;
    std::size_t negatives() const;
    /// Equal nonzero lengths, finite scores; optionally both classes present.
    void validate(bool need_both_classes) const;
};

/// F1 with outlier as the positive class; predicted outlier iff score > threshold.
double f1_score(const LabeledScores& ls, double threshold);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // predicted outlier iff score >= threshold (+inf for the origin)
};

/// One point per distinct score (equal scores grouped), from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(const LabeledScores& ls);

/// Trapezoidal area under roc_curve.
double auroc(const LabeledScores& ls);

// ---------------------------------------------------------------------------
// Datasets and splits

struct DatasetPool {
    DataMatrix inliers;
    DataMatrix outliers;
};

struct SplitCounts {
    Index train = 0;
    Index test_inliers = 0;
    Index test_outliers = 0;
};

struct Split {
    DataMatrix train;
    RowMatrix test;
    std::vector<Label> test_labels;
    std::vector<std::int64_t> test_ids;
};

/// Uniform sampling without replacement per class: train and test inliers are
/// disjoint draws from the inlier pool.
Split draw_split(const DatasetPool& pool, const SplitCounts& counts, std::uint64_t seed);

/// Inliers on two concentric noisy rings (radii 1 and 2), outliers uniform
/// on the square [-2.5, 2.5]^2.
DatasetPool two_ring_pool(Index inliers, Index outliers, std::uint64_t seed, double noise = 0.1);

/// Standard Gaussian sample in `dim` dimensions.
DataMatrix gaussian_sample(Index n, Index dim, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
    AlgoConfig algo;
    std::optional<double> sigma_sq;  // unset: heuristic on the training split
    ThresholdPolicy policy;
};

struct MethodMetrics {
    double f1 = 0.0;
    double auroc = 0.0;
    double sparsity_pct = 0.0;
    Index nonzeros_per_pc = 0;
    bool missing = false;  // degenerate fit, no metrics
};

struct SplitEvaluation {
    double sigma_sq = 0.0;
    double ridge = 0.0;
    MethodMetrics skpca;
    MethodMetrics dense;
    MethodMetrics naive;  // matched to the SKPCA nonzeros per PC
    LabeledScores skpca_scores;
    LabeledScores dense_scores;
    LabeledScores naive_scores;
    std::optional<DetectorModel> model;  // the SKPCA detector
    SparseBasis basis;
};

SplitEvaluation evaluate_split(const Split& split, const ExperimentConfig& cfg);

struct SweepPoint {
    double l1_ratio = 0.0;
    MethodMetrics skpca;
    MethodMetrics naive;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    MethodMetrics dense;
    double sigma_sq = 0.0;
};

SweepResult sparsity_sweep(const Split& split, std::span<const double> grid, const ExperimentConfig& cfg);

struct TrialRecord {
    std::uint64_t seed = 0;
    MethodMetrics skpca;
    MethodMetrics dense;
    MethodMetrics naive;
};

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for one value
};

Summary summarize(std::span<const double> values);

struct TrialStats {
    std::vector<TrialRecord> trials;
    Summary f1;
    Summary sparsity;
    Summary auroc;

    std::vector<std::uint64_t> seeds() const;
    std::vector<double> f1_values() const;
    std::vector<double> sparsity_values() const;
};

/// Trial t uses split seed base_seed + t.
TrialStats repeated_trials(const DatasetPool& pool, const SplitCounts& counts,
                           const ExperimentConfig& cfg, int n_trials, std::uint64_t base_seed,
                           Exec exec = Exec::parallel);

// ---------------------------------------------------------------------------
// Representability probe

struct ProbeReport {
    Index m_total = 0;
    Index n_subset = 0;
    double d_max_subset = 0.0;          // diameter of the chosen subset
    double max_kernel_deviation = 0.0;  // max |k(x_i,x') - k(x_f(i),x')| over held-out i, queries x'
    double eigvec_residual = 0.0;       // relative residual of the top eigenvector on the subset columns
    double max_nearest_distance = 0.0;  // max ||x_i - x_f(i)|| over held-out i
    double max_query_distance = 0.0;    // max ||x' - x_g(x')|| over queries
    // Ranges of the three factors in
    // k(x_i,x') = k(x_f(i),x') * f_self * f_cross * f_query
    double min_self_factor = 1.0;
    double min_cross_factor = 1.0, max_cross_factor = 1.0;
    double min_query_factor = 1.0, max_query_factor = 1.0;
    std::vector<Index> subset;
};

/// Picks the smallest-diameter subset among `trials` random candidates and
/// measures how well held-out kernel columns are represented by it. Queries
/// are drawn from a diagonal Gaussian matched to X's mean and spread.
ProbeReport representability_probe(const DataMatrix& X, Index n_subset, const KernelParams& params,
                                   int trials, std::uint64_t seed, Index queries = 100);
ProbeReport representability_probe(const DataMatrix& X, Index n_subset, const KernelParams& params,
                                   int trials, std::uint64_t seed, const RowMatrix& queries);

}  // namespace skpca
