#include "doctest.h"
#include "support.hpp"

#include "skpca/detector.hpp"
#include "skpca/eval.hpp"

#include <algorithm>
#include <cmath>

using namespace skpca;

namespace {

// Explicit feature map for the 1-D RBF kernel:
// phi_k(x) = exp(-x^2 / (2 s)) (x / sqrt(s))^k / sqrt(k!), truncated.
Vector feature_map(double x, double s) {
    constexpr int terms = 80;
    Vector phi(terms);
    const double u = x / std::sqrt(s);
    double c = std::exp(-x * x / (2.0 * s));
    for (int k = 0; k < terms; ++k) {
        phi(k) = c;
        c *= u / std::sqrt(static_cast<double>(k + 1));
    }
    return phi;
}

DataMatrix line_data(std::vector<double> xs) {
    RowMatrix r(static_cast<Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) r(static_cast<Index>(i), 0) = xs[i];
    return DataMatrix::make(std::move(r), {}, 1);
}

struct Fitted {
    DataMatrix X;
    KernelParams params;
    GramMatrix raw;
    GramMatrix centered;
};

Fitted prepare(DataMatrix X) {
    Fitted f{std::move(X), {}, {}, {}};
    f.params = sigma_heuristic(f.X);
    f.raw = gram(f.X, f.params);
    f.centered = center_gram(f.raw);
    return f;
}

std::span<const double> row_of(const RowMatrix& R, Index i) {
    return {R.data() + i * R.cols(), static_cast<std::size_t>(R.cols())};
}

RowMatrix random_queries(Index n, Index d, double scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return RowMatrix(scale * test::random_matrix(n, d, rng));
}

}  // namespace

TEST_CASE("spherical_potential") {
    SUBCASE("single training point") {
        DetectorModel m;
        m.params = KernelParams::make(1.0);
        m.q = 1;
        m.n_train = 1;
        m.retained_points = RowMatrix::Constant(1, 2, 0.5);
        m.retained_ids = {0};
        m.retained_index = {0};
        m.coeffs = Matrix::Ones(1, 1);
        m.retained_row_means = Vector::Ones(1);
        m.grand_mean = 1.0;
        m.potential_points = m.retained_points;
        m.potential_weights = Vector::Ones(1);
        const std::vector<double> z{0.5, 0.5};
        CHECK(spherical_potential(z, m) == 0.0);
    }
    SUBCASE("explicit feature-space oracle") {
        const std::vector<double> xs{-0.7, 0.2, 1.1};
        const Fitted f = prepare(line_data(xs));
        const SparseBasis b = kpca_dense(f.centered, 1);
        const DetectorModel m = fit_detector(f.X, f.raw, b, ThresholdPolicy::external(0.0));
        const double s = f.params.sigma_sq;
        Vector mean = Vector::Zero(80);
        for (double x : xs) mean += feature_map(x, s) / 3.0;
        for (double z : {-2.0, -0.7, 0.0, 0.45, 1.3, 2.5}) {
            const std::vector<double> q{z};
            const double oracle = (feature_map(z, s) - mean).squaredNorm();
            CHECK(std::abs(spherical_potential(q, m) - oracle) <= 1e-12);
        }
    }
    SUBCASE("far query sees only the centering constants") {
        const Fitted f = prepare(line_data({0.0, 1.0, 3.0}));
        const DetectorModel m = fit_detector(f.X, f.raw, kpca_dense(f.centered, 1));
        const std::vector<double> z{1e4};
        // Every k(z, x_i) underflows, so the centered cross kernel is
        // grand_mean - rowmean_i and the mean itself still projects.
        double proj = 0.0;
        for (Index k = 0; k < m.retained_count(); ++k) {
            proj += m.coeffs(k, 0) * (m.grand_mean - m.retained_row_means(k));
        }
        CHECK(std::abs(proj) > 1e-3);
        CHECK(spherical_potential(z, m) == doctest::Approx(1.0 + m.mean_sq_term()).epsilon(1e-15));
        CHECK(reconstruction_error(z, m) == doctest::Approx(1.0 + m.mean_sq_term() - proj * proj).epsilon(1e-12));
        CHECK(m.mean_sq_term() == doctest::Approx(f.raw.values.mean()).epsilon(1e-15));
    }
}

TEST_CASE("reconstruction_error") {
    SUBCASE("explicit feature-space oracle for a sparse basis") {
        const std::vector<double> xs{-1.2, -0.3, 0.1, 0.9, 1.6};
        const Fitted f = prepare(line_data(xs));
        const double s = f.params.sigma_sq;
        SparseBasis b;
        b.normalized_beta = Matrix::Zero(5, 2);
        b.normalized_beta(0, 0) = 0.8;
        b.normalized_beta(3, 0) = -0.5;
        b.normalized_beta(1, 1) = 0.3;
        b.normalized_beta(4, 1) = 0.6;
        b.normalized_beta(2, 1) = -0.2;
        const DetectorModel m = fit_detector(f.X, f.raw, b, ThresholdPolicy::external(0.0));
        CHECK(m.retained_count() == 5);

        Vector mean = Vector::Zero(80);
        for (double x : xs) mean += feature_map(x, s) / 5.0;
        Matrix V = Matrix::Zero(80, 2);
        for (Index j = 0; j < 2; ++j) {
            for (Index i = 0; i < 5; ++i) {
                V.col(j) += b.normalized_beta(i, j) * (feature_map(xs[static_cast<std::size_t>(i)], s) - mean);
            }
        }
        for (double z : {-1.9, -0.3, 0.5, 1.0, 2.2}) {
            const Vector c = feature_map(z, s) - mean;
            const double oracle = c.squaredNorm() - (V.transpose() * c).squaredNorm();
            const ScoreDetail d = score_detail(std::vector<double>{z}, m);
            CHECK(std::abs(d.raw - oracle) <= 1e-12);
        }
    }
    SUBCASE("full dense basis reconstructs training points") {
        const Fitted f = prepare(gaussian_sample(40, 2, 8));
        const EigenBasis e = top_eigen(f.centered, 40);
        const SparseBasis b = kpca_dense(e, e.rank());
        const DetectorModel m = fit_detector(f.X, f.raw, b, ThresholdPolicy::external(0.0));
        for (Index i = 0; i < 40; ++i) {
            CHECK(std::abs(score_detail(f.X.row(i), m).raw) <= 1e-8);
        }
    }
    SUBCASE("single component at the largest-score training point") {
        const Fitted f = prepare(gaussian_sample(30, 3, 9));
        const EigenBasis e = top_eigen(f.centered, 1);
        const DetectorModel m = fit_detector(f.X, f.raw, kpca_dense(e, 1), ThresholdPolicy::external(0.0));
        Index arg = 0;
        e.vectors.col(0).cwiseAbs().maxCoeff(&arg);
        const double score1 = std::sqrt(e.values(0)) * e.vectors(arg, 0);
        const double ps = f.centered.values(arg, arg);
        const ScoreDetail d = score_detail(f.X.row(arg), m);
        CHECK(d.potential == doctest::Approx(ps).epsilon(1e-12));
        CHECK(d.raw == doctest::Approx(ps - score1 * score1).epsilon(1e-10));
        CHECK(d.projection_energy <= d.potential + 1e-10);
    }
    SUBCASE("potential bounds the score for arbitrary queries") {
        const Fitted f = prepare(gaussian_sample(50, 2, 10));
        AlgoConfig cfg;
        cfg.m = 4;
        cfg.l1_ratio = 100.0;
        const SparseBasis b = fit_skpca(f.centered, cfg);
        const DetectorModel m = fit_detector(f.X, f.raw, b);
        const RowMatrix Q = random_queries(200, 2, 2.0, 11);
        for (Index i = 0; i < Q.rows(); ++i) {
            const ScoreDetail d = score_detail(row_of(Q, i), m);
            CHECK(d.potential >= -1e-10);
            CHECK(d.raw <= d.potential + 1e-10);
            CHECK(d.score >= 0.0);
            CHECK(classify(row_of(Q, i), m).score == d.score);
        }
    }
    SUBCASE("non-orthogonal bases are clamped and counted") {
        const Fitted f = prepare(gaussian_sample(20, 2, 12));
        const SparseBasis d1 = kpca_dense(f.centered, 1);
        SparseBasis dup = d1;
        dup.normalized_beta = Matrix(20, 3);
        dup.normalized_beta << d1.normalized_beta, d1.normalized_beta, d1.normalized_beta;
        const DetectorModel m = fit_detector(f.X, f.raw, dup, ThresholdPolicy::external(0.0));
        const BatchScores s = score_batch(f.X.rows(), m);
        CHECK(s.clamped > 0);
        for (double v : s.scores) CHECK(v >= 0.0);
    }
    SUBCASE("dimension mismatch") {
        const Fitted f = prepare(gaussian_sample(10, 2, 13));
        const DetectorModel m = fit_detector(f.X, f.raw, kpca_dense(f.centered, 1));
        CHECK_THROWS_AS(reconstruction_error(std::vector<double>{1.0}, m), Error);
        CHECK_THROWS_AS(spherical_potential(std::vector<double>{1.0, 2.0, 3.0}, m), Error);
        CHECK_THROWS_AS(classify(std::vector<double>{1.0, std::nan("")}, m), Error);
        CHECK_THROWS_AS(score_batch(RowMatrix::Zero(3, 3), m), Error);
    }
}

TEST_CASE("fit_detector thresholds") {
    const Fitted f = prepare(gaussian_sample(200, 2, 14));
    const SparseBasis b = kpca_dense(f.centered, 5);

    SUBCASE("quantile one keeps every training point inside") {
        const DetectorModel m = fit_detector(f.X, f.raw, b, ThresholdPolicy::quantile(1.0));
        const BatchScores s = score_batch(f.X.rows(), m);
        CHECK(m.threshold == *std::max_element(s.scores.begin(), s.scores.end()));
        for (Index i = 0; i < 200; ++i) CHECK(classify(f.X.row(i), m).label == Label::inlier);
    }
    SUBCASE("external threshold is used verbatim") {
        const DetectorModel m = fit_detector(f.X, f.raw, b, ThresholdPolicy::external(0.123456789));
        CHECK(m.threshold == 0.123456789);
    }
    SUBCASE("default quantile flags the top five percent") {
        const DetectorModel m = fit_detector(f.X, f.raw, b);
        const BatchScores s = score_batch(f.X.rows(), m);
        std::vector<double> sorted = s.scores;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
        int flagged = 0;
        for (Index i = 0; i < 200; ++i) flagged += classify(f.X.row(i), m).label == Label::outlier;
        CHECK(flagged == 10);
        CHECK(m.threshold == sorted[189]);
    }
    SUBCASE("parameter overload agrees") {
        const DetectorModel a = fit_detector(f.X, b, f.params);
        const DetectorModel c = fit_detector(f.X, f.raw, b);
        CHECK(a.threshold == c.threshold);
        CHECK(a.coeffs == c.coeffs);
    }
    SUBCASE("errors") {
        SparseBasis zero = b;
        zero.normalized_beta.setZero();
        CHECK_THROWS_AS(fit_detector(f.X, f.raw, zero), Error);
        CHECK_THROWS_AS(fit_detector(f.X, f.centered, b), Error);
        CHECK_THROWS_AS(fit_detector(f.X, f.raw, b, ThresholdPolicy::quantile(0.0)), Error);
        const SparseBasis other = kpca_dense(center_gram(gram(gaussian_sample(30, 2, 1), f.params)), 2);
        CHECK_THROWS_AS(fit_detector(f.X, f.raw, other), Error);
    }
}

TEST_CASE("dropped zero columns") {
    const Fitted f = prepare(gaussian_sample(30, 2, 15));
    SparseBasis b = kpca_dense(f.centered, 3);
    b.normalized_beta.col(1).setZero();
    const DetectorModel m = fit_detector(f.X, f.raw, b);
    CHECK(m.q == 2);
    CHECK(m.dropped_columns == std::vector<Index>{1});
}

TEST_CASE("classify tie rule") {
    const Fitted f = prepare(gaussian_sample(25, 2, 16));
    DetectorModel m = fit_detector(f.X, f.raw, kpca_dense(f.centered, 2));
    const std::vector<double> z{0.4, -0.2};
    const double s = reconstruction_error(z, m);
    m.threshold = s;
    CHECK(classify(z, m).label == Label::inlier);
    m.threshold = std::nextafter(s, -1.0);
    CHECK(classify(z, m).label == Label::outlier);
    m.threshold = std::nextafter(s, 2.0);
    CHECK(classify(z, m).label == Label::inlier);
}

TEST_CASE("quantile_threshold") {
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(quantile_threshold(v, 0.25) == 1.0);
    CHECK(quantile_threshold(v, 0.5) == 2.0);
    CHECK(quantile_threshold(v, 0.51) == 3.0);
    CHECK(quantile_threshold(v, 0.95) == 4.0);
    CHECK(quantile_threshold(v, 1.0) == 4.0);
    CHECK(quantile_threshold(std::vector<double>(20, 1.0), 0.95) == 1.0);
    CHECK_THROWS_AS(quantile_threshold(v, 0.0), Error);
    CHECK_THROWS_AS(quantile_threshold(v, 1.5), Error);
    CHECK_THROWS_AS(quantile_threshold({}, 0.5), Error);
}

TEST_CASE("compress") {
    const Fitted f = prepare(gaussian_sample(300, 2, 17));
    const RowMatrix Q = random_queries(100, 2, 1.5, 18);

    SUBCASE("dense model keeps every point") {
        const DetectorModel m = fit_detector(f.X, f.raw, kpca_dense(f.centered, 3));
        const DetectorModel c = compress(m, false);
        CHECK(c.retained_count() == m.retained_count());
        CHECK(c.retained_count() == 300);
        CHECK(c.potential_error_bound == 0.0);
        const BatchScores a = score_batch(Q, m), b = score_batch(Q, c);
        for (Index i = 0; i < Q.rows(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            CHECK(std::abs(a.scores[k] - b.scores[k]) <= 1e-12);
        }
    }

    AlgoConfig cfg;
    cfg.m = 5;
    cfg.l1_ratio = 3.0;
    const SparseBasis sb = fit_skpca(f.centered, cfg);
    const DetectorModel m = fit_detector(f.X, f.raw, sb);
    const double pct = sb.sparsity_pct;
    INFO("sparsity " << pct);
    REQUIRE(pct > 0.0);
    REQUIRE(pct <= 10.0);

    SUBCASE("retained points are the support union") {
        Index support = 0;
        for (Index i = 0; i < 300; ++i) support += (sb.normalized_beta.row(i).array() != 0.0).any();
        CHECK(m.retained_count() == support);
        CHECK(static_cast<double>(m.retained_count()) <= pct / 100.0 * 300 * 5 + 1e-9);
        CHECK(static_cast<double>(m.nonzero_coeffs()) == doctest::Approx(pct / 100.0 * 300 * 5));
    }
    SUBCASE("exact side array preserves every score bitwise") {
        const DetectorModel c = compress(m, true);
        for (Index i = 0; i < Q.rows(); ++i) {
            const Verdict a = classify(row_of(Q, i), m), b = classify(row_of(Q, i), c);
            CHECK(a.score == b.score);
            CHECK(a.label == b.label);
        }
    }
    SUBCASE("approximate potential stays within its bound") {
        const DetectorModel c = compress(m, false);
        CHECK_FALSE(c.potential_exact);
        CHECK(c.potential_points.rows() == c.retained_count());
        CHECK(c.potential_weights.sum() == doctest::Approx(300.0).epsilon(1e-15));
        CHECK(c.potential_error_bound > 0.0);
        for (Index i = 0; i < Q.rows(); ++i) {
            const double exact = spherical_potential(row_of(Q, i), m);
            const double approx = spherical_potential(row_of(Q, i), c);
            CHECK(std::abs(exact - approx) <= 2.0 * c.potential_error_bound + 1e-12);
        }
    }
}
