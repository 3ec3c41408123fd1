#pragma once

// Test-only generators and independent oracles. Nothing here calls into the
// code paths it is used to check.

#include "skpca/common.hpp"
#include "skpca/detector.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace skpca::test {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) M(i, j) = normal(rng);
    }
    return M;
}

/// G G' with G n x rank: PSD with the given rank.
inline Matrix random_psd(Index n, Index rank, std::mt19937_64& rng) {
    const Matrix G = random_matrix(n, rank, rng);
    Matrix K = G * G.transpose();
    return 0.5 * (K + K.transpose());
}

inline Matrix orthonormal_columns(const Matrix& A) {
    Eigen::HouseholderQR<Matrix> qr(A);
    return qr.householderQ() * Matrix::Identity(A.rows(), A.cols());
}

/// Largest principal angle between column spans, via SVD of Q1' Q2.
inline double max_principal_angle(const Matrix& A, const Matrix& B) {
    const Matrix Q1 = orthonormal_columns(A);
    const Matrix Q2 = orthonormal_columns(B);
    Eigen::JacobiSVD<Matrix> svd(Q1.transpose() * Q2);
    const double smin = svd.singularValues().minCoeff();
    return std::acos(std::clamp(smin, -1.0, 1.0));
}

/// Brute-force P(score_out > score_in) + 0.5 P(equal) as an exact ratio of
/// integers: (2 wins + ties) / (2 P N).
inline std::pair<long long, long long> pairwise_auroc(const std::vector<double>& scores,
                                                      const std::vector<Label>& labels) {
    long long num = 0, P = 0, N = 0;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (labels[a] == Label::outlier) ++P; else ++N;
    }
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (labels[a] != Label::outlier) continue;
        for (std::size_t b = 0; b < scores.size(); ++b) {
            if (labels[b] != Label::inlier) continue;
            if (scores[a] > scores[b]) num += 2;
            else if (scores[a] == scores[b]) num += 1;
        }
    }
    return {num, 2 * P * N};
}

/// Independent evaluation of the elastic-net objective.
inline double enet_objective_oracle(const Matrix& K2, double ridge, double l1, const Vector& b,
                                    const Vector& beta) {
    double quad = 0.0;
    for (Index i = 0; i < beta.size(); ++i) {
        for (Index k = 0; k < beta.size(); ++k) quad += beta(i) * K2(i, k) * beta(k);
        quad += ridge * beta(i) * beta(i);
    }
    double lin = 0.0, l1n = 0.0;
    for (Index i = 0; i < beta.size(); ++i) {
        lin += b(i) * beta(i);
        l1n += std::abs(beta(i));
    }
    return quad - 2.0 * lin + l1 * l1n;
}

/// Independent KKT residual (subgradient violation) written from the formula.
inline double kkt_oracle(const Matrix& K2, double ridge, double l1, const Vector& b,
                         const Vector& beta) {
    double worst = 0.0;
    for (Index i = 0; i < beta.size(); ++i) {
        double g = -2.0 * b(i) + 2.0 * ridge * beta(i);
        for (Index k = 0; k < beta.size(); ++k) g += 2.0 * K2(i, k) * beta(k);
        double v;
        if (beta(i) > 0) v = std::abs(g + l1);
        else if (beta(i) < 0) v = std::abs(g - l1);
        else v = std::max(0.0, std::abs(g) - l1);
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace skpca::test
