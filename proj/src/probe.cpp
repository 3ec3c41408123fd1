#include "skpca/eval.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace skpca {

namespace {

constexpr std::string_view kModule = "eval_harness";

double sq_dist(const RowMatrix& A, Index i, const RowMatrix& B, Index j) {
    return (A.row(i) - B.row(j)).squaredNorm();
}

double subset_diameter(const RowMatrix& X, const std::vector<Index>& s) {
    double best = 0.0;
    for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = a + 1; b < s.size(); ++b) best = std::max(best, sq_dist(X, s[a], X, s[b]));
    }
    return std::sqrt(best);
}

Index nearest(const RowMatrix& X, const std::vector<Index>& s, const RowMatrix& Y, Index y) {
    Index arg = s.front();
    double best = std::numeric_limits<double>::infinity();
    for (Index i : s) {
        const double d = sq_dist(X, i, Y, y);
        if (d < best) {
            best = d;
            arg = i;
        }
    }
    return arg;
}

RowMatrix matched_gaussian_queries(const DataMatrix& X, Index count, std::mt19937_64& rng) {
    const RowMatrix& R = X.rows();
    const Eigen::RowVectorXd mean = R.colwise().mean();
    const Eigen::RowVectorXd spread =
        ((R.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(R.rows() - 1))
            .sqrt();
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrix Q(count, X.dim());
    for (Index i = 0; i < count; ++i) {
        for (Index k = 0; k < X.dim(); ++k) Q(i, k) = mean(k) + spread(k) * normal(rng);
    }
    return Q;
}

ProbeReport run_probe(const DataMatrix& X, Index n_subset, const KernelParams& params, int trials,
                      std::mt19937_64& rng, const RowMatrix& queries) {
    const Index m = X.size();
    require(n_subset >= 1, kModule, "probe subset size must be >= 1");
    require(n_subset <= m, kModule, "probe subset size exceeds the number of points");
    require(trials >= 1, kModule, "probe needs at least one candidate subset");
    require(queries.cols() == X.dim(), kModule, "probe queries have the wrong dimension");
    const RowMatrix& R = X.rows();

    ProbeReport rep;
    rep.m_total = m;
    rep.n_subset = n_subset;

    // Best-of-trials subset by diameter.
    std::vector<Index> all(static_cast<std::size_t>(m));
    std::iota(all.begin(), all.end(), Index{0});
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        std::vector<Index> cand = all;
        std::shuffle(cand.begin(), cand.end(), rng);
        cand.resize(static_cast<std::size_t>(n_subset));
        std::sort(cand.begin(), cand.end());
        const double diam = subset_diameter(R, cand);
        if (diam < best) {
            best = diam;
            rep.subset = std::move(cand);
        }
        if (n_subset == m) break;
    }
    rep.d_max_subset = best;

    std::vector<char> in_subset(static_cast<std::size_t>(m), 0);
    for (Index i : rep.subset) in_subset[static_cast<std::size_t>(i)] = 1;

    const double inv2s = 1.0 / (2.0 * params.sigma_sq);
    std::vector<Index> g(static_cast<std::size_t>(queries.rows()));
    for (Index q = 0; q < queries.rows(); ++q) {
        g[static_cast<std::size_t>(q)] = nearest(R, rep.subset, queries, q);
        rep.max_query_distance =
            std::max(rep.max_query_distance, std::sqrt(sq_dist(R, g[static_cast<std::size_t>(q)], queries, q)));
    }

    for (Index i = 0; i < m; ++i) {
        if (in_subset[static_cast<std::size_t>(i)]) continue;
        const Index f = nearest(R, rep.subset, R, i);
        const Eigen::RowVectorXd a = R.row(i) - R.row(f);
        rep.max_nearest_distance = std::max(rep.max_nearest_distance, a.norm());
        rep.min_self_factor = std::min(rep.min_self_factor, std::exp(-a.squaredNorm() * inv2s));
        for (Index q = 0; q < queries.rows(); ++q) {
            const Index gq = g[static_cast<std::size_t>(q)];
            const double k_i = std::exp(-sq_dist(R, i, queries, q) * inv2s);
            const double k_f = std::exp(-sq_dist(R, f, queries, q) * inv2s);
            rep.max_kernel_deviation = std::max(rep.max_kernel_deviation, std::abs(k_i - k_f));
            const double cross = std::exp(-2.0 * a.dot(R.row(f) - R.row(gq)) * inv2s);
            const double query = std::exp(-2.0 * a.dot(R.row(gq) - queries.row(q)) * inv2s);
            rep.min_cross_factor = std::min(rep.min_cross_factor, cross);
            rep.max_cross_factor = std::max(rep.max_cross_factor, cross);
            rep.min_query_factor = std::min(rep.min_query_factor, query);
            rep.max_query_factor = std::max(rep.max_query_factor, query);
        }
    }

    // Residual of the top centered-Gram eigenvector on the subset's columns.
    const GramMatrix Kc = center_gram(gram(X, params));
    const EigenBasis top = top_eigen(Kc, 1);
    if (top.rank() == 0) {
        rep.eigvec_residual = 0.0;
        return rep;
    }
    Matrix cols(m, n_subset);
    for (Index c = 0; c < n_subset; ++c) cols.col(c) = Kc.values.col(rep.subset[static_cast<std::size_t>(c)]);
    const Vector e = top.vectors.col(0);
    const Eigen::ColPivHouseholderQR<Matrix> qr(cols);
    const Vector fit = cols * qr.solve(e);
    rep.eigvec_residual = std::clamp((e - fit).norm() / e.norm(), 0.0, 1.0);
    return rep;
}

}  // namespace

ProbeReport representability_probe(const DataMatrix& X, Index n_subset, const KernelParams& params,
                                   int trials, std::uint64_t seed, const RowMatrix& queries) {
    std::mt19937_64 rng(seed);
    return run_probe(X, n_subset, params, trials, rng, queries);
}

ProbeReport representability_probe(const DataMatrix& X, Index n_subset, const KernelParams& params,
                                   int trials, std::uint64_t seed, Index queries) {
    require(queries >= 1, kModule, "probe needs at least one query");
    std::mt19937_64 rng(seed);
    const RowMatrix Q = matched_gaussian_queries(X, queries, rng);
    return run_probe(X, n_subset, params, trials, rng, Q);
}

}  // namespace skpca
