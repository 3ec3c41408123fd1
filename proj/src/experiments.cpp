#include "skpca/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>
#include <random>

namespace skpca {

namespace {

constexpr std::string_view kModule = "eval_harness";

std::vector<Index> shuffled(Index n, std::mt19937_64& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

struct Prepared {
    KernelParams params;
    GramMatrix raw;
    GramMatrix centered;
    FitContext ctx;
};

// FitContext points into `centered`; keep the struct pinned in place.
void prepare(Prepared& p, const Split& split, const ExperimentConfig& cfg) {
    p.params = cfg.sigma_sq ? KernelParams::make(*cfg.sigma_sq)
                            : sigma_heuristic(split.train, cfg.algo.exec);
    p.raw = gram(split.train, p.params, cfg.algo.exec);
    p.centered = center_gram(p.raw);
    p.ctx = FitContext::prepare(p.centered);
}

LabeledScores test_scores(const Split& split, const DetectorModel& model, Exec exec) {
    LabeledScores ls;
    ls.scores = score_batch(split.test, model, exec).scores;
    ls.labels = split.test_labels;
    return ls;
}

MethodMetrics measure(const Split& split, const Prepared& p, const SparseBasis& basis,
                      const ExperimentConfig& cfg, LabeledScores* scores_out = nullptr,
                      std::optional<DetectorModel>* model_out = nullptr) {
    MethodMetrics m;
    m.sparsity_pct = basis.sparsity_pct;
    m.nonzeros_per_pc = mean_nonzeros_per_column(basis.beta);
    if (basis.degenerate) {
        m.missing = true;
        return m;
    }
    DetectorModel model = fit_detector(split.train, p.raw, basis, cfg.policy, cfg.algo.exec);
    LabeledScores ls = test_scores(split, model, cfg.algo.exec);
    m.f1 = f1_score(ls, model.threshold);
    m.auroc = auroc(ls);
    if (scores_out) *scores_out = std::move(ls);
    if (model_out) *model_out = std::move(model);
    return m;
}

}  // namespace

Split draw_split(const DatasetPool& pool, const SplitCounts& counts, std::uint64_t seed) {
    require(counts.train >= 2, kModule, "training split needs at least 2 points");
    require(counts.test_inliers >= 0 && counts.test_outliers >= 0, kModule,
            "test counts must be non-negative");
    require(counts.train + counts.test_inliers <= pool.inliers.size(), kModule,
            "dataset too small: need " + std::to_string(counts.train + counts.test_inliers) +
                " inliers, have " + std::to_string(pool.inliers.size()));
    require(counts.test_outliers <= pool.outliers.size(), kModule,
            "dataset too small: need " + std::to_string(counts.test_outliers) + " outliers, have " +
                std::to_string(pool.outliers.size()));

    std::mt19937_64 rng(seed);
    const std::vector<Index> in_idx = shuffled(pool.inliers.size(), rng);
    const std::vector<Index> out_idx = shuffled(pool.outliers.size(), rng);

    Split s;
    s.train = pool.inliers.subset(std::span(in_idx).first(static_cast<std::size_t>(counts.train)), 2);
    const Index n_test = counts.test_inliers + counts.test_outliers;
    const Index d = pool.inliers.dim();
    s.test.resize(n_test, d);
    Index r = 0;
    for (Index k = 0; k < counts.test_inliers; ++k, ++r) {
        const Index i = in_idx[static_cast<std::size_t>(counts.train + k)];
        s.test.row(r) = pool.inliers.rows().row(i);
        s.test_labels.push_back(Label::inlier);
        s.test_ids.push_back(pool.inliers.ids()[static_cast<std::size_t>(i)]);
    }
    for (Index k = 0; k < counts.test_outliers; ++k, ++r) {
        const Index i = out_idx[static_cast<std::size_t>(k)];
        s.test.row(r) = pool.outliers.rows().row(i);
        s.test_labels.push_back(Label::outlier);
        s.test_ids.push_back(pool.outliers.ids()[static_cast<std::size_t>(i)]);
    }
    return s;
}

DatasetPool two_ring_pool(Index inliers, Index outliers, std::uint64_t seed, double noise) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> jitter(0.0, noise);
    std::uniform_real_distribution<double> box(-2.5, 2.5);
    std::bernoulli_distribution outer(0.5);

    RowMatrix in(inliers, 2);
    for (Index i = 0; i < inliers; ++i) {
        const double radius = (outer(rng) ? 2.0 : 1.0) + jitter(rng);
        const double t = angle(rng);
        in(i, 0) = radius * std::cos(t);
        in(i, 1) = radius * std::sin(t);
    }
    RowMatrix out(outliers, 2);
    for (Index i = 0; i < outliers; ++i) {
        out(i, 0) = box(rng);
        out(i, 1) = box(rng);
    }
    std::vector<std::int64_t> out_ids(static_cast<std::size_t>(outliers));
    std::iota(out_ids.begin(), out_ids.end(), static_cast<std::int64_t>(inliers));
    return {DataMatrix::make(std::move(in)), DataMatrix::make(std::move(out), std::move(out_ids), 0)};
}

DataMatrix gaussian_sample(Index n, Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrix x(n, dim);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < dim; ++k) x(i, k) = normal(rng);
    }
    return DataMatrix::make(std::move(x));
}

SplitEvaluation evaluate_split(const Split& split, const ExperimentConfig& cfg) {
    Prepared p;
    prepare(p, split, cfg);
    SplitEvaluation ev;
    ev.sigma_sq = p.params.sigma_sq;
    ev.basis = fit_skpca(p.ctx, cfg.algo);
    ev.ridge = ev.basis.ridge;
    ev.skpca = measure(split, p, ev.basis, cfg, &ev.skpca_scores, &ev.model);

    const SparseBasis dense = kpca_dense(p.ctx.eig, cfg.algo.m);
    ev.dense = measure(split, p, dense, cfg, &ev.dense_scores);

    if (ev.skpca.missing) {
        ev.naive.missing = true;
    } else {
        const SparseBasis naive = naive_threshold(dense, p.centered, ev.skpca.nonzeros_per_pc);
        ev.naive = measure(split, p, naive, cfg, &ev.naive_scores);
    }
    return ev;
}

SweepResult sparsity_sweep(const Split& split, std::span<const double> grid,
                           const ExperimentConfig& cfg) {
    require(!grid.empty(), kModule, "sweep grid is empty");
    Prepared p;
    prepare(p, split, cfg);
    SweepResult out;
    out.sigma_sq = p.params.sigma_sq;
    const SparseBasis dense = kpca_dense(p.ctx.eig, cfg.algo.m);
    out.dense = measure(split, p, dense, cfg);

    for (double ratio : grid) {
        ExperimentConfig point_cfg = cfg;
        point_cfg.algo.l1_ratio = ratio;
        SweepPoint pt;
        pt.l1_ratio = ratio;
        const SparseBasis basis = fit_skpca(p.ctx, point_cfg.algo);
        pt.skpca = measure(split, p, basis, point_cfg);
        if (pt.skpca.missing) {
            pt.naive.missing = true;
        } else {
            const SparseBasis naive = naive_threshold(dense, p.centered, pt.skpca.nonzeros_per_pc);
            pt.naive = measure(split, p, naive, point_cfg);
        }
        out.points.push_back(pt);
    }
    return out;
}

std::vector<std::uint64_t> TrialStats::seeds() const {
    std::vector<std::uint64_t> out;
    for (const auto& t : trials) out.push_back(t.seed);
    return out;
}

std::vector<double> TrialStats::f1_values() const {
    std::vector<double> out;
    for (const auto& t : trials) out.push_back(t.skpca.f1);
    return out;
}

std::vector<double> TrialStats::sparsity_values() const {
    std::vector<double> out;
    for (const auto& t : trials) out.push_back(t.skpca.sparsity_pct);
    return out;
}

TrialStats repeated_trials(const DatasetPool& pool, const SplitCounts& counts,
                           const ExperimentConfig& cfg, int n_trials, std::uint64_t base_seed,
                           Exec exec) {
    require(n_trials >= 1, kModule, "n_trials must be >= 1");
    TrialStats stats;
    stats.trials.resize(static_cast<std::size_t>(n_trials));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_trials));

    auto run = [&](int t) {
        try {
            TrialRecord& rec = stats.trials[static_cast<std::size_t>(t)];
            rec.seed = base_seed + static_cast<std::uint64_t>(t);
            const Split split = draw_split(pool, counts, rec.seed);
            const SplitEvaluation ev = evaluate_split(split, cfg);
            rec.skpca = ev.skpca;
            rec.dense = ev.dense;
            rec.naive = ev.naive;
        } catch (...) {
            errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (int t = 0; t < n_trials; ++t) run(t);
    } else {
        for (int t = 0; t < n_trials; ++t) run(t);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::vector<double> auc;
    for (const auto& t : stats.trials) auc.push_back(t.skpca.auroc);
    const auto f1 = stats.f1_values();
    const auto sp = stats.sparsity_values();
    stats.f1 = summarize(f1);
    stats.sparsity = summarize(sp);
    stats.auroc = summarize(auc);
    return stats;
}

}  // namespace skpca
