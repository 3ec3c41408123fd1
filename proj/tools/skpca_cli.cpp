// skpca: command-line front end.
//
//   skpca fit     train a detector and write a model file
//   skpca score   score rows of a file against a saved model
//   skpca eval    one split: SKPCA vs dense KPCA vs naive thresholding
//   skpca sweep   metrics along a grid of L1 ratios
//   skpca trials  repeated seeded splits, mean and standard deviation
//   skpca probe   subset representability of kernel columns
//
// Options may also come from a config file (--config, key = value lines);
// command-line flags take precedence over the file.

#include "skpca/eval.hpp"
#include "skpca/io.hpp"
#include "skpca/report.hpp"

#include "CLI11.hpp"

#ifdef SKPCA_HAVE_OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace skpca;

namespace {

constexpr std::string_view kModule = "cli";

struct Options {
    // data
    std::string data;
    std::string labels;
    std::string format = "csv";  // csv | idx | rings | gaussian
    std::string label_column = "label";
    std::string inlier = "0";
    std::string outlier = "*";
    Index train = 3000;
    Index test_inliers = 3000;
    Index test_outliers = 3000;
    double noise = 0.1;
    Index dim = 2;

    // model
    Index pcs = 15;
    double l1_ratio = 0.7;
    std::optional<double> ridge;
    std::optional<double> sigma_sq;
    bool sigma_auto = false;
    double threshold_quantile = 0.95;
    std::optional<double> threshold;
    int max_outer = 200;
    bool dense = false;
    bool approx_potential = false;

    // runs
    std::uint64_t seed = 0;
    std::string out;
    std::string model;
    int trials = 10;
    std::vector<double> grid{0.0, 0.1, 0.3, 0.7, 1.0, 2.0, 5.0};
    Index subset = 100;
    bool serial = false;
    int threads = 0;
};

Exec exec_of(const Options& o) { return o.serial ? Exec::serial : Exec::parallel; }

ExperimentConfig experiment_config(const Options& o) {
    ExperimentConfig cfg;
    cfg.algo.m = o.pcs;
    cfg.algo.l1_ratio = o.l1_ratio;
    cfg.algo.ridge = o.ridge;
    cfg.algo.max_outer_iter = o.max_outer;
    cfg.algo.seed = o.seed;
    cfg.algo.exec = exec_of(o);
    cfg.sigma_sq = o.sigma_sq;
    cfg.policy = o.threshold ? ThresholdPolicy::external(*o.threshold)
                             : ThresholdPolicy::quantile(o.threshold_quantile);
    cfg.algo.validate();
    return cfg;
}

SplitCounts counts_of(const Options& o) { return {o.train, o.test_inliers, o.test_outliers}; }

DatasetPool load_data(const Options& o) {
    if (o.format == "rings") {
        return two_ring_pool(o.train + o.test_inliers, std::max<Index>(o.test_outliers, 2), o.seed, o.noise);
    }
    if (o.format == "gaussian") {
        // Inliers N(0, I); outliers N(0, 9 I).
        DatasetPool pool;
        pool.inliers = gaussian_sample(o.train + o.test_inliers, o.dim, o.seed);
        const DataMatrix wide = gaussian_sample(std::max<Index>(o.test_outliers, 2), o.dim, o.seed + 1);
        std::vector<std::int64_t> ids(static_cast<std::size_t>(wide.size()));
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = pool.inliers.size() + static_cast<std::int64_t>(i);
        pool.outliers = DataMatrix::make(wide.rows() * 3.0, ids, 1);
        return pool;
    }
    require(!o.data.empty(), kModule, "--data is required for format " + o.format);
    DatasetSpec spec;
    spec.data = o.data;
    spec.labels = o.labels;
    spec.label_column = o.label_column;
    spec.inlier_label = o.inlier;
    spec.outlier_label = o.outlier;
    if (o.format == "csv") {
        spec.format = DatasetSpec::Format::csv;
    } else {
        require(!o.labels.empty(), kModule, "--labels is required for format idx");
        spec.format = DatasetSpec::Format::idx;
    }
    return load_pool(spec);
}

fs::path out_dir(const Options& o, const std::string& fallback) {
    const fs::path dir = o.out.empty() ? fs::path(fallback) : fs::path(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, kModule, "cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

std::string n6(double v) { return fmt_num(v, 6); }

std::string metrics_cell(const MethodMetrics& m, double v) { return m.missing ? "nan" : n6(v); }

void add_metrics_row(Table& t, const std::string& name, const MethodMetrics& m) {
    t.add({name, metrics_cell(m, m.f1), metrics_cell(m, m.auroc), metrics_cell(m, m.sparsity_pct),
           m.missing ? "nan" : std::to_string(m.nonzeros_per_pc)});
}

void write_table(const fs::path& dir, const std::string& stem, const Table& t) {
    write_file_atomic(dir / (stem + ".txt"), t.aligned());
    write_file_atomic(dir / (stem + ".tsv"), t.tsv());
}

std::string run_header(const Options& o, double sigma_sq, bool with_ratio = true) {
    std::ostringstream s;
    s << "# format=" << o.format << " pcs=" << o.pcs;
    if (with_ratio) s << " l1_ratio=" << o.l1_ratio;
    s << " sigma_sq=" << fmt_num(sigma_sq, 9) << " seed=" << o.seed << '\n';
    return s.str();
}

// ---------------------------------------------------------------------------

int cmd_fit(const Options& o) {
    require(!o.out.empty(), kModule, "fit needs --out <model file>");
    SplitCounts counts = counts_of(o);
    counts.test_inliers = counts.test_outliers = 0;
    Options data_opts = o;
    data_opts.test_inliers = 0;
    data_opts.test_outliers = 0;
    const Split split = draw_split(load_data(data_opts), counts, o.seed);
    const ExperimentConfig cfg = experiment_config(o);

    const KernelParams params = cfg.sigma_sq ? KernelParams::make(*cfg.sigma_sq)
                                             : sigma_heuristic(split.train, exec_of(o));
    const GramMatrix raw = gram(split.train, params, exec_of(o));
    const GramMatrix K = center_gram(raw);
    const FitContext ctx = FitContext::prepare(K);
    const SparseBasis basis = o.dense ? kpca_dense(ctx.eig, o.pcs) : fit_skpca(ctx, cfg.algo);
    require(!basis.degenerate, kModule, "every component is zero at this L1 ratio; lower --l1-ratio");
    const DetectorModel full = fit_detector(split.train, raw, basis, cfg.policy, exec_of(o));
    const DetectorModel model = compress(full, !o.approx_potential);

    std::ostringstream meta;
    meta << "skpca model; pcs=" << o.pcs << " l1_ratio=" << o.l1_ratio << " seed=" << o.seed
         << " train=" << split.train.size();
    save_model(model, o.out, meta.str());

    Table t{{"field", "value"}, {}};
    t.add({"train_points", std::to_string(split.train.size())});
    t.add({"sigma_sq", n6(params.sigma_sq)});
    t.add({"ridge", fmt_num(basis.ridge, 9)});
    t.add({"components", std::to_string(model.q)});
    t.add({"dropped_components", std::to_string(model.dropped_columns.size())});
    t.add({"sparsity_pct", n6(basis.sparsity_pct)});
    t.add({"retained_points", std::to_string(model.retained_count())});
    t.add({"outer_iterations", std::to_string(basis.outer_iterations)});
    t.add({"converged", basis.converged ? "yes" : "no"});
    t.add({"threshold", fmt_num(model.threshold, 9)});
    t.add({"potential", model.potential_exact ? "exact" : "approx"});
    std::cout << t.aligned();
    return 0;
}

bool header_has_column(const fs::path& path, const std::string& column) {
    std::ifstream in(path);
    require(in.good(), kModule, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        if (field == column) return true;
    }
    return false;
}

int cmd_score(const Options& o) {
    require(!o.model.empty(), kModule, "score needs --model <model file>");
    require(!o.data.empty(), kModule, "score needs --data");
    const DetectorModel model = load_model(o.model);
    LabeledRows rows;
    if (o.format == "idx") {
        rows = read_idx(o.data, o.labels);
    } else {
        require(o.format == "csv", kModule, "score reads csv or idx files");
        const bool labelled = !o.label_column.empty() && header_has_column(o.data, o.label_column);
        rows = read_csv(o.data, labelled ? o.label_column : std::string());
    }
    require(rows.rows.cols() == model.dim(), kModule,
            "data has " + std::to_string(rows.rows.cols()) + " features, model expects " +
                std::to_string(model.dim()));
    const double threshold = o.threshold ? *o.threshold : model.threshold;
    const BatchScores bs = score_batch(rows.rows, model, exec_of(o));

    std::string tsv = rows.labels.empty() ? "row\tscore\tverdict\n" : "row\tscore\tverdict\tlabel\n";
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < bs.scores.size(); ++i) {
        const bool out = bs.scores[i] > threshold;
        flagged += out;
        tsv += std::to_string(i) + '\t' + fmt_num(bs.scores[i], 12) + '\t' + (out ? "outlier" : "inlier");
        if (!rows.labels.empty()) tsv += '\t' + rows.labels[i];
        tsv += '\n';
    }
    if (o.out.empty()) {
        std::cout << tsv;
    } else {
        write_file_atomic(o.out, tsv);
        std::cout << "scored " << bs.scores.size() << " rows, " << flagged << " flagged, " << bs.clamped
                  << " clamped; threshold " << fmt_num(threshold, 9) << '\n';
    }
    return 0;
}

int cmd_eval(const Options& o) {
    const Split split = draw_split(load_data(o), counts_of(o), o.seed);
    const SplitEvaluation ev = evaluate_split(split, experiment_config(o));
    const fs::path dir = out_dir(o, "skpca_eval");

    Table t{{"method", "f1", "auroc", "sparsity_pct", "nonzeros_per_pc"}, {}};
    add_metrics_row(t, "skpca", ev.skpca);
    add_metrics_row(t, "kpca", ev.dense);
    add_metrics_row(t, "naive", ev.naive);
    write_table(dir, "metrics", t);

    Table roc{{"method", "fpr", "tpr", "threshold"}, {}};
    std::vector<Series> series;
    auto add_roc = [&](const std::string& name, const MethodMetrics& m, const LabeledScores& ls) {
        if (m.missing) return;
        Series s{name, {}, {}, false};
        for (const RocPoint& p : roc_curve(ls)) {
            roc.add({name, n6(p.fpr), n6(p.tpr), std::isinf(p.threshold) ? "inf" : fmt_num(p.threshold, 12)});
            s.x.push_back(p.fpr);
            s.y.push_back(p.tpr);
        }
        series.push_back(std::move(s));
    };
    add_roc("skpca", ev.skpca, ev.skpca_scores);
    add_roc("kpca", ev.dense, ev.dense_scores);
    add_roc("naive", ev.naive, ev.naive_scores);
    write_file_atomic(dir / "roc.tsv", roc.tsv());
    write_file_atomic(dir / "roc.svg", svg_plot("ROC", "false positive rate", "true positive rate", series));

    std::cout << run_header(o, ev.sigma_sq) << t.aligned();
    return 0;
}

int cmd_sweep(const Options& o) {
    require(!o.grid.empty(), kModule, "--grid is empty");
    const Split split = draw_split(load_data(o), counts_of(o), o.seed);
    const SweepResult r = sparsity_sweep(split, o.grid, experiment_config(o));
    const fs::path dir = out_dir(o, "skpca_sweep");

    Table t{{"method", "l1_ratio", "sparsity_pct", "f1", "auroc", "naive_f1", "naive_auroc"}, {}};
    Series skpca{"skpca", {}, {}, false}, naive{"naive", {}, {}, false};
    for (const SweepPoint& p : r.points) {
        const MethodMetrics& s = p.skpca;
        t.add({"skpca", n6(p.l1_ratio), metrics_cell(s, s.sparsity_pct), metrics_cell(s, s.f1),
               metrics_cell(s, s.auroc), metrics_cell(p.naive, p.naive.f1), metrics_cell(p.naive, p.naive.auroc)});
        if (s.missing) continue;
        skpca.x.push_back(s.sparsity_pct);
        skpca.y.push_back(s.f1);
        if (!p.naive.missing) {
            naive.x.push_back(p.naive.sparsity_pct);
            naive.y.push_back(p.naive.f1);
        }
    }
    t.add({"kpca", "nan", n6(r.dense.sparsity_pct), n6(r.dense.f1), n6(r.dense.auroc), "nan", "nan"});
    write_table(dir, "curve", t);
    Series dense{"kpca", {r.dense.sparsity_pct}, {r.dense.f1}, true};
    write_file_atomic(dir / "f1_vs_sparsity.svg",
                      svg_plot("F1 vs sparsity", "nonzeros (%)", "F1", {skpca, naive, dense}));

    std::cout << run_header(o, r.sigma_sq, false) << t.aligned();
    return 0;
}

int cmd_trials(const Options& o) {
    require(o.trials >= 1, kModule, "--trials must be >= 1");
    const TrialStats s = repeated_trials(load_data(o), counts_of(o), experiment_config(o), o.trials, o.seed,
                                         exec_of(o));
    const fs::path dir = out_dir(o, "skpca_trials");

    Table per{{"seed", "sparsity_pct", "f1", "auroc", "kpca_f1", "kpca_auroc", "naive_f1", "naive_auroc"}, {}};
    Series pts{"trials", {}, {}, true};
    for (const TrialRecord& r : s.trials) {
        per.add({std::to_string(r.seed), metrics_cell(r.skpca, r.skpca.sparsity_pct), metrics_cell(r.skpca, r.skpca.f1),
                 metrics_cell(r.skpca, r.skpca.auroc), metrics_cell(r.dense, r.dense.f1),
                 metrics_cell(r.dense, r.dense.auroc), metrics_cell(r.naive, r.naive.f1),
                 metrics_cell(r.naive, r.naive.auroc)});
        if (!r.skpca.missing) {
            pts.x.push_back(r.skpca.sparsity_pct);
            pts.y.push_back(r.skpca.f1);
        }
    }
    write_table(dir, "trials", per);

    Table sum{{"metric", "mean", "std"}, {}};
    sum.add({"sparsity_pct", n6(s.sparsity.mean), n6(s.sparsity.stddev)});
    sum.add({"f1", n6(s.f1.mean), n6(s.f1.stddev)});
    sum.add({"auroc", n6(s.auroc.mean), n6(s.auroc.stddev)});
    write_table(dir, "summary", sum);
    write_file_atomic(dir / "variability.svg", svg_plot("Trial variability", "nonzeros (%)", "F1", {pts}));

    std::cout << per.aligned() << '\n' << sum.aligned();
    return 0;
}

int cmd_probe(const Options& o) {
    Options data_opts = o;
    data_opts.test_inliers = 0;
    data_opts.test_outliers = 0;
    const Split split = draw_split(load_data(data_opts), {o.train, 0, 0}, o.seed);
    const KernelParams params = o.sigma_sq ? KernelParams::make(*o.sigma_sq) : sigma_heuristic(split.train);
    const ProbeReport r = representability_probe(split.train, o.subset, params, o.trials, o.seed);
    const fs::path dir = out_dir(o, "skpca_probe");

    Table t{{"field", "value"}, {}};
    t.add({"points", std::to_string(r.m_total)});
    t.add({"subset", std::to_string(r.n_subset)});
    t.add({"sigma_sq", n6(params.sigma_sq)});
    t.add({"subset_diameter", n6(r.d_max_subset)});
    t.add({"max_kernel_deviation", fmt_num(r.max_kernel_deviation, 9)});
    t.add({"eigvec_residual", fmt_num(r.eigvec_residual, 9)});
    t.add({"max_nearest_distance", n6(r.max_nearest_distance)});
    t.add({"max_query_distance", n6(r.max_query_distance)});
    t.add({"self_factor_min", n6(r.min_self_factor)});
    t.add({"cross_factor_min", n6(r.min_cross_factor)});
    t.add({"cross_factor_max", n6(r.max_cross_factor)});
    t.add({"query_factor_min", n6(r.min_query_factor)});
    t.add({"query_factor_max", n6(r.max_query_factor)});
    write_table(dir, "probe", t);
    std::cout << t.aligned();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse kernel PCA outlier detection"};
    app.set_config("--config", "", "Read options from a key = value file");
    app.require_subcommand(1);
    app.fallthrough();

    Options o;
    auto* fit = app.add_subcommand("fit", "Train a detector and write a model file (--out)");
    auto* score = app.add_subcommand("score", "Score --data against --model");
    auto* eval = app.add_subcommand("eval", "Evaluate SKPCA, KPCA and naive thresholding on one split");
    auto* sweep = app.add_subcommand("sweep", "Sweep the L1 ratio over --grid");
    auto* trials = app.add_subcommand("trials", "Repeat seeded splits and summarize");
    auto* probe = app.add_subcommand("probe", "Kernel-column representability by a point subset");

    app.add_option("--data", o.data, "CSV file or IDX images");
    app.add_option("--labels", o.labels, "IDX labels file");
    app.add_option("--format", o.format, "csv | idx | rings | gaussian (synthetic)")
        ->check(CLI::IsMember({"csv", "idx", "rings", "gaussian"}))
        ->capture_default_str();
    app.add_option("--label-column", o.label_column, "CSV label column")->capture_default_str();
    app.add_option("--inlier", o.inlier, "Inlier label(s), comma-separated")->capture_default_str();
    app.add_option("--outlier", o.outlier, "Outlier label(s), comma-separated; * for all others")
        ->capture_default_str();
    app.add_option("--train", o.train, "Training inliers")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--test-inliers", o.test_inliers, "Test inliers")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--test-outliers", o.test_outliers, "Test outliers")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--noise", o.noise, "Ring noise for --format rings")->capture_default_str();
    app.add_option("--dim", o.dim, "Dimension for --format gaussian")->check(CLI::PositiveNumber)
        ->capture_default_str();

    app.add_option("--pcs", o.pcs, "Number of components")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--l1-ratio", o.l1_ratio, "L1 weight over ridge weight")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--ridge", o.ridge, "Ridge weight (default 1e-4 * lambda_max^2)");
    auto* sigma = app.add_option("--sigma-sq", o.sigma_sq, "RBF bandwidth sigma^2");
    auto* sigma_auto = app.add_flag("--sigma-auto", o.sigma_auto, "Mean pairwise squared distance (default)");
    sigma->excludes(sigma_auto);
    app.add_option("--threshold-quantile", o.threshold_quantile, "Training-score quantile for the threshold")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app.add_option("--threshold", o.threshold, "Fixed score threshold (overrides the quantile)");
    app.add_option("--max-outer", o.max_outer, "Outer iteration cap")->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("--dense", o.dense, "fit: store the dense KPCA basis");
    app.add_flag("--approx-potential", o.approx_potential,
                 "fit: replace the full training side array by weighted representatives");

    app.add_option("--seed", o.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--out", o.out, "Model file (fit), verdict file (score) or output directory");
    app.add_option("--model", o.model, "Model file for score");
    app.add_option("--trials,--n", o.trials, "Trial count (trials) or candidate subsets (probe)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--grid", o.grid, "Comma-separated L1 ratios")->delimiter(',')->capture_default_str();
    app.add_option("--subset", o.subset, "probe: subset size")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_flag("--serial", o.serial, "Use the serial reference kernels");
    app.add_option("--threads", o.threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "skpca: cli: " << e.what() << '\n';
        return e.get_exit_code() ? e.get_exit_code() : 2;
    }

#ifdef SKPCA_HAVE_OPENMP
    if (o.threads > 0) omp_set_num_threads(o.threads);
#endif

    try {
        if (fit->parsed()) return cmd_fit(o);
        if (score->parsed()) return cmd_score(o);
        if (eval->parsed()) return cmd_eval(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (trials->parsed()) return cmd_trials(o);
        if (probe->parsed()) return cmd_probe(o);
    } catch (const Error& e) {
        std::cerr << "skpca: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "skpca: internal: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
