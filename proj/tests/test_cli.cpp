#include "doctest.h"

#include "skpca/io.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace skpca;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
    fs::path dir;
    Sandbox() {
        dir = fs::temp_directory_path() / ("skpca_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir);
    }
    ~Sandbox() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    int run(const std::string& args) const {
        const std::string cmd = std::string(SKPCA_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() +
                                " 2> " + (dir / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string out() const { return read_file(dir / "stdout.txt"); }
    std::string err() const { return read_file(dir / "stderr.txt"); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

const std::string kRings = " --format rings --train 120 --test-inliers 60 --test-outliers 60 --pcs 2 --l1-ratio 1 --seed 3";

}  // namespace

TEST_CASE("fit then score a held-out file") {
    Sandbox sb;
    REQUIRE(sb.run("fit" + kRings + " --out " + sb.path("m.skpca")) == 0);
    CHECK(sb.out().find("sparsity_pct") != std::string::npos);
    REQUIRE(fs::exists(sb.path("m.skpca")));

    LabeledRows held;
    held.rows.resize(3, 2);
    held.rows << 0.0, 1.0, 2.0, 0.0, 25.0, 25.0;
    held.labels = {"0", "0", "1"};
    held.feature_names = {"x", "y"};
    write_csv(sb.path("held.csv"), held, "label");

    REQUIRE(sb.run("score --model " + sb.path("m.skpca") + " --data " + sb.path("held.csv")) == 0);
    const auto rows = lines(sb.out());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "row\tscore\tverdict\tlabel");
    CHECK(rows[3].find("\toutlier\t1") != std::string::npos);

    const DetectorModel m = load_model(sb.path("m.skpca"));
    std::istringstream first(rows[1]);
    std::string idx, score;
    std::getline(first, idx, '\t');
    std::getline(first, score, '\t');
    const std::vector<double> z{0.0, 1.0};
    CHECK(std::stod(score) == doctest::Approx(reconstruction_error(z, m)).epsilon(1e-10));

    SUBCASE("dimension mismatch is reported") {
        LabeledRows wide = held;
        wide.rows.resize(1, 3);
        wide.rows << 1.0, 2.0, 3.0;
        wide.labels = {"0"};
        wide.feature_names = {"a", "b", "c"};
        write_csv(sb.path("wide.csv"), wide, "label");
        CHECK(sb.run("score --model " + sb.path("m.skpca") + " --data " + sb.path("wide.csv")) != 0);
        CHECK(sb.err().rfind("skpca: cli: ", 0) == 0);
    }
}

TEST_CASE("sweep with a one-point grid") {
    Sandbox sb;
    REQUIRE(sb.run("sweep" + kRings + " --grid 1 --out " + sb.path("sw")) == 0);
    const auto rows = lines(read_file(sb.path("sw/curve.tsv")));
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].rfind("skpca\t1.000000\t", 0) == 0);
    CHECK(rows[2].rfind("kpca\t", 0) == 0);
    CHECK(fs::exists(sb.path("sw/curve.txt")));
    CHECK(read_file(sb.path("sw/f1_vs_sparsity.svg")).rfind("<svg", 0) == 0);
}

TEST_CASE("trials are repeatable") {
    Sandbox sb;
    const std::string args = "trials" + kRings + " --n 3 --out ";
    REQUIRE(sb.run(args + sb.path("a")) == 0);
    const std::string first = sb.out();
    REQUIRE(sb.run(args + sb.path("b")) == 0);
    CHECK(sb.out() == first);
    for (const char* f : {"trials.tsv", "trials.txt", "summary.tsv", "summary.txt", "variability.svg"}) {
        CHECK(read_file(sb.path(std::string("a/") + f)) == read_file(sb.path(std::string("b/") + f)));
    }
    CHECK(lines(read_file(sb.path("a/trials.tsv"))).size() == 4);
}

TEST_CASE("eval and probe outputs") {
    Sandbox sb;
    REQUIRE(sb.run("eval" + kRings + " --out " + sb.path("ev")) == 0);
    const auto rows = lines(read_file(sb.path("ev/metrics.tsv")));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "method\tf1\tauroc\tsparsity_pct\tnonzeros_per_pc");
    CHECK(fs::exists(sb.path("ev/roc.tsv")));

    REQUIRE(sb.run("probe --format gaussian --train 100 --subset 100 --sigma-sq 1 --out " + sb.path("pr")) == 0);
    CHECK(read_file(sb.path("pr/probe.tsv")).find("max_kernel_deviation\t0.000000000") != std::string::npos);
}

TEST_CASE("config file and flag precedence") {
    Sandbox sb;
    {
        std::ofstream cfg(sb.path("run.ini"));
        cfg << "format = rings\ntrain = 80\npcs = 4\nl1-ratio = 1\n";
    }
    REQUIRE(sb.run("fit --config " + sb.path("run.ini") + " --pcs 2 --out " + sb.path("m.skpca")) == 0);
    const DetectorModel m = load_model(sb.path("m.skpca"));
    CHECK(m.n_train == 80);
    CHECK(m.q + static_cast<Index>(m.dropped_columns.size()) == 2);
}

TEST_CASE("errors exit nonzero with one line") {
    Sandbox sb;
    CHECK(sb.run("fit --no-such-flag") != 0);
    CHECK(lines(sb.err()).size() == 1);
    CHECK(sb.run("") != 0);
    CHECK(sb.run("eval --format csv") != 0);
    CHECK(sb.err() == "skpca: cli: --data is required for format csv\n");
    CHECK(sb.run("score --model " + sb.path("missing.skpca") + " --data x.csv") != 0);
    CHECK(sb.err().rfind("skpca: cli_io: ", 0) == 0);
    CHECK(sb.run("fit" + kRings + " --l1-ratio 1e12 --out " + sb.path("m.skpca")) != 0);
    CHECK(lines(sb.err()).size() == 1);
    CHECK(sb.run("fit --sigma-sq 1 --sigma-auto --format rings --out " + sb.path("m.skpca")) != 0);
}
