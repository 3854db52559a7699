#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = ICF_CLI_TEST_WORKDIR;

struct RunResult {
    int code;
    std::string output;  // stdout and stderr combined
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write(const std::string& name, const std::string& text) {
    fs::create_directories(kDir);
    std::ofstream(kDir / name, std::ios::binary) << text;
}

std::string p(const std::string& name) { return (kDir / name).string(); }

RunResult run(const std::string& args) {
    fs::create_directories(kDir);
    const fs::path log = kDir / "last_run.txt";
    const std::string cmd = std::string(ICF_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("cli ingest") {
    write("events.csv", "u1,m1\nu1,m1\nu1,m2\n");
    auto r = run("ingest --input " + p("events.csv") + " --output " + p("counts.csv"));
    CHECK(r.code == 0);
    CHECK(contains(slurp(kDir / "counts.csv"), "u1,m1,2\nu1,m2,1\n"));

    write("bad.csv", "u1,m1\nu1\nu2,m3\n");
    r = run("ingest --input " + p("bad.csv") + " --output " + p("bad_counts.csv"));
    CHECK(r.code == 2);
    CHECK(contains(r.output, "line 2"));

    write("empty.csv", "");
    r = run("ingest --input " + p("empty.csv") + " --output " + p("empty_counts.csv"));
    CHECK(r.code == 0);
    CHECK(fs::exists(kDir / "empty_counts.csv"));

    r = run("ingest --input " + p("does_not_exist.csv") + " --output " + p("x.csv"));
    CHECK(r.code == 3);

    write("negative.csv", "u1,m1,-3\n");
    CHECK(run("ingest --format aggregated --input " + p("negative.csv") + " --output " + p("x.csv")).code == 2);
}

TEST_CASE("cli split") {
    std::string counts;
    for (int u = 0; u < 20; ++u) {
        for (int i = 0; i < 10; ++i) counts += "u" + std::to_string(u) + ",i" + std::to_string(i) + "," + std::to_string(1 + (u + i) % 4) + "\n";
    }
    write("tenper.csv", counts);
    REQUIRE(run("ratings --input " + p("tenper.csv") + " --output " + p("tenper_r.csv")).code == 0);
    REQUIRE(run("split --fraction 0.1 --seed 3 --input " + p("tenper_r.csv") + " --train-out " + p("s_train.csv") +
                " --test-out " + p("s_test.csv")).code == 0);
    std::istringstream test(slurp(kDir / "s_test.csv"));
    std::string line;
    std::size_t held = 0;
    while (std::getline(test, line)) held += !line.starts_with("#");
    CHECK(held == 20);
    CHECK(contains(slurp(kDir / "s_test.csv.meta.json"), "\"seed\": 3"));

    const std::string first = slurp(kDir / "s_train.csv");
    REQUIRE(run("split --fraction 0.1 --seed 3 --input " + p("tenper_r.csv") + " --train-out " + p("s_train.csv") +
                " --test-out " + p("s_test.csv")).code == 0);
    CHECK(slurp(kDir / "s_train.csv") == first);

    CHECK(run("split --fraction 1.5 --input " + p("tenper_r.csv") + " --train-out " + p("a.csv") + " --test-out " + p("b.csv")).code == 1);
    CHECK(run("split --fraction 0 --input " + p("tenper_r.csv") + " --train-out " + p("a.csv") + " --test-out " + p("b.csv")).code == 1);
}

TEST_CASE("cli synth") {
    REQUIRE(run("synth --density 0 --out " + p("synth_empty.csv")).code == 0);
    CHECK(slurp(kDir / "synth_empty.csv").empty());
    REQUIRE(run("synth --users 30 --items 20 --seed 4 --out " + p("synth_a.csv")).code == 0);
    REQUIRE(run("synth --users 30 --items 20 --seed 4 --out " + p("synth_b.csv")).code == 0);
    CHECK(slurp(kDir / "synth_a.csv") == slurp(kDir / "synth_b.csv"));
    CHECK(run("synth --density 2 --out " + p("x.csv")).code == 1);
}

TEST_CASE("cli train, evaluate, predict") {
    REQUIRE(run("synth --users 80 --items 30 --density 0.2 --seed 8 --out " + p("t_log.csv")).code == 0);
    REQUIRE(run("ingest --format aggregated --input " + p("t_log.csv") + " --output " + p("t_counts.csv")).code == 0);
    REQUIRE(run("ratings --input " + p("t_counts.csv") + " --output " + p("t_r.csv")).code == 0);
    REQUIRE(run("split --input " + p("t_r.csv") + " --train-out " + p("t_train.csv") + " --test-out " + p("t_test.csv")).code == 0);

    SUBCASE("defaults are echoed") {
        const auto r = run("train --model nade --epochs 1 --train " + p("t_train.csv") + " --out " + p("t_default.bin"));
        CHECK(r.code == 0);
        CHECK(contains(r.output, "lr=0.01 batch=200 decay=0.01 H=256"));
        const auto imf = run("train --model imf --iterations 1 --train " + p("t_train.csv") + " --out " + p("t_default_imf.bin"));
        CHECK(imf.code == 0);
        CHECK(contains(imf.output, "F=256"));
    }
    SUBCASE("usage errors") {
        CHECK(run("train --epochs 0 --train " + p("t_train.csv") + " --out " + p("x.bin")).code == 1);
        CHECK(run("train --model svd --train " + p("t_train.csv") + " --out " + p("x.bin")).code == 1);
        CHECK(run("sweep --alphas \"\" --train " + p("t_train.csv") + " --test " + p("t_test.csv") + " --out " + p("x.csv")).code == 1);
        CHECK(run("").code == 1);
    }
    SUBCASE("trained models evaluate") {
        for (const std::string kind : {"nade", "imf"}) {
            const std::string model = p("t_" + kind + ".bin");
            REQUIRE(run("train --model " + kind + " --hidden 8 --factors 4 --epochs 2 --iterations 2 --train " + p("t_train.csv") +
                        " --out " + model).code == 0);
            CHECK(contains(slurp(model + ".trace.csv"), kind == "nade" ? "epoch,loss" : "half_sweep,objective"));
            const auto r = run("evaluate --model " + model + " --train " + p("t_train.csv") + " --test " + p("t_test.csv") +
                               " --report " + p("t_report.csv"));
            CHECK(r.code == 0);
            const std::string report = slurp(kDir / "t_report.csv");
            const auto footer = report.rfind("MPR,");
            REQUIRE(footer != std::string::npos);
            const double mpr = std::stod(report.substr(footer + 4));
            CHECK(mpr >= 0.0);
            CHECK(mpr <= 100.0);
            CHECK(contains(slurp(kDir / "t_report.csv.json"), "\"n_skipped\""));
        }
        CHECK(run("evaluate --model " + p("missing.bin") + " --train " + p("t_train.csv") + " --test " + p("t_test.csv") +
                  " --report " + p("x.csv")).code == 3);
        // a model for a different item count is a data error
        write("other.csv", "a,x,1\nb,y,1\n");
        REQUIRE(run("train --hidden 2 --epochs 1 --train " + p("other.csv") + " --out " + p("other.bin")).code == 0);
        CHECK(run("evaluate --model " + p("other.bin") + " --train " + p("t_train.csv") + " --test " + p("t_test.csv") +
                  " --report " + p("x.csv")).code == 2);
    }
    SUBCASE("predict") {
        REQUIRE(run("train --hidden 8 --epochs 2 --train " + p("t_train.csv") + " --out " + p("t_pred.bin")).code == 0);
        const auto r = run("predict -k 1000 --user u0 --model " + p("t_pred.bin") + " --train " + p("t_train.csv"));
        REQUIRE(r.code == 0);
        std::istringstream lines(r.output);
        std::string line;
        std::vector<std::pair<double, std::string>> rows;
        while (std::getline(lines, line)) {
            const auto comma = line.find(',');
            rows.emplace_back(std::stod(line.substr(comma + 1)), line.substr(0, comma));
        }
        // every candidate, by score descending then id ascending
        const std::string train = slurp(kDir / "t_train.csv");
        std::size_t watched = 0;
        std::istringstream tl(train);
        while (std::getline(tl, line)) watched += line.starts_with("u0,");
        std::size_t items = 0;
        std::istringstream hl(train);
        while (std::getline(hl, line)) {
            if (line.starts_with("#items")) items = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
        }
        CHECK(rows.size() == items - watched);
        for (std::size_t k = 1; k < rows.size(); ++k) {
            const bool ordered = rows[k - 1].first > rows[k].first ||
                                 (rows[k - 1].first == rows[k].first && rows[k - 1].second < rows[k].second);
            CHECK(ordered);
        }
        CHECK(run("predict --user nobody --model " + p("t_pred.bin") + " --train " + p("t_train.csv")).code == 2);
    }
    SUBCASE("config file with flag override") {
        write("train.ini", "[train]\nhidden=5\nepochs=1\nlr=0.02\n");
        const auto r = run("--config " + p("train.ini") + " train --lr 0.03 --train " + p("t_train.csv") + " --out " + p("t_cfg.bin"));
        CHECK(r.code == 0);
        CHECK(contains(r.output, "lr=0.03"));
        CHECK(contains(r.output, "H=5"));
    }
}

TEST_CASE("cli sweep format") {
    REQUIRE(run("synth --users 60 --items 25 --density 0.2 --seed 2 --out " + p("w_log.csv")).code == 0);
    REQUIRE(run("ratings --input " + p("w_log.csv") + " --output " + p("w_r.csv")).code == 0);
    REQUIRE(run("split --input " + p("w_r.csv") + " --train-out " + p("w_train.csv") + " --test-out " + p("w_test.csv")).code == 0);
    REQUIRE(run("sweep --alphas 1,10,100,300 --hidden 4 --epochs 1 --factors 3 --iterations 1 --train " + p("w_train.csv") +
                " --test " + p("w_test.csv") + " --out " + p("w_sweep.csv")).code == 0);
    std::istringstream csv(slurp(kDir / "w_sweep.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "model,alpha,mpr");
    int nade = 0, imf = 0;
    while (std::getline(csv, line)) {
        nade += line.starts_with("nade,");
        imf += line.starts_with("imf,");
    }
    CHECK(nade == 4);
    CHECK(imf == 4);
}

TEST_CASE("cli evaluate: untrained NADE ranks like a random list") {
    REQUIRE(run("synth --users 2500 --items 500 --density 0.1 --seed 21 --out " + p("r_log.csv")).code == 0);
    REQUIRE(run("ratings --input " + p("r_log.csv") + " --output " + p("r_r.csv")).code == 0);
    REQUIRE(run("split --seed 22 --input " + p("r_r.csv") + " --train-out " + p("r_train.csv") + " --test-out " + p("r_test.csv")).code == 0);
    // a zero learning rate leaves the seeded initialization untouched
    REQUIRE(run("train --lr 0 --epochs 1 --seed 23 --train " + p("r_train.csv") + " --out " + p("r_init.bin")).code == 0);
    REQUIRE(run("evaluate --threads 2 --model " + p("r_init.bin") + " --train " + p("r_train.csv") + " --test " + p("r_test.csv") +
                " --report " + p("r_report.csv")).code == 0);
    const std::string summary = slurp(kDir / "r_report.csv.json");
    const auto at = summary.find("\"mpr\": ");
    REQUIRE(at != std::string::npos);
    const double mpr = std::stod(summary.substr(at + 7));
    const auto pairs_at = summary.find("\"n_pairs\": ");
    CHECK(std::stoul(summary.substr(pairs_at + 11)) >= 10000);
    CHECK(mpr > 48.0);
    CHECK(mpr < 52.0);
}
