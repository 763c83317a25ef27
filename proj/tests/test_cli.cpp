// SPDX-License-Identifier: Apache-2.0
//
// Black-box CLI tests: exit codes (0 success, 1 runtime failure, 2 usage or
// config error), file outputs and idempotence. Drives the real binary via
// std::system.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "turbodsa/metrics.hpp"

using namespace turbodsa;
namespace fs = std::filesystem;

namespace {

std::string bin() {
    const char* b = std::getenv("TURBODSA_BIN");
    REQUIRE_MESSAGE(b != nullptr, "TURBODSA_BIN must point at the CLI binary");
    return b;
}

std::string data_dir() {
    const char* d = std::getenv("TURBODSA_DATA");
    REQUIRE_MESSAGE(d != nullptr, "TURBODSA_DATA must point at the data directory");
    return d;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("turbodsa_cli_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = bin() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// tiny end-to-end config against the bundled fixture corpus
std::string write_config(const TempDir& dir, const std::string& arch) {
    const std::string path = dir.file("cfg_" + arch + ".json");
    std::ofstream out(path);
    out << R"({
  "corpus": {"path": ")" << data_dir() << R"(/maritime_fixture.txt",
             "vocab": ")" << dir.file("vocab_" + arch + ".txt") << R"(",
             "max_len": 14, "validation_fraction": 0.1},
  "model": {"architecture": ")" << arch << R"(", "d1": 16, "d2": 4, "d3": 12, "d4": 3,
            "heads": 4, "encoder_layers": 1, "decoder_layers": 1, "ff_dim": 32,
            "conv_channels": 12, "conv_layers": 2, "conv_kernel": 3, "turbo_iterations": 2},
  "optimizer": {"learning_rate": 0.002},
  "training": {"batch_size": 64, "epochs": 2, "seeds": [0]},
  "channel": {"family": "rician", "snr_db": 2.0, "rician_k": 3.0},
  "output": {"checkpoint_dir": ")" << dir.file("ckpt_" + arch) << R"(",
             "output_dir": ")" << dir.file("out_" + arch) << R"("}
})";
    return path;
}

}  // namespace

TEST_CASE("build-vocab writes the vocabulary and reports its size") {
    TempDir dir;
    const std::string corpus = data_dir() + "/maritime_fixture.txt";

    CHECK(run("build-vocab --corpus " + corpus + " --out " + dir.file("v.txt")) == 0);
    std::ifstream in(dir.file("v.txt"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "<pad>");

    SUBCASE("missing corpus exits 1") {
        CHECK(run("build-vocab --corpus /no/such/file --out " + dir.file("x.txt")) == 1);
    }
    SUBCASE("missing required flag exits 2") { CHECK(run("build-vocab --out x.txt") == 2); }
    SUBCASE("huge min-freq keeps only the specials") {
        CHECK(run("build-vocab --corpus " + corpus + " --min-freq 1000000000 --out " +
                  dir.file("s.txt")) == 0);
        std::ifstream sin(dir.file("s.txt"));
        std::size_t lines = 0;
        std::string l;
        while (std::getline(sin, l)) ++lines;
        CHECK(lines == 4);
    }
}

TEST_CASE("tiny corpus build-vocab matches the documented size") {
    TempDir dir;
    std::ofstream corpus(dir.file("tiny.txt"));
    corpus << "a b\na\n";
    corpus.close();
    CHECK(run("build-vocab --corpus " + dir.file("tiny.txt") + " --out " +
              dir.file("tiny_vocab.txt")) == 0);
    std::ifstream in(dir.file("tiny_vocab.txt"));
    std::size_t lines = 0;
    std::string l;
    while (std::getline(in, l)) ++lines;
    CHECK(lines == 6);
}

TEST_CASE("train / evaluate / plot round trip" * doctest::timeout(1500)) {
    TempDir dir;
    const std::string cfg = write_config(dir, "turbo-dsa");

    SUBCASE("config errors exit 2") {
        std::ofstream bad(dir.file("bad.json"));
        bad << R"({"model": {"architecture": "warp-drive"}})";
        bad.close();
        CHECK(run("train --config " + dir.file("bad.json")) == 2);
        CHECK(run("train --config " + dir.file("nonexistent.json")) == 1);
    }

    REQUIRE(run("train --config " + cfg + " --seed 0") == 0);
    const std::string ckpt = dir.file("ckpt_turbo-dsa") + "/turbo-dsa_seed0.ckpt";
    REQUIRE(fs::exists(ckpt));
    REQUIRE(fs::exists(dir.file("out_turbo-dsa") + "/loss_turbo-dsa_seed0.csv"));

    SUBCASE("loss log carries the documented header") {
        std::ifstream in(dir.file("out_turbo-dsa") + "/loss_turbo-dsa_seed0.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "epoch,split,loss");
    }

    SUBCASE("resume continues training") {
        std::string cfg_text = read_file(cfg);
        const std::string needle = "\"epochs\": 2";
        const auto at = cfg_text.find(needle);
        REQUIRE(at != std::string::npos);
        cfg_text.replace(at, needle.size(), "\"epochs\": 3");
        std::ofstream more(dir.file("cfg_more.json"));
        more << cfg_text;
        more.close();
        CHECK(run("train --config " + dir.file("cfg_more.json") + " --seed 0 --resume " +
                  ckpt) == 0);
    }

    SUBCASE("evaluate writes the report CSV with the exact header") {
        const std::string report = dir.file("report.csv");
        REQUIRE(run("evaluate --config " + cfg + " --checkpoint " + ckpt +
                    " --snr \"-10:8:3\" --seed 0 --out " + report) == 0);
        std::ifstream in(report);
        std::string header;
        std::getline(in, header);
        CHECK(header == "model,channel,snr_db,metric,ngram,value,seed");
        MetricReport loaded = MetricReport::load_csv(report);
        CHECK(loaded.rows.size() == 7 * 5);  // 7 SNRs x (4 bleu + ss)

        SUBCASE("same seed twice gives identical bytes") {
            const std::string again = dir.file("report2.csv");
            REQUIRE(run("evaluate --config " + cfg + " --checkpoint " + ckpt +
                        " --snr \"-10:8:3\" --seed 0 --out " + again) == 0);
            CHECK(read_file(report) == read_file(again));
        }

        SUBCASE("plot emits one figure per metric/ngram pair plus tidy data") {
            const std::string plots = dir.file("plots");
            REQUIRE(run("plot --report " + report + " --out " + plots) == 0);
            for (const std::string stem : {"bleu-1", "bleu-2", "bleu-3", "bleu-4", "ss"}) {
                CHECK(fs::exists(plots + "/" + stem + ".svg"));
                CHECK(fs::exists(plots + "/" + stem + ".csv"));
            }
            const std::string svg = read_file(plots + "/bleu-1.svg");
            CHECK(svg.find("<svg") != std::string::npos);
            CHECK(svg.find("polyline") != std::string::npos);

            SUBCASE("box style renders boxes") {
                REQUIRE(run("plot --report " + report + " --out " + plots +
                            " --style box") == 0);
                const std::string box = read_file(plots + "/bleu-1.svg");
                CHECK(box.find("<rect") != std::string::npos);
            }
        }
    }

    SUBCASE("single SNR value and malformed grids") {
        CHECK(run("evaluate --config " + cfg + " --checkpoint " + ckpt +
                  " --snr 2 --seed 0 --out " + dir.file("single.csv")) == 0);
        CHECK(run("evaluate --config " + cfg + " --checkpoint " + ckpt +
                  " --snr 1:2 --out " + dir.file("bad.csv")) == 2);
        CHECK(run("evaluate --config " + cfg + " --checkpoint " + ckpt +
                  " --snr banana --out " + dir.file("bad.csv")) == 2);
    }

    SUBCASE("checkpoint mismatch exits 1") {
        const std::string other_cfg = write_config(dir, "deepsc");
        CHECK(run("train --config " + other_cfg + " --seed 0") == 0);
        CHECK(run("evaluate --config " + cfg + " --checkpoint " +
                  dir.file("ckpt_deepsc") + "/deepsc_seed0.ckpt --snr 2 --out " +
                  dir.file("m.csv")) == 1);
    }

    SUBCASE("TURBODSA_SEED env var is the seed fallback") {
        const std::string with_env = "TURBODSA_SEED=0 " + bin() + " evaluate --config " +
                                     cfg + " --checkpoint " + ckpt + " --snr 2 --out " +
                                     dir.file("env.csv") + " > /dev/null 2>&1";
        REQUIRE(WEXITSTATUS(std::system(with_env.c_str())) == 0);
        REQUIRE(run("evaluate --config " + cfg + " --checkpoint " + ckpt +
                    " --snr 2 --seed 0 --out " + dir.file("flag.csv")) == 0);
        CHECK(read_file(dir.file("env.csv")) == read_file(dir.file("flag.csv")));
    }
}

TEST_CASE("plot overlays multiple reports as model-comparison curves") {
    TempDir dir;
    std::vector<std::string> flags;
    for (const std::string model : {"turbo-dsa", "dsa", "deepsc", "cnn-ae"}) {
        MetricReport r;
        for (double snr : {-10.0, -4.0, 2.0})
            for (std::uint64_t seed : {0, 1})
                r.append({model, "rician", snr, "bleu", 1,
                          0.5 + 0.01 * static_cast<double>(model.size()) + 0.02 * snr / 10.0 +
                              0.001 * static_cast<double>(seed),
                          seed});
        const std::string path = dir.file("r_" + model + ".csv");
        r.save_csv(path);
        flags.push_back("--report " + path);
    }
    std::string args = "plot --out " + dir.file("plots");
    for (const auto& f : flags) args += " " + f;
    REQUIRE(run(args) == 0);

    const std::string svg = read_file(dir.file("plots") + "/bleu-1.svg");
    std::size_t curves = 0;
    for (std::size_t at = svg.find("<polyline"); at != std::string::npos;
         at = svg.find("<polyline", at + 1))
        ++curves;
    CHECK(curves == 4);
    for (const std::string model : {"turbo-dsa", "dsa", "deepsc", "cnn-ae"})
        CHECK(svg.find(">" + model + "<") != std::string::npos);
    // the tidy data keeps every underlying row
    MetricReport tidy = MetricReport::load_csv(dir.file("plots") + "/bleu-1.csv");
    CHECK(tidy.rows.size() == 4 * 3 * 2);
}

TEST_CASE("plot rejects empty input") {
    TempDir dir;
    std::ofstream empty(dir.file("empty.csv"));
    empty << MetricReport::kCsvHeader << "\n";
    empty.close();
    CHECK(run("plot --report " + dir.file("empty.csv") + " --out " + dir.file("p")) == 1);
    CHECK(run("plot --report " + dir.file("missing.csv") + " --out " + dir.file("p")) == 1);
    CHECK(run("plot --report " + dir.file("empty.csv") + " --out " + dir.file("p") +
              " --style pie") == 2);
}

TEST_CASE("help exits 0 and unknown flags exit 2") {
    CHECK(run("--help") == 0);
    CHECK(run("train --help") == 0);
    CHECK(run("train --frobnicate") == 2);
    CHECK(run("") == 2);  // a subcommand is required
}
