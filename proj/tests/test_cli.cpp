#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gclrec/rng.hpp"
#include "support/test_util.hpp"

namespace {

std::string cli_path() {
  const char* p = std::getenv("GCLREC_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& args, std::string* out_path = nullptr) {
  static int call = 0;
  const std::string capture =
      (std::filesystem::temp_directory_path() /
       ("gclrec_cli_out_" + std::to_string(call++) + ".txt"))
          .string();
  const std::string cmd = cli_path() + " " + args + " > " + capture + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out_path) *out_path = capture;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

/// Dense-ish toy dataset: every user and item has >= 4 interactions.
void write_toy_data(const std::string& path, int n_users = 24, int n_items = 18) {
  gclrec::Rng rng(404);
  std::ostringstream content;
  for (int u = 0; u < n_users; ++u)
    for (int i = 0; i < n_items; ++i)
      if ((u + 2 * i) % 3 != 0 || rng.uniform01() < 0.3)
        content << "u" << u << "\ti" << i << "\n";
  test_util::write_file(path, content.str());
}

const std::string kToyOverrides =
    " --set min_interactions=4 --set embedding_dim=8 --set layers=2"
    " --set batch_size=64 --set max_epochs=4 --set patience=10"
    " --set threads=2";

std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_CASE("missing data file exits with code 2 and names the path") {
  test_util::TempDir tmp("cli_missing");
  std::string out;
  const int code = run("pretrain --data " + tmp.file("nope.tsv") + " --out " +
                           tmp.file("out") + kToyOverrides,
                       &out);
  CHECK(code == 2);
  CHECK(test_util::read_file(out).find("nope.tsv") != std::string::npos);
}

TEST_CASE("pretrain completes quickly on a toy dataset and is reproducible") {
  test_util::TempDir tmp("cli_pre");
  write_toy_data(tmp.file("data.tsv"));

  const auto t0 = std::chrono::steady_clock::now();
  const int code = run("pretrain --data " + tmp.file("data.tsv") + " --out " +
                       tmp.file("a") + " --seed 5" + kToyOverrides);
  const double sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(code == 0);
  CHECK(sec < 60.0);

  REQUIRE(run("pretrain --data " + tmp.file("data.tsv") + " --out " +
              tmp.file("b") + " --seed 5" + kToyOverrides) == 0);
  CHECK(test_util::read_file(tmp.file("a/checkpoint.bin")) ==
        test_util::read_file(tmp.file("b/checkpoint.bin")));
  CHECK(test_util::read_file(tmp.file("a/metrics.jsonl")) ==
        test_util::read_file(tmp.file("b/metrics.jsonl")));

  // Metrics log has one line per epoch; manifest records resolved settings.
  const nlohmann::json manifest =
      nlohmann::json::parse(test_util::read_file(tmp.file("a/manifest.json")));
  CHECK(manifest["settings"]["embedding_dim"] == "8");
  CHECK(manifest["settings"]["lambda_ssl"] == "0.10000000000000001");
  CHECK(count_lines(tmp.file("a/metrics.jsonl")) >= 1);
}

TEST_CASE("suggest emits |E0|+|E1| rows with flags in {0,1}") {
  test_util::TempDir tmp("cli_sug");
  write_toy_data(tmp.file("data.tsv"));
  REQUIRE(run("pretrain --data " + tmp.file("data.tsv") + " --out " +
              tmp.file("pre") + " --seed 5" + kToyOverrides) == 0);
  REQUIRE(run("suggest --data " + tmp.file("data.tsv") + " --checkpoint " +
              tmp.file("pre/checkpoint.bin") + " --out " + tmp.file("sug") +
              " --seed 5" + kToyOverrides) == 0);

  std::ifstream in(tmp.file("sug/candidates.tsv"));
  std::string line;
  std::size_t rows = 0, originals = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    const std::size_t t2 = line.rfind('\t');
    REQUIRE(t2 != std::string::npos);
    const std::string flag = line.substr(t2 + 1);
    REQUIRE((flag == "0" || flag == "1"));
    originals += flag == "1";
  }
  CHECK(rows > originals);
  CHECK(originals > 0);
}

TEST_CASE("train lda_gcl refuses to run without candidates or a checkpoint") {
  test_util::TempDir tmp("cli_lda_err");
  write_toy_data(tmp.file("data.tsv"));
  std::string out;
  const int code = run("train --data " + tmp.file("data.tsv") + " --out " +
                           tmp.file("out") + " --set model=lda_gcl" +
                           kToyOverrides,
                       &out);
  CHECK(code == 1);
  CHECK(test_util::read_file(out).find("pretrain") != std::string::npos);
}

TEST_CASE("the full pretrain-suggest-train-eval pipeline runs") {
  test_util::TempDir tmp("cli_pipe");
  write_toy_data(tmp.file("data.tsv"));
  // Config file exercises the file + --set precedence.
  test_util::write_file(tmp.file("run.conf"),
                        "model = lda_gcl\nembedding_dim = 16\nlayers = 2\n"
                        "batch_size = 64\nmax_epochs = 3\npatience = 10\n"
                        "min_interactions = 4\nthreads = 2\nseed = 9\n");

  REQUIRE(run("pretrain --config " + tmp.file("run.conf") + " --data " +
              tmp.file("data.tsv") + " --out " + tmp.file("pre") +
              " --set embedding_dim=8") == 0);
  const nlohmann::json pre_manifest =
      nlohmann::json::parse(test_util::read_file(tmp.file("pre/manifest.json")));
  CHECK(pre_manifest["settings"]["embedding_dim"] == "8");  // flag beats file
  CHECK(pre_manifest["settings"]["model"] == "lightgcn");   // pretrain maps lda

  REQUIRE(run("suggest --config " + tmp.file("run.conf") + " --data " +
              tmp.file("data.tsv") + " --checkpoint " +
              tmp.file("pre/checkpoint.bin") + " --out " + tmp.file("sug") +
              " --set embedding_dim=8") == 0);

  REQUIRE(run("train --config " + tmp.file("run.conf") + " --data " +
              tmp.file("data.tsv") + " --candidates " +
              tmp.file("sug/candidates.tsv") + " --out " + tmp.file("lda") +
              " --set embedding_dim=8") == 0);
  // Two log lines (t, f) per epoch for the adversarial trainer.
  const std::size_t lines = count_lines(tmp.file("lda/metrics.jsonl"));
  const nlohmann::json lda_manifest =
      nlohmann::json::parse(test_util::read_file(tmp.file("lda/manifest.json")));
  CHECK(lines % 2 == 0);
  CHECK(lines >= 2);

  REQUIRE(run("eval --config " + tmp.file("run.conf") + " --data " +
              tmp.file("data.tsv") + " --checkpoint " +
              tmp.file("lda/checkpoint.bin") + " --out " + tmp.file("ev1") +
              " --set embedding_dim=8 --groups 5") == 0);
  REQUIRE(run("eval --config " + tmp.file("run.conf") + " --data " +
              tmp.file("data.tsv") + " --checkpoint " +
              tmp.file("lda/checkpoint.bin") + " --out " + tmp.file("ev2") +
              " --set embedding_dim=8 --groups 5") == 0);
  CHECK(test_util::read_file(tmp.file("ev1/report.csv")) ==
        test_util::read_file(tmp.file("ev2/report.csv")));

  const nlohmann::json report =
      nlohmann::json::parse(test_util::read_file(tmp.file("ev1/report.json")));
  CHECK(report["overall"].contains("recall@10"));
  CHECK(report["overall"].contains("ndcg@20"));
  CHECK(report["overall"].contains("recall@50"));  // default cutoffs
  CHECK(report["groups"].contains("G5"));
}

TEST_CASE("train model=lightgcn needs no candidates") {
  test_util::TempDir tmp("cli_lgn");
  write_toy_data(tmp.file("data.tsv"));
  REQUIRE(run("train --data " + tmp.file("data.tsv") + " --out " +
              tmp.file("out") + " --set model=lightgcn" + kToyOverrides) == 0);
  CHECK(count_lines(tmp.file("out/metrics.jsonl")) >= 1);
}

TEST_CASE("unknown config keys are rejected") {
  test_util::TempDir tmp("cli_bad");
  write_toy_data(tmp.file("data.tsv"));
  std::string out;
  const int code = run("train --data " + tmp.file("data.tsv") + " --out " +
                           tmp.file("out") + " --set modle=lightgcn",
                       &out);
  CHECK(code == 1);
  CHECK(test_util::read_file(out).find("unknown key") != std::string::npos);
}
