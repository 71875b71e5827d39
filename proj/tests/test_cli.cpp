#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "test_util.hpp"

using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args) {
  static int counter = 0;
  const fs::path base = fs::temp_directory_path() / ("mvsd_cli_io_" + std::to_string(counter++));
  const std::string cmd = std::string(MVSD_CLI_PATH) + " " + args + " > " + base.string() + ".out 2> " + base.string() + ".err";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(base.string() + ".out");
  r.err = slurp(base.string() + ".err");
  return r;
}

std::map<std::string, std::string> key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

// Small model settings so each CLI training run takes a few seconds.
const std::string kSmall =
    " --set input_dim=32 --set hidden=8 --set classifier_hidden=8 --set kge_dim=8 --set kge_epochs=20"
    " --set batch_size=64 --set fanout=4";

// Shared small dataset, generated once.
const fs::path& small_data() {
  static const fs::path dir = [] {
    const fs::path d = temp_dir("cli_data");
    const Run r = cli("gen-synthetic --out " + d.string() + " --n-reviews 120 --n-movies 12 --n-users 10");
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

const fs::path& trained_run() {
  static const fs::path dir = [] {
    const fs::path d = temp_dir("cli_train");
    const Run r = cli("train --quiet --data " + small_data().string() + " --out " + d.string() + " --epochs 4 --seed 3" + kSmall);
    INFO(r.err);
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("gen-synthetic is deterministic") {
  const auto a = temp_dir("cli_gen_a"), b = temp_dir("cli_gen_b");
  REQUIRE(cli("gen-synthetic --out " + a.string() + " --n-reviews 50 --n-movies 6 --n-users 5 --seed 4").code == 0);
  REQUIRE(cli("gen-synthetic --out " + b.string() + " --n-reviews 50 --n-movies 6 --n-users 5 --seed 4").code == 0);
  for (const char* f : {"users.tsv", "movies.tsv", "casts.tsv", "reviews.tsv", "synthetic.cfg"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
}

TEST_CASE("gen-synthetic with default sizes finishes quickly") {
  const auto d = temp_dir("cli_gen_default");
  const auto t0 = std::chrono::steady_clock::now();
  const Run r = cli("gen-synthetic --out " + d.string());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(r.code == 0);
  CHECK(secs < 10.0);
  CHECK(r.out.find("500 reviews") != std::string::npos);
}

TEST_CASE("argument errors exit non-zero with a message") {
  const Run zero = cli("gen-synthetic --out " + temp_dir("cli_zero").string() + " --n-reviews 0");
  CHECK(zero.code != 0);
  CHECK_FALSE(zero.err.empty());

  const Run kge = cli("train-kge --out " + temp_dir("cli_kge_usage").string());
  CHECK(kge.code != 0);
  CHECK(kge.err.find("--data") != std::string::npos);

  CHECK(cli("").code != 0);
  CHECK(cli("frobnicate").code != 0);
  const Run bad_set = cli("train --data " + small_data().string() + " --out " + temp_dir("cli_badset").string() +
                          " --set no_such_key=1");
  CHECK(bad_set.code != 0);
  CHECK(bad_set.err.find("no_such_key") != std::string::npos);
  const Run missing = cli("train --data /nonexistent/dir --out " + temp_dir("cli_missing").string());
  CHECK(missing.code != 0);
}

TEST_CASE("train-kge writes embeddings and a report") {
  const auto d = temp_dir("cli_kge");
  const Run r = cli("train-kge --data " + small_data().string() + " --out " + d.string() + " --dim 8 --epochs 30");
  REQUIRE(r.code == 0);
  const auto kv = key_values(slurp(d / "kge_report.txt"));
  CHECK(kv.at("dim") == "8");
  CHECK(std::stod(kv.at("concordance")) > std::stod(kv.at("concordance_untrained")));
  CHECK(fs::exists(d / "kge_embeddings.tsv"));
  CHECK(slurp(d / "run.cfg").find("kge=" + (d / "kge_embeddings.tsv").string()) != std::string::npos);
  // The embeddings feed a training run.
  const auto t = temp_dir("cli_kge_train");
  const Run tr = cli("train --quiet --config " + (d / "run.cfg").string() + " --out " + t.string() + " --epochs 1" + kSmall);
  INFO(tr.err);
  CHECK(tr.code == 0);
}

TEST_CASE("train writes one history line per epoch") {
  const fs::path& d = trained_run();
  const std::string hist = slurp(d / "history.csv");
  std::size_t lines = 0;
  for (char c : hist) lines += c == '\n';
  CHECK(lines == 4);
  CHECK(fs::exists(d / "model.ckpt"));
  const auto m = key_values(slurp(d / "metrics.txt"));
  CHECK(m.count("test_f1"));
  CHECK(m.count("val_auc"));
}

TEST_CASE("evaluate on a checkpoint reproduces validation F1") {
  const fs::path& d = trained_run();
  const auto train_metrics = key_values(slurp(d / "metrics.txt"));
  const Run r = cli("evaluate --checkpoint " + (d / "model.ckpt").string() + " --split valid");
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto ev = key_values(r.out);
  CHECK(std::abs(std::stod(ev.at("valid_f1")) - std::stod(train_metrics.at("val_f1"))) < 1e-9);
  CHECK(std::abs(std::stod(ev.at("valid_auc")) - std::stod(train_metrics.at("val_auc"))) < 1e-9);
  const Run t = cli("evaluate --checkpoint " + (d / "model.ckpt").string());
  CHECK(std::abs(std::stod(key_values(t.out).at("test_f1")) - std::stod(train_metrics.at("test_f1"))) < 1e-9);
}

TEST_CASE("predict prints label and probability for one review") {
  const fs::path& d = trained_run();
  const auto p = temp_dir("cli_predict");
  const Run r = cli("predict --checkpoint " + (d / "model.ckpt").string() + " --review r7 --out " + p.string());
  INFO(r.err);
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string id, label;
  double prob = -1;
  in >> id >> label >> prob;
  CHECK(id == "r7");
  CHECK((label == "spoiler" || label == "not_spoiler"));
  CHECK(prob >= 0.0);
  CHECK(prob <= 1.0);
  CHECK((label == "spoiler") == (prob > 0.5));
  CHECK(slurp(p / "predictions.csv").rfind("review_id,probability,prediction,label,split\nr7,", 0) == 0);
  CHECK(cli("predict --checkpoint " + (d / "model.ckpt").string() + " --review nope").code != 0);
}

TEST_CASE("two identical train invocations give identical files") {
  // The output directory is part of the config, so both runs use the same one.
  const auto d = temp_dir("cli_det");
  const std::string args = "train --quiet --out " + d.string() + " --data " + small_data().string() + " --epochs 2 --seed 11" + kSmall;
  REQUIRE(cli(args).code == 0);
  const std::string hist = slurp(d / "history.csv"), ckpt = slurp(d / "model.ckpt"), metrics = slurp(d / "metrics.txt");
  fs::remove_all(d);
  REQUIRE(cli(args).code == 0);
  CHECK(slurp(d / "history.csv") == hist);
  CHECK(slurp(d / "model.ckpt") == ckpt);
  CHECK(slurp(d / "metrics.txt") == metrics);
}

TEST_CASE("ablate with an edge fraction is deterministic") {
  const auto a = temp_dir("cli_abl_a"), b = temp_dir("cli_abl_b");
  const std::string args = " --data " + small_data().string() + " --edge-fraction K:0.5 --seeds 0 --epochs 2" + kSmall;
  const Run ra = cli("ablate --out " + a.string() + args);
  INFO(ra.err);
  REQUIRE(ra.code == 0);
  REQUIRE(cli("ablate --out " + b.string() + args).code == 0);
  const std::string table = slurp(a / "ablation.tsv");
  CHECK(table == slurp(b / "ablation.tsv"));
  CHECK(table.rfind("variant\tseed\ttest_f1", 0) == 0);
  CHECK(table.find("\nfull\t0\t") != std::string::npos);
  CHECK(table.find("\nK:0.5\t0\t") != std::string::npos);
}

TEST_SUITE_END();
