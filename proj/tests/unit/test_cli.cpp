#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "rsad/io.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code;
  std::string out;
  std::string err;
};

CmdResult run_cli(const fs::path& tmp, const std::string& args) {
  fs::path out = tmp / "stdout.txt", err = tmp / "stderr.txt";
  std::string cmd = std::string(RSAD_CLI_PATH) + " " + args + " > " +
                    out.string() + " 2> " + err.string();
  int status = std::system(cmd.c_str());
  CmdResult result;
  result.exit_code = WEXITSTATUS(status);
  result.out = fs::exists(out) ? rsad::read_text(out) : "";
  result.err = fs::exists(err) ? rsad::read_text(err) : "";
  return result;
}

fs::path latest_run(const fs::path& workdir, const std::string& command) {
  fs::path newest;
  for (const auto& entry : fs::directory_iterator(workdir / "runs")) {
    const std::string name = entry.path().filename().string();
    if (name.find("-" + command) != std::string::npos &&
        (newest.empty() || entry.path() > newest))
      newest = entry.path();
  }
  REQUIRE(!newest.empty());
  return newest;
}

/// One shared end-to-end pipeline; individual cases assert on its artifacts.
struct Pipeline {
  testutil::TempDir tmp{"cli"};
  fs::path ds, cache, wd, cfg, model;

  Pipeline() {
    ds = tmp.path() / "ds";
    cache = tmp.path() / "cache";
    wd = tmp.path() / "wd";
    fs::create_directories(wd);

    REQUIRE(run_cli(tmp.path(),
                    "synth make --classes 6 --per-class 10 --size 32 --seed 3 "
                    "--out " + ds.string())
                .exit_code == 0);
    REQUIRE(run_cli(tmp.path(), "prior build --images " +
                                    (ds / "images").string() + " --maps " +
                                    (ds / "masks").string() +
                                    " --threshold 0.5 --out " + cache.string())
                .exit_code == 0);
    REQUIRE(run_cli(tmp.path(), "split make --dataset " +
                                    (ds / "images").string() +
                                    " --counts 3,1,2 --seed 1")
                .exit_code == 0);

    cfg = tmp.path() / "train.cfg";
    rsad::atomic_write_text(
        cfg, "stage = episodic\n"
             "backbone = conv4\n"
             "data = " + (ds / "images").string() + "\n"
             "priors = " + cache.string() + "\n"
             "image_size = 32\n"
             "episodes = 6\n"
             "way = 2\nshot = 1\nquery = 2\n"
             "eval_way = 2\neval_shot = 1\neval_query = 2\n"
             "val_every = 0\n"
             "alpha = 1.0\naugment = none\nseed = 11\n");

    REQUIRE(run_cli(tmp.path(), "--workdir " + wd.string() +
                                    " train --config " + cfg.string())
                .exit_code == 0);
    fs::path state = latest_run(wd, "train") / "state_final.ckpt";
    REQUIRE(fs::exists(state));

    model = tmp.path() / "main.ckpt";
    REQUIRE(run_cli(tmp.path(), "--workdir " + wd.string() + " export --state " +
                                    state.string() + " --out " +
                                    model.string())
                .exit_code == 0);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("help exits 0 and shows the nine subcommands") {
  testutil::TempDir tmp("help");
  CmdResult result = run_cli(tmp.path(), "--help");
  CHECK(result.exit_code == 0);
  for (const char* name :
       {"prior", "split", "synth", "pretrain", "train", "export", "eval",
        "dbi", "ablate"})
    CHECK(result.out.find(name) != std::string::npos);
}

TEST_CASE("unknown flags and subcommands exit 2 naming the offender") {
  testutil::TempDir tmp("badflag");
  CmdResult bad_flag = run_cli(tmp.path(), "eval --bogus-flag 1");
  CHECK(bad_flag.exit_code == 2);
  CHECK(bad_flag.err.find("--bogus-flag") != std::string::npos);

  CmdResult bad_cmd = run_cli(tmp.path(), "frobnicate");
  CHECK(bad_cmd.exit_code == 2);
  CHECK(bad_cmd.err.find("frobnicate") != std::string::npos);
}

TEST_CASE("runtime failures emit a machine-readable error record") {
  testutil::TempDir tmp("errrec");
  CmdResult result = run_cli(
      tmp.path(), "eval --model /nonexistent.ckpt --data /nonexistent");
  CHECK(result.exit_code == 1);
  CHECK(result.err.find("{\"error\":") != std::string::npos);
}

TEST_CASE("pipeline: train run directory carries manifest and metrics") {
  Pipeline& p = pipeline();
  fs::path run = latest_run(p.wd, "train");
  CHECK(fs::exists(run / "manifest.json"));
  CHECK(fs::exists(run / "metrics.ndjson"));
  std::string manifest = rsad::read_text(run / "manifest.json");
  CHECK(manifest.find("\"command\": \"train\"") != std::string::npos);
  CHECK(manifest.find("stage = episodic") != std::string::npos);
}

TEST_CASE("pipeline: exported model excludes the prior branch") {
  Pipeline& p = pipeline();
  CHECK(fs::exists(p.model));
  std::string bytes = rsad::read_text(p.model);
  CHECK(bytes.find("branch_b") == std::string::npos);
}

TEST_CASE("pipeline: eval reports are byte-identical across reruns") {
  Pipeline& p = pipeline();
  std::string eval_args = "--workdir " + p.wd.string() + " eval --model " +
                          p.model.string() + " --data " +
                          (p.ds / "images").string() +
                          " --split novel --way 2 --shot 1 --query 2 "
                          "--episodes 5 --seed 3";
  CmdResult r1 = run_cli(p.tmp.path(), eval_args);
  REQUIRE(r1.exit_code == 0);
  fs::path report1 = latest_run(p.wd, "eval") / "report.ndjson";
  std::string body1 = rsad::read_text(report1);

  CmdResult r2 = run_cli(p.tmp.path(), eval_args);
  REQUIRE(r2.exit_code == 0);
  fs::path report2 = latest_run(p.wd, "eval") / "report.ndjson";
  CHECK(report2 != report1);  // distinct run directories
  CHECK(rsad::read_text(report2) == body1);
  CHECK(body1.find("\"record\":\"eval\"") != std::string::npos);
  CHECK(r1.out.find("accuracy") != std::string::npos);
}

TEST_CASE("pipeline: dbi runs on the exported model") {
  Pipeline& p = pipeline();
  CmdResult result = run_cli(
      p.tmp.path(), "--workdir " + p.wd.string() + " dbi --model " +
                        p.model.string() + " --data " +
                        (p.ds / "images").string() +
                        " --split novel --way 2 --shot 1 --query 2 "
                        "--episodes 3 --seed 5");
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("DBI") != std::string::npos);
  fs::path report = latest_run(p.wd, "dbi") / "report.ndjson";
  CHECK(rsad::read_text(report).find("\"record\":\"dbi\"") !=
        std::string::npos);
}

TEST_CASE("pipeline: ablate trains each variant and emits a table") {
  Pipeline& p = pipeline();
  fs::path spec = p.tmp.path() / "ablate.cfg";
  rsad::atomic_write_text(
      spec, "stage = episodic\n"
            "backbone = conv4\n"
            "data = " + (p.ds / "images").string() + "\n"
            "priors = " + p.cache.string() + "\n"
            "image_size = 32\n"
            "episodes = 4\n"
            "way = 2\nshot = 1\nquery = 2\n"
            "eval_way = 2\neval_shot = 1\neval_query = 2\n"
            "val_every = 0\nval_episodes = 4\n"
            "augment = none\nseed = 11\n"
            "variant = baseline sag=off rhs=none\n"
            "variant = full sag=on rhs=rhs alpha=1.0\n");
  CmdResult result = run_cli(
      p.tmp.path(),
      "--workdir " + p.wd.string() + " ablate --spec " + spec.string());
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("baseline") != std::string::npos);
  CHECK(result.out.find("full") != std::string::npos);
  fs::path reports = latest_run(p.wd, "ablate") / "reports.ndjson";
  CHECK(rsad::read_lines(reports).size() == 2);
}

TEST_CASE("pretrain command runs the whole-classification stage") {
  Pipeline& p = pipeline();
  fs::path cfg = p.tmp.path() / "pre.cfg";
  rsad::atomic_write_text(cfg, "stage = pretrain\n"
                               "backbone = conv4\n"
                               "data = " + (p.ds / "images").string() + "\n"
                               "image_size = 32\n"
                               "epochs = 1\nbatch_size = 16\n"
                               "augment = none\nseed = 2\n");
  CmdResult result = run_cli(p.tmp.path(), "--workdir " + p.wd.string() +
                                               " pretrain --config " +
                                               cfg.string());
  CHECK(result.exit_code == 0);
  fs::path run = latest_run(p.wd, "pretrain");
  CHECK(fs::exists(run / "pretrain_raw.ckpt"));
  CHECK(fs::exists(run / "metrics.ndjson"));
}
