#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rsad/ablation.hpp"
#include "rsad/config.hpp"
#include "rsad/dataset.hpp"
#include "rsad/errors.hpp"
#include "rsad/eval.hpp"
#include "rsad/io.hpp"
#include "rsad/saliency.hpp"
#include "rsad/synth.hpp"
#include "rsad/train.hpp"
#include "run_dir.hpp"

namespace fs = std::filesystem;
using namespace rsad;

namespace {

struct GlobalOpts {
  std::string workdir = ".";
  std::uint64_t seed = 1;
  bool seed_given = false;
};

std::string error_record(const std::string& kind, const std::string& detail) {
  std::string out = "{\"error\":\"" + kind + "\",\"detail\":\"";
  for (char ch : detail) {
    if (ch == '"' || ch == '\\') out += '\\';
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out += ch;
  }
  out += "\"}";
  return out;
}

TrainConfig load_config(const std::string& path, const GlobalOpts& global) {
  TrainConfig config = parse_train_config(fs::path(path));
  if (global.seed_given) config.seed = global.seed;
  return config;
}

int cmd_prior_build(const GlobalOpts& global, std::vector<std::string> argv,
                    const std::string& images, std::vector<std::string> maps,
                    double threshold, const std::string& out) {
  cli::RunContext run(global.workdir, "prior-build", std::move(argv));
  PriorCacheRequest request;
  request.images_dir = images;
  for (const auto& dir : maps) request.map_dirs.emplace_back(dir);
  request.threshold = threshold;
  request.out_dir = out;
  CacheManifest manifest = build_prior_cache(request);
  std::printf("prior cache: %zu priors, %zu errors -> %s\n",
              manifest.entries.size(), manifest.errors.size(), out.c_str());
  for (const auto& err : manifest.errors)
    std::printf("  skipped %s (%s)\n", err.image_id.c_str(),
                err.reason.c_str());
  run.add_artifact(fs::path(out) / "manifest.ndjson");
  run.finish();
  return 0;
}

int cmd_split_make(const GlobalOpts& global, std::vector<std::string> argv,
                   const std::string& dataset, const std::string& counts,
                   std::uint64_t seed, std::string out) {
  cli::RunContext run(global.workdir, "split-make", std::move(argv));
  run.set_seed(seed);
  std::array<int, 3> parsed{};
  if (std::sscanf(counts.c_str(), "%d,%d,%d", &parsed[0], &parsed[1],
                  &parsed[2]) != 3)
    throw ConfigError("--counts expects base,val,novel");
  DatasetIndex index = scan_dataset(dataset);
  SplitSpec split = make_split(index, parsed, seed);
  if (out.empty()) out = (fs::path(dataset) / "split.ndjson").string();
  save_split(split, out);
  std::printf("split: %d base / %d val / %d novel classes -> %s\n",
              static_cast<int>(split.base_classes.size()),
              static_cast<int>(split.val_classes.size()),
              static_cast<int>(split.novel_classes.size()), out.c_str());
  run.add_artifact(out);
  run.finish();
  return 0;
}

int cmd_synth_make(const GlobalOpts& global, std::vector<std::string> argv,
                   int classes, int per_class, int size, int background_pool,
                   double noise, std::uint64_t seed, const std::string& out) {
  cli::RunContext run(global.workdir, "synth-make", std::move(argv));
  run.set_seed(seed);
  SynthSpec spec;
  spec.n_classes = classes;
  spec.images_per_class = per_class;
  spec.image_size = size;
  spec.background_pool = background_pool;
  spec.noise_stddev = noise;
  spec.seed = seed;
  SynthResult result = generate_synthetic_dataset(spec, out);
  std::printf("synthetic dataset: %d images + masks -> %s\n", result.n_images,
              out.c_str());
  run.add_artifact(result.images_dir);
  run.add_artifact(result.masks_dir);
  run.finish();
  return 0;
}

int cmd_pretrain(const GlobalOpts& global, std::vector<std::string> argv,
                 const std::string& config_path) {
  cli::RunContext run(global.workdir, "pretrain", std::move(argv));
  TrainConfig config = load_config(config_path, global);
  if (config.stage != "pretrain")
    throw ConfigError("pretrain expects a config with stage = pretrain");
  run.set_seed(config.seed);
  run.set_config_snapshot(serialize_config(config));
  run.add_input_hash("config", config_path);
  fs::path ckpt = pretrain(config, run.dir());
  std::printf("pretrained checkpoint -> %s\n", ckpt.generic_string().c_str());
  run.add_artifact(ckpt);
  run.add_artifact(run.dir() / "metrics.ndjson");
  run.finish();
  return 0;
}

int cmd_train(const GlobalOpts& global, std::vector<std::string> argv,
              const std::string& config_path, const std::string& from,
              const std::string& from_prior) {
  cli::RunContext run(global.workdir, "train", std::move(argv));
  TrainConfig config = load_config(config_path, global);
  if (config.stage != "episodic")
    throw ConfigError("train expects a config with stage = episodic");
  run.set_seed(config.seed);
  run.set_config_snapshot(serialize_config(config));
  run.add_input_hash("config", config_path);
  std::optional<fs::path> ckpt_a, ckpt_b;
  if (!from.empty()) {
    ckpt_a = from;
    run.add_input_hash("from", from);
  }
  if (!from_prior.empty()) {
    ckpt_b = from_prior;
    run.add_input_hash("from_prior", from_prior);
  }
  TrainResult result = episodic_train(config, run.dir(), ckpt_a, ckpt_b);
  std::printf("final state  -> %s\n",
              result.final_state.generic_string().c_str());
  std::printf("best state   -> %s\n",
              result.best_state.generic_string().c_str());
  if (result.best_val_acc >= 0.0)
    std::printf("best val acc -> %.2f%%\n", result.best_val_acc);
  run.add_artifact(result.final_state);
  run.add_artifact(result.best_state);
  run.add_artifact(run.dir() / "metrics.ndjson");
  run.finish();
  return 0;
}

int cmd_export(const GlobalOpts& global, std::vector<std::string> argv,
               const std::string& state, const std::string& out) {
  cli::RunContext run(global.workdir, "export", std::move(argv));
  run.add_input_hash("state", state);
  export_main_branch(state, out);
  Branch model = load_model(out);
  std::printf("exported main branch (%.2fM params) -> %s\n",
              report_complexity(model).params_m, out.c_str());
  run.add_artifact(out);
  run.finish();
  return 0;
}

int cmd_eval(const GlobalOpts& global, std::vector<std::string> argv,
             const std::string& model_path, const std::string& data,
             std::string split_file, const std::string& section, int way,
             int shot, int query, long episodes, std::uint64_t seed,
             int threads) {
  cli::RunContext run(global.workdir, "eval", std::move(argv));
  run.set_seed(seed);
  run.add_input_hash("model", model_path);
  configure_threads(threads);

  Branch model = load_model(model_path);
  DatasetIndex dataset = scan_dataset(data);
  if (split_file.empty())
    split_file = (fs::path(data) / "split.ndjson").string();
  SplitSpec split = load_split(split_file);
  run.add_input_hash("split", split_file);

  EvalReport report = evaluate_model(model, dataset, split, section, way,
                                     shot, query, episodes, seed);
  report.model_id = model_path;
  atomic_write_text(run.dir() / "report.ndjson", report_json(report) + "\n");
  std::printf("%s\n", report_table(report).c_str());
  run.add_artifact(run.dir() / "report.ndjson");
  run.finish();
  return 0;
}

int cmd_dbi(const GlobalOpts& global, std::vector<std::string> argv,
            const std::string& model_path, const std::string& data,
            std::string split_file, const std::string& section, int way,
            int shot, int query, long episodes, std::uint64_t seed) {
  cli::RunContext run(global.workdir, "dbi", std::move(argv));
  run.set_seed(seed);
  run.add_input_hash("model", model_path);

  Branch model = load_model(model_path);
  DatasetIndex dataset = scan_dataset(data);
  if (split_file.empty())
    split_file = (fs::path(data) / "split.ndjson").string();
  SplitSpec split = load_split(split_file);

  DbiReport report = dbi_for_model(model, dataset, split, section, way, shot,
                                   query, episodes, seed);
  atomic_write_text(run.dir() / "report.ndjson",
                    dbi_report_json(report) + "\n");
  std::printf(
      "DBI on '%s' over %ld episodes (%zu embeddings, %d clusters): %.4f\n",
      section.c_str(), episodes, report.n_points, report.n_clusters,
      report.value);
  run.add_artifact(run.dir() / "report.ndjson");
  run.finish();
  return 0;
}

int cmd_ablate(const GlobalOpts& global, std::vector<std::string> argv,
               const std::string& spec_path) {
  cli::RunContext run(global.workdir, "ablate", std::move(argv));
  run.add_input_hash("spec", spec_path);
  AblationSpec spec = parse_ablation_spec(spec_path);
  std::vector<AblationResult> results = run_ablation(spec, run.dir());

  std::ofstream reports(run.dir() / "reports.ndjson", std::ios::trunc);
  for (const auto& r : results) reports << report_json(r.report) << '\n';
  reports.flush();
  std::printf("%s", ablation_table(results).c_str());
  run.add_artifact(run.dir() / "reports.ndjson");
  run.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency-aware dual-branch few-shot recognition toolkit"};
  app.require_subcommand(1);

  GlobalOpts global;
  app.add_option("--workdir", global.workdir,
                 "Root for run directories (default: .)");
  auto* seed_opt =
      app.add_option("--seed", global.seed, "Override the config seed");

  std::vector<std::string> argv_copy(argv, argv + argc);
  int exit_code = 0;
  auto guard = [&](auto fn) {
    return [&global, seed_opt, &exit_code, fn]() {
      global.seed_given = seed_opt->count() > 0;
      exit_code = fn();
    };
  };

  // rsad prior build
  auto* prior = app.add_subcommand("prior", "Saliency prior composition");
  prior->require_subcommand(1);
  auto* prior_build =
      prior->add_subcommand("build", "Compose and cache prior images");
  std::string pb_images, pb_out;
  std::vector<std::string> pb_maps;
  double pb_threshold = 0.5;
  prior_build->add_option("--images", pb_images, "Source image tree")
      ->required();
  prior_build
      ->add_option("--maps", pb_maps,
                   "Saliency map directory per detector (comma separated)")
      ->required()
      ->delimiter(',');
  prior_build->add_option("--threshold", pb_threshold,
                          "Binarization threshold in (0,1)");
  prior_build->add_option("--out", pb_out, "Cache directory")->required();
  prior_build->callback(guard([&]() {
    return cmd_prior_build(global, argv_copy, pb_images, pb_maps,
                           pb_threshold, pb_out);
  }));

  // rsad split make
  auto* split = app.add_subcommand("split", "Dataset class splits");
  split->require_subcommand(1);
  auto* split_make = split->add_subcommand("make", "Create a class split");
  std::string sm_dataset, sm_counts, sm_out;
  std::uint64_t sm_seed = 1;
  split_make->add_option("--dataset", sm_dataset, "Dataset root")->required();
  split_make->add_option("--counts", sm_counts, "base,val,novel class counts")
      ->required();
  split_make->add_option("--seed", sm_seed, "Split seed");
  split_make->add_option("--out", sm_out,
                         "Split file (default <dataset>/split.ndjson)");
  split_make->callback(guard([&]() {
    return cmd_split_make(global, argv_copy, sm_dataset, sm_counts, sm_seed,
                          sm_out);
  }));

  // rsad synth make
  auto* synth = app.add_subcommand("synth", "Synthetic datasets");
  synth->require_subcommand(1);
  auto* synth_make = synth->add_subcommand(
      "make", "Generate a background-confounded shape dataset");
  int sy_classes = 10, sy_per = 40, sy_size = 84, sy_pool = 8;
  double sy_noise = 8.0;
  std::uint64_t sy_seed = 7;
  std::string sy_out;
  synth_make->add_option("--classes", sy_classes, "Number of classes");
  synth_make->add_option("--per-class", sy_per, "Images per class");
  synth_make->add_option("--size", sy_size, "Image side in pixels");
  synth_make->add_option("--background-pool", sy_pool,
                         "Shared background texture pool size");
  synth_make->add_option("--noise", sy_noise, "Pixel noise stddev (0..255)");
  synth_make->add_option("--seed", sy_seed, "Generator seed");
  synth_make->add_option("--out", sy_out, "Output directory")->required();
  synth_make->callback(guard([&]() {
    return cmd_synth_make(global, argv_copy, sy_classes, sy_per, sy_size,
                          sy_pool, sy_noise, sy_seed, sy_out);
  }));

  // rsad pretrain
  auto* pre = app.add_subcommand("pretrain", "Whole-classification stage");
  std::string pre_config;
  pre->add_option("--config", pre_config, "Config file")->required();
  pre->callback(
      guard([&]() { return cmd_pretrain(global, argv_copy, pre_config); }));

  // rsad train
  auto* train = app.add_subcommand("train", "Episodic dual-branch stage");
  std::string tr_config, tr_from, tr_from_prior;
  train->add_option("--config", tr_config, "Config file")->required();
  train->add_option("--from", tr_from, "Pretrained raw-branch checkpoint");
  train->add_option("--from-prior", tr_from_prior,
                    "Pretrained prior-branch checkpoint");
  train->callback(guard([&]() {
    return cmd_train(global, argv_copy, tr_config, tr_from, tr_from_prior);
  }));

  // rsad export
  auto* exp = app.add_subcommand("export", "Export the main branch");
  std::string ex_state, ex_out;
  exp->add_option("--state", ex_state, "Training state checkpoint")
      ->required();
  exp->add_option("--out", ex_out, "Output model path")->required();
  exp->callback(
      guard([&]() { return cmd_export(global, argv_copy, ex_state, ex_out); }));

  // rsad eval
  auto* ev = app.add_subcommand("eval", "Episodic accuracy with 95% CI");
  std::string ev_model, ev_data, ev_split_file, ev_section = "novel";
  int ev_way = 5, ev_shot = 1, ev_query = 15, ev_threads = 1;
  long ev_episodes = 600;
  std::uint64_t ev_seed = 3;
  ev->add_option("--model", ev_model, "Model checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset root")->required();
  ev->add_option("--split-file", ev_split_file,
                 "Split file (default <data>/split.ndjson)");
  ev->add_option("--split", ev_section, "Split section: base|val|novel");
  ev->add_option("--way", ev_way, "Classes per episode");
  ev->add_option("--shot", ev_shot, "Support images per class");
  ev->add_option("--query", ev_query, "Query images per class");
  ev->add_option("--episodes", ev_episodes, "Episode count");
  ev->add_option("--seed", ev_seed, "Evaluation seed");
  ev->add_option("--threads", ev_threads, "GEMM threads");
  ev->callback(guard([&]() {
    return cmd_eval(global, argv_copy, ev_model, ev_data, ev_split_file,
                    ev_section, ev_way, ev_shot, ev_query, ev_episodes,
                    ev_seed, ev_threads);
  }));

  // rsad dbi
  auto* db = app.add_subcommand("dbi", "Davies-Bouldin embedding quality");
  std::string db_model, db_data, db_split_file, db_section = "novel";
  int db_way = 5, db_shot = 1, db_query = 15;
  long db_episodes = 600;
  std::uint64_t db_seed = 3;
  db->add_option("--model", db_model, "Model checkpoint")->required();
  db->add_option("--data", db_data, "Dataset root")->required();
  db->add_option("--split-file", db_split_file,
                 "Split file (default <data>/split.ndjson)");
  db->add_option("--split", db_section, "Split section: base|novel");
  db->add_option("--way", db_way, "Classes per episode");
  db->add_option("--shot", db_shot, "Support images per class");
  db->add_option("--query", db_query, "Query images per class");
  db->add_option("--episodes", db_episodes, "Episode count");
  db->add_option("--seed", db_seed, "Sampling seed");
  db->callback(guard([&]() {
    return cmd_dbi(global, argv_copy, db_model, db_data, db_split_file,
                   db_section, db_way, db_shot, db_query, db_episodes,
                   db_seed);
  }));

  // rsad ablate
  auto* ab = app.add_subcommand("ablate", "Train and compare ablation rows");
  std::string ab_spec;
  ab->add_option("--spec", ab_spec, "Ablation spec file")->required();
  ab->callback(
      guard([&]() { return cmd_ablate(global, argv_copy, ab_spec); }));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << error_record("usage", e.what()) << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << error_record("config", e.what()) << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << error_record("input", e.what()) << "\n";
    return 1;
  } catch (const SamplingError& e) {
    std::cerr << error_record("sampling", e.what()) << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << error_record("io", e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << error_record("runtime", e.what()) << "\n";
    return 1;
  }
  return exit_code;
}
