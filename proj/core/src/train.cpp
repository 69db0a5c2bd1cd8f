#include "rsad/train.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rsad/errors.hpp"
#include "rsad/eval.hpp"
#include "rsad/io.hpp"
#include "rsad/losses.hpp"
#include "rsad/nn/linear.hpp"
#include "rsad/nn/pool.hpp"

namespace rsad {

namespace fs = std::filesystem;

void configure_threads(int threads) { Eigen::setNbThreads(threads); }

std::string step_metrics_json(const StepMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\"step\":%ld,\"cls1\":%.6f,\"cls2\":%.6f,\"sag\":%.6f,"
                "\"total\":%.6f,\"lr\":%.8f",
                m.step, m.cls1, m.cls2, m.sag, m.total, m.lr);
  std::string line(buf);
  if (m.val_acc) {
    std::snprintf(buf, sizeof(buf), ",\"val_acc\":%.4f", *m.val_acc);
    line += buf;
  }
  line += "}";
  return line;
}

// ---------------------------------------------------------------- DualTrainer

DualTrainer::DualTrainer(const TrainConfig& config, std::uint64_t seed,
                         const Checkpoint* from_a, const Checkpoint* from_b)
    : config_(config) {
  use_b_ = config.sag == "on";
  train_b_ = config.distill != "udp";
  if (use_b_ && config.priors.empty())
    throw ConfigError("sag=on requires a prior cache ('priors' key)");

  BranchSpec spec{config.backbone, config.image_size,
                  parse_rhs_mode(config.rhs), static_cast<float>(config.tau)};
  Rng base(seed);
  Rng rng_a = base.child(0xb7a9c4a1ULL);
  a_ = build_branch(spec, rng_a);
  if (from_a) unpack_module(*a_.encoder.net, "encoder", *from_a);
  if (use_b_) {
    Rng rng_b = base.child(0xb7a9c4a2ULL);
    b_ = build_branch(spec, rng_b);
    if (from_b) unpack_module(*b_.encoder.net, "encoder", *from_b);
  }

  std::vector<nn::NamedParam<float>> params;
  a_.collect_params("branch_a", params);
  if (trains_branch_b()) b_.collect_params("branch_b", params);
  optimizer_ = make_optimizer<float>(config.optimizer, std::move(params),
                                     config.weight_decay, config.momentum,
                                     config.nesterov);
}

StepMetrics DualTrainer::train_step(const EpisodeBatch& batch) {
  a_.set_training(true);
  if (use_b_) b_.set_training(train_b_);
  optimizer_->zero_grad();

  const std::vector<int>& labels = batch.query_labels;
  StepMetrics m;
  m.lr = config_.lr;

  TensorF logits_a = episode_logits(a_, batch, /*prior=*/false, true);
  TensorF probs_a = softmax_rows(logits_a);
  const double cls1 = cross_entropy(probs_a, std::span<const int>(labels));
  TensorF dlogits_a = cross_entropy_grad(probs_a, std::span<const int>(labels));

  double cls2 = 0.0, sag = 0.0, total = cls1;
  const float alpha = static_cast<float>(config_.alpha);

  if (use_b_) {
    TensorF logits_b = episode_logits(b_, batch, /*prior=*/true, train_b_);
    TensorF probs_b = softmax_rows(logits_b);
    cls2 = cross_entropy(probs_b, std::span<const int>(labels));

    if (config_.distill == "mutual") {
      sag = sag_loss(probs_a, probs_b);
      total = total_loss(cls1, cls2, sag, static_cast<double>(alpha));
      TensorF ga = kl_forward_grad(probs_a, probs_b);
      for (std::int64_t i = 0; i < dlogits_a.size(); ++i)
        dlogits_a[i] += alpha * ga[i];
      TensorF dlogits_b =
          cross_entropy_grad(probs_b, std::span<const int>(labels));
      TensorF gb = kl_forward_grad(probs_b, probs_a);
      for (std::int64_t i = 0; i < dlogits_b.size(); ++i)
        dlogits_b[i] += alpha * gb[i];
      episode_backward(b_, batch, dlogits_b);
    } else if (config_.distill == "ud") {
      sag = kl_div_mean(probs_a, probs_b);
      total = cls1 + cls2 + alpha * sag;
      TensorF ga = kl_forward_grad(probs_a, probs_b);
      for (std::int64_t i = 0; i < dlogits_a.size(); ++i)
        dlogits_a[i] += alpha * ga[i];
      episode_backward(
          b_, batch, cross_entropy_grad(probs_b, std::span<const int>(labels)));
    } else {  // udp: frozen prior branch
      sag = kl_div_mean(probs_a, probs_b);
      total = ud_kd_loss<float>(static_cast<float>(cls1), probs_a, probs_b,
                                alpha);
      TensorF ga = kl_forward_grad(probs_a, probs_b);
      for (std::int64_t i = 0; i < dlogits_a.size(); ++i)
        dlogits_a[i] += alpha * ga[i];
    }
  }

  if (!std::isfinite(cls1) || !std::isfinite(cls2) || !std::isfinite(sag) ||
      !std::isfinite(total)) {
    std::ostringstream os;
    os << "non-finite loss at step " << (step_ + 1) << " on episode "
       << batch.tag << ": cls1=" << cls1 << " cls2=" << cls2 << " sag=" << sag
       << " total=" << total;
    throw Error(os.str());
  }

  episode_backward(a_, batch, dlogits_a);
  optimizer_->step(config_.lr);
  ++step_;

  m.step = step_;
  m.cls1 = cls1;
  m.cls2 = cls2;
  m.sag = sag;
  m.total = total;
  return m;
}

Checkpoint DualTrainer::state_checkpoint(const std::string& rng_episode_state,
                                         const std::string& rng_augment_state,
                                         double best_val) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "train_state";
  ckpt.meta["step"] = std::to_string(step_);
  ckpt.meta["best_val"] = format_exact(best_val);
  ckpt.meta["config"] = serialize_config(config_);
  ckpt.meta["rng_episode"] = rng_episode_state;
  ckpt.meta["rng_augment"] = rng_augment_state;
  write_branch_meta(a_.spec, "branch_a", ckpt);
  pack_branch(a_, "branch_a", ckpt);
  if (use_b_) {
    write_branch_meta(b_.spec, "branch_b", ckpt);
    pack_branch(b_, "branch_b", ckpt);
  }
  std::vector<nn::NamedBuffer<float>> state;
  optimizer_->collect_state(state);
  for (auto& nb : state) ckpt.arrays["optim." + nb.name] = *nb.tensor;
  return ckpt;
}

void DualTrainer::restore(const Checkpoint& ckpt) {
  unpack_branch(a_, "branch_a", ckpt);
  if (use_b_) unpack_branch(b_, "branch_b", ckpt);
  std::vector<nn::NamedBuffer<float>> state;
  optimizer_->collect_state(state);
  for (auto& nb : state) {
    auto it = ckpt.arrays.find("optim." + nb.name);
    if (it == ckpt.arrays.end())
      throw IoError("checkpoint missing optimizer state: " + nb.name);
    *nb.tensor = it->second;
  }
  step_ = std::stol(ckpt.meta.at("step"));
}

// ------------------------------------------------------------------ pretrain

namespace {

struct LabeledInstance {
  std::string path;
  int label;
};

TensorF load_classification_batch(const DatasetIndex& dataset,
                                  const PriorCache* priors, bool prior_input,
                                  const std::vector<LabeledInstance>& items,
                                  std::span<const std::size_t> idx,
                                  const AugmentPolicy& policy,
                                  const NormStats& norm, Rng& rng,
                                  std::vector<int>& labels_out) {
  const int out = policy.out_size;
  TensorF batch({static_cast<std::int64_t>(idx.size()), 3, out, out});
  labels_out.clear();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& item = items[idx[i]];
    Image img = prior_input ? priors->load(instance_id(item.path))
                            : read_image(dataset.root / item.path);
    AugmentDraw draw = draw_augment(policy, img.height, img.width, rng);
    TensorF chw = tensorize(apply_draw(img, draw, out), norm);
    std::copy(chw.data(), chw.data() + chw.size(),
              batch.data() + static_cast<std::int64_t>(i) * chw.size());
    labels_out.push_back(item.label);
  }
  return batch;
}

}  // namespace

fs::path pretrain(const TrainConfig& config, const fs::path& run_dir) {
  if (config.stage != "pretrain")
    throw ConfigError("pretrain called with stage=" + config.stage);
  configure_threads(config.threads);

  DatasetIndex dataset = scan_dataset(config.data);
  SplitSpec split = load_split(config.split_file);
  SectionIndex base = section_index(dataset, split.base_classes);
  const int n_classes = base.n_classes();
  if (n_classes < 2) throw ConfigError("pretrain needs >= 2 base classes");

  const bool prior_input = config.pretrain_input == "prior";
  PriorCache priors;
  if (prior_input) {
    if (config.priors.empty())
      throw ConfigError("pretrain_input=prior requires 'priors'");
    priors = PriorCache(config.priors);
  }

  // Hold out every tenth instance per class for validation.
  std::vector<LabeledInstance> train_items, val_items;
  for (int c = 0; c < n_classes; ++c) {
    const auto& pool = base.instances[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (i % 10 == 9)
        val_items.push_back({pool[i], c});
      else
        train_items.push_back({pool[i], c});
    }
  }
  if (train_items.empty()) throw ConfigError("pretrain has no training images");

  Rng base_rng(config.seed);
  Rng init_rng = base_rng.child(0x1117ULL);
  Encoder<float> encoder =
      build_backbone<float>({config.backbone, config.image_size}, init_rng);
  nn::GlobalAvgPool<float> gap;
  nn::Linear<float> fc(encoder.out_channels, n_classes, init_rng);

  std::vector<nn::NamedParam<float>> params;
  encoder.net->collect_params("encoder", params);
  fc.collect_params("fc", params);
  auto optimizer =
      make_optimizer<float>(config.optimizer, std::move(params),
                            config.weight_decay, config.momentum,
                            config.nesterov);

  AugmentPolicy train_policy = config.augment == "standard"
                                   ? standard_augment(config.image_size)
                                   : eval_transform(config.image_size);
  AugmentPolicy val_policy = eval_transform(config.image_size);

  fs::create_directories(run_dir);
  std::ofstream metrics(run_dir / "metrics.ndjson", std::ios::trunc);

  auto eval_accuracy = [&](const std::vector<LabeledInstance>& items,
                           Rng& rng) {
    if (items.empty()) return -1.0;
    encoder.net->set_training(false);
    std::size_t correct = 0;
    std::vector<int> labels;
    for (std::size_t at = 0; at < items.size();
         at += static_cast<std::size_t>(config.batch_size)) {
      std::vector<std::size_t> idx;
      for (std::size_t i = at;
           i < std::min(items.size(),
                        at + static_cast<std::size_t>(config.batch_size));
           ++i)
        idx.push_back(i);
      TensorF x = load_classification_batch(dataset, &priors, prior_input,
                                            items, idx, val_policy,
                                            split.norm, rng, labels);
      TensorF logits = fc.forward(gap.forward(encoder.encode(x)));
      for (std::int64_t r = 0; r < logits.dim(0); ++r) {
        int best = 0;
        for (int c = 1; c < n_classes; ++c)
          if (logits.at(r, c) > logits.at(r, best)) best = c;
        if (best == labels[static_cast<std::size_t>(r)]) ++correct;
      }
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
  };

  double best_val = -1.0;
  Checkpoint best_ckpt;
  auto snapshot = [&]() {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "pretrain";
    ckpt.meta["backbone"] = config.backbone;
    ckpt.meta["image_size"] = std::to_string(config.image_size);
    ckpt.meta["n_classes"] = std::to_string(n_classes);
    ckpt.meta["pretrain_input"] = config.pretrain_input;
    pack_module(*encoder.net, "encoder", ckpt);
    pack_module(fc, "fc", ckpt);
    return ckpt;
  };

  std::vector<std::size_t> order(train_items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = milestone_lr(config.lr, config.milestones, config.gamma,
                                   epoch);
    Rng epoch_rng = base_rng.child(0xE0000ULL + epoch);
    epoch_rng.shuffle(std::span<std::size_t>(order));

    encoder.net->set_training(true);
    double loss_sum = 0.0;
    long n_batches = 0;
    std::vector<int> labels;
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(config.batch_size)) {
      std::span<const std::size_t> idx(
          order.data() + at,
          std::min(static_cast<std::size_t>(config.batch_size),
                   order.size() - at));
      optimizer->zero_grad();
      TensorF x = load_classification_batch(dataset, &priors, prior_input,
                                            train_items, idx, train_policy,
                                            split.norm, epoch_rng, labels);
      TensorF logits = fc.forward(gap.forward(encoder.encode(x)));
      TensorF probs = softmax_rows(logits);
      double loss = cross_entropy(probs, std::span<const int>(labels));
      if (!std::isfinite(loss))
        throw Error("non-finite pretrain loss at epoch " +
                    std::to_string(epoch));
      TensorF dlogits =
          cross_entropy_grad(probs, std::span<const int>(labels));
      encoder.backward(gap.backward(fc.backward(dlogits)));
      optimizer->step(lr);
      loss_sum += loss;
      ++n_batches;
    }

    Rng val_rng = base_rng.child(0xF0000ULL + epoch);
    double val_acc = eval_accuracy(val_items, val_rng);
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "{\"epoch\":%d,\"loss\":%.6f,\"lr\":%.8f,\"val_acc\":%.4f}",
                  epoch, loss_sum / std::max(1L, n_batches), lr, val_acc);
    metrics << buf << '\n';
    metrics.flush();

    if (val_acc >= best_val) {
      best_val = val_acc;
      best_ckpt = snapshot();
    }
  }
  if (best_val < 0.0) best_ckpt = snapshot();

  fs::path out = run_dir / ("pretrain_" + config.pretrain_input + ".ckpt");
  save_checkpoint(best_ckpt, out);
  return out;
}

// ------------------------------------------------------------ episodic_train

TrainResult episodic_train(const TrainConfig& config, const fs::path& run_dir,
                           const std::optional<fs::path>& from_a,
                           const std::optional<fs::path>& from_b) {
  if (config.stage != "episodic")
    throw ConfigError("episodic_train called with stage=" + config.stage);
  configure_threads(config.threads);

  DatasetIndex dataset = scan_dataset(config.data);
  SplitSpec split = load_split(config.split_file);
  SectionIndex base = section_index(dataset, split.base_classes);

  const bool with_prior = config.sag == "on";
  PriorCache priors;
  if (with_prior) {
    if (config.priors.empty())
      throw ConfigError("sag=on requires a prior cache ('priors' key)");
    priors = PriorCache(config.priors);
  }

  AugmentPolicy policy = config.augment == "standard"
                             ? standard_augment(config.image_size)
                             : eval_transform(config.image_size);
  EpisodeLoader loader(&dataset, split.norm, policy,
                       with_prior ? &priors : nullptr);

  std::optional<Checkpoint> ckpt_a, ckpt_b;
  if (from_a) ckpt_a = load_checkpoint(*from_a);
  if (from_b) ckpt_b = load_checkpoint(*from_b);
  DualTrainer trainer(config, config.seed, ckpt_a ? &*ckpt_a : nullptr,
                      ckpt_b ? &*ckpt_b : nullptr);

  Rng rng_episode = Rng(config.seed).child(0x45504953ULL);  // episodes
  Rng rng_augment = Rng(config.seed).child(0x41554731ULL);  // augmentation

  fs::create_directories(run_dir);
  std::ofstream metrics(run_dir / "metrics.ndjson", std::ios::trunc);

  TrainResult result;
  result.final_state = run_dir / "state_final.ckpt";
  result.best_state = run_dir / "state_best.ckpt";
  const bool can_validate = !split.val_classes.empty() &&
                            config.val_every > 0 && config.val_episodes > 0;
  double best_val = -1.0;
  bool have_best = false;

  for (long step = 1; step <= config.episodes; ++step) {
    Episode episode = sample_episode(base, config.way, config.shot,
                                     config.query, rng_episode);
    EpisodeBatch batch = loader.load(episode, rng_augment, with_prior);
    StepMetrics m = trainer.train_step(batch);

    if (can_validate && step % config.val_every == 0) {
      EvalReport report = evaluate_model(
          trainer.branch_a(), dataset, split, "val", config.eval_way,
          config.eval_shot, config.eval_query, config.val_episodes,
          splitmix64(config.seed ^ 0x76a7ULL));
      m.val_acc = report.mean_acc_pct;
      if (report.mean_acc_pct > best_val) {
        best_val = report.mean_acc_pct;
        save_checkpoint(trainer.state_checkpoint(rng_episode.save_state(),
                                                 rng_augment.save_state(),
                                                 best_val),
                        result.best_state);
        have_best = true;
      }
    }

    if (step % config.metrics_every == 0 || m.val_acc)
      metrics << step_metrics_json(m) << '\n';
  }
  metrics.flush();

  save_checkpoint(trainer.state_checkpoint(rng_episode.save_state(),
                                           rng_augment.save_state(), best_val),
                  result.final_state);
  if (!have_best) result.best_state = result.final_state;
  result.best_val_acc = best_val;
  return result;
}

void export_main_branch(const fs::path& state_path, const fs::path& out_path) {
  Checkpoint state = load_checkpoint(state_path);
  auto kind = state.meta.find("kind");
  if (kind == state.meta.end() || kind->second != "train_state")
    throw IoError("export expects a train_state checkpoint");

  BranchSpec spec = read_branch_meta(state, "branch_a");
  Rng rng(0);
  Branch branch = build_branch(spec, rng);
  unpack_branch(branch, "branch_a", state);

  Checkpoint out;
  out.meta["kind"] = "main_branch";
  write_branch_meta(spec, "", out);
  pack_branch(branch, "", out);
  save_checkpoint(out, out_path);
}

}  // namespace rsad
