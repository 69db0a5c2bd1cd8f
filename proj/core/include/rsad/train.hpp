#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rsad/config.hpp"
#include "rsad/loader.hpp"
#include "rsad/optim.hpp"

namespace rsad {

struct StepMetrics {
  long step = 0;
  double cls1 = 0.0;
  double cls2 = 0.0;
  double sag = 0.0;
  double total = 0.0;
  double lr = 0.0;
  std::optional<double> val_acc;
};

/// Dual-branch trainer: branch A consumes raw images, branch B priors; one
/// optimizer spans every trainable parameter and each train_step performs
/// exactly one update from one episode. In each KL direction the peer's
/// distribution is a fixed target.
class DualTrainer {
 public:
  DualTrainer(const TrainConfig& config, std::uint64_t seed,
              const Checkpoint* from_a = nullptr,
              const Checkpoint* from_b = nullptr);

  bool uses_branch_b() const { return use_b_; }
  bool trains_branch_b() const { return use_b_ && train_b_; }

  StepMetrics train_step(const EpisodeBatch& batch);

  Branch& branch_a() { return a_; }
  Branch& branch_b() { return b_; }
  long step_count() const { return step_; }

  Checkpoint state_checkpoint(const std::string& rng_episode_state,
                              const std::string& rng_augment_state,
                              double best_val);
  void restore(const Checkpoint& ckpt);

 private:
  TrainConfig config_;
  Branch a_, b_;
  bool use_b_ = false;
  bool train_b_ = true;
  std::unique_ptr<Optimizer<float>> optimizer_;
  long step_ = 0;
};

struct TrainResult {
  std::filesystem::path final_state;
  std::filesystem::path best_state;
  double best_val_acc = -1.0;
};

/// Whole-classification pre-training on the base split; returns the path of
/// the best-validation checkpoint.
std::filesystem::path pretrain(const TrainConfig& config,
                               const std::filesystem::path& run_dir);

TrainResult episodic_train(
    const TrainConfig& config, const std::filesystem::path& run_dir,
    const std::optional<std::filesystem::path>& from_a = std::nullopt,
    const std::optional<std::filesystem::path>& from_b = std::nullopt);

/// Serializes branch A (encoder + RHS) only; the prior branch is dropped.
void export_main_branch(const std::filesystem::path& state_path,
                        const std::filesystem::path& out_path);

void configure_threads(int threads);

std::string step_metrics_json(const StepMetrics& m);

}  // namespace rsad
