#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rsad/dataset.hpp"
#include "rsad/model.hpp"

namespace rsad {

struct EvalReport {
  std::string dataset;
  std::string section;
  std::string model_id;
  int way = 0;
  int shot = 0;
  int query = 0;
  long episodes = 0;
  std::uint64_t seed = 0;
  double mean_acc_pct = 0.0;  // 0..100
  double ci95_pct = 0.0;      // half-width, 1.96 * sample std / sqrt(n)
};

/// Fraction of query rows whose argmax matches the label.
double episode_accuracy(const TensorF& logits, std::span<const int> labels);

/// Mean and 95% CI over per-episode accuracies (fractions in [0,1]).
EvalReport accuracy_report(const std::vector<double>& accuracies);

/// Episodic accuracy of the main branch over `episodes` sampled tasks;
/// deterministic in the seed and mutation-free (eval mode throughout).
EvalReport evaluate_model(Branch& model, const DatasetIndex& dataset,
                          const SplitSpec& split, const std::string& section,
                          int way, int shot, int query, long episodes,
                          std::uint64_t seed);

/// Byte-stable single-line record for the report stream.
std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

/// Davies-Bouldin index: mean over clusters of the worst
/// (sigma_i + sigma_j) / d(centroid_i, centroid_j) ratio, Euclidean
/// distances, sigma = mean point-to-centroid distance.
double dbi(const std::vector<std::vector<double>>& embeddings,
           const std::vector<int>& labels);

struct DbiReport {
  std::string dataset;
  std::string section;
  long episodes = 0;
  std::uint64_t seed = 0;
  std::size_t n_points = 0;
  int n_clusters = 0;
  double value = 0.0;
};

/// Pools summarized query embeddings from the main branch over sampled
/// episodes and scores their clustering by global class id.
DbiReport dbi_for_model(Branch& model, const DatasetIndex& dataset,
                        const SplitSpec& split, const std::string& section,
                        int way, int shot, int query, long episodes,
                        std::uint64_t seed);

std::string dbi_report_json(const DbiReport& report);

struct ComplexityReport {
  double params_m = 0.0;  // millions, reported to 2 decimals
};

ComplexityReport report_complexity(Branch& model);

}  // namespace rsad
