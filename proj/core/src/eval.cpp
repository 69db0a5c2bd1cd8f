#include "rsad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "rsad/errors.hpp"
#include "rsad/loader.hpp"
#include "rsad/losses.hpp"
#include "rsad/rhs.hpp"

namespace rsad {

double episode_accuracy(const TensorF& logits, std::span<const int> labels) {
  if (logits.dim(0) != static_cast<std::int64_t>(labels.size()))
    throw InputError("episode_accuracy: label count mismatch");
  long correct = 0;
  for (std::int64_t r = 0; r < logits.dim(0); ++r) {
    int best = 0;
    for (int c = 1; c < logits.dim(1); ++c)
      if (logits.at(r, c) > logits.at(r, best)) best = c;
    if (best == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.dim(0));
}

EvalReport accuracy_report(const std::vector<double>& accuracies) {
  if (accuracies.empty())
    throw InputError("accuracy_report: episode count must be > 0");
  double mean = 0.0;
  for (double a : accuracies) mean += a;
  mean /= static_cast<double>(accuracies.size());
  double var = 0.0;
  for (double a : accuracies) var += (a - mean) * (a - mean);
  double sd =
      accuracies.size() > 1
          ? std::sqrt(var / static_cast<double>(accuracies.size() - 1))
          : 0.0;

  EvalReport report;
  report.episodes = static_cast<long>(accuracies.size());
  report.mean_acc_pct = 100.0 * mean;
  report.ci95_pct =
      100.0 * 1.96 * sd / std::sqrt(static_cast<double>(accuracies.size()));
  return report;
}

EvalReport evaluate_model(Branch& model, const DatasetIndex& dataset,
                          const SplitSpec& split, const std::string& section,
                          int way, int shot, int query, long episodes,
                          std::uint64_t seed) {
  if (episodes < 1) throw InputError("evaluate: episode count must be > 0");
  model.set_training(false);
  SectionIndex sec = section_index(dataset, split_section(split, section));
  EpisodeLoader loader(&dataset, split.norm,
                       eval_transform(model.spec.image_size), nullptr);
  Rng rng = Rng(seed).child(0x4556414cULL);

  std::vector<double> accs;
  accs.reserve(static_cast<std::size_t>(episodes));
  for (long e = 0; e < episodes; ++e) {
    Episode episode = sample_episode(sec, way, shot, query, rng);
    EpisodeBatch batch = loader.load(episode, rng, false);
    TensorF logits = episode_logits(model, batch, false, /*keep_caches=*/false);
    accs.push_back(
        episode_accuracy(logits, std::span<const int>(batch.query_labels)));
  }

  EvalReport report = accuracy_report(accs);
  report.dataset = dataset.root.generic_string();
  report.section = section;
  report.way = way;
  report.shot = shot;
  report.query = query;
  report.seed = seed;
  return report;
}

std::string report_json(const EvalReport& report) {
  char buf[512];
  std::snprintf(
      buf, sizeof(buf),
      "{\"record\":\"eval\",\"dataset\":\"%s\",\"split\":\"%s\","
      "\"model\":\"%s\",\"way\":%d,\"shot\":%d,\"query\":%d,"
      "\"episodes\":%ld,\"seed\":%llu,\"mean_acc\":%.4f,\"ci95\":%.4f}",
      report.dataset.c_str(), report.section.c_str(), report.model_id.c_str(),
      report.way, report.shot, report.query, report.episodes,
      static_cast<unsigned long long>(report.seed), report.mean_acc_pct,
      report.ci95_pct);
  return std::string(buf);
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  os << report.way << "-way " << report.shot << "-shot on '" << report.section
     << "' (" << report.episodes << " episodes, seed " << report.seed
     << "):\n";
  char buf[96];
  std::snprintf(buf, sizeof(buf), "  accuracy %.2f +- %.2f %%",
                report.mean_acc_pct, report.ci95_pct);
  os << buf;
  return os.str();
}

double dbi(const std::vector<std::vector<double>>& embeddings,
           const std::vector<int>& labels) {
  if (embeddings.size() != labels.size())
    throw InputError("dbi: embeddings/labels size mismatch");
  if (embeddings.empty()) throw InputError("dbi: empty input");

  std::map<int, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < labels.size(); ++i)
    clusters[labels[i]].push_back(i);
  const int n = static_cast<int>(clusters.size());
  if (n < 2) throw InputError("dbi: needs at least 2 clusters");

  const std::size_t dim = embeddings.front().size();
  std::vector<std::vector<double>> centroids;
  std::vector<double> scatter;
  for (const auto& [label, members] : clusters) {
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i : members) {
      if (embeddings[i].size() != dim)
        throw InputError("dbi: inconsistent embedding dimensions");
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += embeddings[i][d];
    }
    for (double& v : centroid) v /= static_cast<double>(members.size());
    double mean_dist = 0.0;
    for (std::size_t i : members) {
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        double diff = embeddings[i][d] - centroid[d];
        sq += diff * diff;
      }
      mean_dist += std::sqrt(sq);
    }
    mean_dist /= static_cast<double>(members.size());
    centroids.push_back(std::move(centroid));
    scatter.push_back(mean_dist);
  }

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        double diff = centroids[static_cast<std::size_t>(i)][d] -
                      centroids[static_cast<std::size_t>(j)][d];
        sq += diff * diff;
      }
      double dist = std::sqrt(sq);
      if (dist <= 0.0) throw Error("dbi: degenerate centroids");
      worst = std::max(worst, (scatter[static_cast<std::size_t>(i)] +
                               scatter[static_cast<std::size_t>(j)]) /
                                  dist);
    }
    total += worst;
  }
  return total / static_cast<double>(n);
}

DbiReport dbi_for_model(Branch& model, const DatasetIndex& dataset,
                        const SplitSpec& split, const std::string& section,
                        int way, int shot, int query, long episodes,
                        std::uint64_t seed) {
  model.set_training(false);
  SectionIndex sec = section_index(dataset, split_section(split, section));
  EpisodeLoader loader(&dataset, split.norm,
                       eval_transform(model.spec.image_size), nullptr);
  Rng rng = Rng(seed).child(0x44424921ULL);

  std::map<std::string, int> class_ids;
  for (std::size_t c = 0; c < dataset.class_names.size(); ++c)
    class_ids[dataset.class_names[c]] = static_cast<int>(c);

  std::vector<std::vector<double>> embeddings;
  std::vector<int> labels;
  for (long e = 0; e < episodes; ++e) {
    Episode episode = sample_episode(sec, way, shot, query, rng);
    EpisodeBatch batch = loader.load(episode, rng, false);
    TensorF feats = model.encoder.encode(batch.query_raw);
    const std::int64_t c = feats.dim(1), s = feats.dim(2) * feats.dim(3);
    for (std::int64_t i = 0; i < feats.dim(0); ++i) {
      TensorF fmap({c, s});
      std::copy(feats.data() + i * c * s, feats.data() + (i + 1) * c * s,
                fmap.data());
      std::vector<float> emb = summarize(fmap);
      embeddings.emplace_back(emb.begin(), emb.end());
      labels.push_back(
          class_ids.at(episode.class_map[static_cast<std::size_t>(
              batch.query_labels[static_cast<std::size_t>(i)])]));
    }
  }

  DbiReport report;
  report.dataset = dataset.root.generic_string();
  report.section = section;
  report.episodes = episodes;
  report.seed = seed;
  report.n_points = embeddings.size();
  report.n_clusters = static_cast<int>(
      std::set<int>(labels.begin(), labels.end()).size());
  report.value = dbi(embeddings, labels);
  return report;
}

std::string dbi_report_json(const DbiReport& report) {
  char buf[384];
  std::snprintf(buf, sizeof(buf),
                "{\"record\":\"dbi\",\"dataset\":\"%s\",\"split\":\"%s\","
                "\"episodes\":%ld,\"seed\":%llu,\"points\":%zu,"
                "\"clusters\":%d,\"dbi\":%.6f}",
                report.dataset.c_str(), report.section.c_str(),
                report.episodes,
                static_cast<unsigned long long>(report.seed), report.n_points,
                report.n_clusters, report.value);
  return std::string(buf);
}

ComplexityReport report_complexity(Branch& model) {
  ComplexityReport report;
  report.params_m =
      std::round(static_cast<double>(model.parameter_count()) / 1e6 * 100.0) /
      100.0;
  return report;
}

}  // namespace rsad
