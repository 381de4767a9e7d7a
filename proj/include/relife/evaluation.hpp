#pragma once

// Dataset-level evaluation and the embedding-similarity export.

#include "relife/metrics.hpp"
#include "relife/model.hpp"

#include <json.hpp>

#include <array>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace relife {

/// Mean metric values over an evaluation set, keyed like "MAP@5".
struct MetricsReport {
  Protocol protocol = Protocol::log_replay;
  std::size_t samples = 0;
  std::map<std::string, double> values;

  [[nodiscard]] double get(const std::string& metric, std::size_t K) const {
    const auto it = values.find(metric + "@" + std::to_string(K));
    if (it == values.end()) throw std::out_of_range("metric " + metric + "@" + std::to_string(K) + " not in report");
    return it->second;
  }

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Averages the metrics of externally produced scores (one score vector per sample).
/// MAP and NDCG always use the logged labels; Click@K follows the protocol.
inline MetricsReport evaluate_scores(const std::vector<Sample>& samples, const std::vector<std::vector<double>>& scores,
                                     Protocol protocol, const std::vector<std::size_t>& Ks = {5, 10},
                                     const clicksim::SynthSidecar* sidecar = nullptr) {
  if (samples.size() != scores.size()) throw std::invalid_argument("evaluate: one score vector per sample required");
  if (protocol == Protocol::dcm && sidecar == nullptr) {
    throw std::invalid_argument("dcm protocol needs the simulation sidecar");
  }
  MetricsReport r;
  r.protocol = protocol;
  r.samples = samples.size();
  for (std::size_t K : Ks) {
    for (const char* name : {"MAP", "NDCG", "Click"}) r.values[std::string(name) + "@" + std::to_string(K)] = 0.0;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Ranking order = rerank(scores[i]);
    for (std::size_t K : Ks) {
      const std::string k = "@" + std::to_string(K);
      r.values["MAP" + k] += map_at_k(order, samples[i].labels, K);
      r.values["NDCG" + k] += ndcg_at_k(order, samples[i].labels, K);
      r.values["Click" + k] += protocol == Protocol::log_replay
                                   ? click_at_k_logged(order, samples[i].labels, K)
                                   : click_at_k_dcm(order, *sidecar, samples[i].user_id, K);
    }
  }
  if (!samples.empty()) {
    for (auto& [_, v] : r.values) v /= static_cast<double>(samples.size());
  }
  return r;
}

/// Scores every sample in infer mode, re-ranks, and averages the metrics.
inline MetricsReport evaluate(const std::vector<Sample>& samples, ParamRegistry& params, const ModelConfig& cfg,
                              Protocol protocol, const std::vector<std::size_t>& Ks = {5, 10},
                              const clicksim::SynthSidecar* sidecar = nullptr) {
  for (std::size_t K : Ks) {
    if (K < 1 || static_cast<int>(K) > cfg.M) {
      throw std::invalid_argument("cutoff K=" + std::to_string(K) + " exceeds list length M=" + std::to_string(cfg.M));
    }
  }
  std::vector<std::vector<double>> scores;
  scores.reserve(samples.size());
  for (const Sample& s : samples) scores.push_back(predict(s, params, cfg));
  return evaluate_scores(samples, scores, protocol, Ks, sidecar);
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["protocol"] = to_string(r.protocol);
  j["samples"] = r.samples;
  j["metrics"] = r.values;
  return j;
}

/// Two-column CSV: metric,value.
inline void write_report_csv(std::ostream& os, const MetricsReport& r) {
  os << "metric,value\n";
  os << std::setprecision(17);
  for (const auto& [k, v] : r.values) os << k << "," << v << "\n";
}

// ---------------------------------------------------------------------------
// Similarity export

/// Cosine similarities between the mean embeddings of clicked and skipped items
/// in the candidate list and in the history. Absent classes have no items.
struct SimilarityGrid {
  static constexpr std::array<const char*, 4> kClasses = {"pos-candidate", "neg-candidate", "pos-history",
                                                          "neg-history"};
  std::array<bool, 4> present{};
  std::array<std::array<std::optional<double>, 4>, 4> cosine{};
};

inline SimilarityGrid export_pattern_similarity(const Sample& sample, ParamRegistry& params, const ModelConfig& cfg) {
  std::array<std::vector<FeatureVector>, 4> groups;
  for (std::size_t i = 0; i < sample.candidate.size(); ++i) {
    groups[sample.labels.at(i) == 1 ? 0 : 1].push_back(sample.candidate[i]);
  }
  for (std::size_t t = 0; t < sample.history.size(); ++t) {
    for (std::size_t j = 0; j < sample.history[t].size(); ++j) {
      groups[sample.feedback.at(t).at(j) == 1 ? 2 : 3].push_back(sample.history[t][j]);
    }
  }
  Tape tape(false);
  std::array<nn::RowVector, 4> means;
  SimilarityGrid g;
  for (std::size_t c = 0; c < 4; ++c) {
    g.present[c] = !groups[c].empty();
    if (g.present[c]) means[c] = encoders::embed_items(tape, groups[c], params, cfg).value().colwise().mean();
  }
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      if (!g.present[a] || !g.present[b]) continue;
      const double na = means[a].norm(), nb = means[b].norm();
      if (a == b) {
        g.cosine[a][b] = 1.0;
      } else {
        g.cosine[a][b] = (na > 0 && nb > 0) ? means[a].dot(means[b]) / (na * nb) : 0.0;
      }
    }
  }
  return g;
}

/// Square CSV with a header row; absent entries are written as "absent".
inline void write_similarity_csv(std::ostream& os, const SimilarityGrid& g) {
  os << "class";
  for (const char* c : SimilarityGrid::kClasses) os << "," << c;
  os << "\n" << std::setprecision(17);
  for (std::size_t a = 0; a < 4; ++a) {
    os << SimilarityGrid::kClasses[a];
    for (std::size_t b = 0; b < 4; ++b) {
      os << ",";
      if (g.cosine[a][b]) {
        os << *g.cosine[a][b];
      } else {
        os << "absent";
      }
    }
    os << "\n";
  }
}

inline nlohmann::json similarity_to_json(const SimilarityGrid& g) {
  nlohmann::json j;
  j["classes"] = SimilarityGrid::kClasses;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t a = 0; a < 4; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t b = 0; b < 4; ++b) row.push_back(g.cosine[a][b] ? nlohmann::json(*g.cosine[a][b]) : nullptr);
    rows.push_back(row);
  }
  j["cosine"] = rows;
  j["present"] = g.present;
  return j;
}

}  // namespace relife
