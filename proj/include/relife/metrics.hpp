#pragma once

// Ranking metrics over one re-ranked list. A ranking is a permutation of
// candidate positions (0-based here), best first.

#include "relife/clicksim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace relife {

using Ranking = std::vector<std::size_t>;

/// Positions sorted by score descending; ties keep their original order.
inline Ranking rerank(const std::vector<double>& scores) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("rerank: non-finite score");
  }
  Ranking order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace detail {

inline void check_cutoff(const Ranking& order, const std::vector<int>& labels, std::size_t K) {
  if (order.size() != labels.size()) throw std::invalid_argument("ranking and labels differ in length");
  if (K < 1 || K > order.size()) {
    throw std::invalid_argument("cutoff K=" + std::to_string(K) + " outside [1, " + std::to_string(order.size()) +
                                "]");
  }
}

}  // namespace detail

/// Average precision at K, normalized by min(K, number of relevant items); 0 with no relevant items.
inline double map_at_k(const Ranking& order, const std::vector<int>& labels, std::size_t K) {
  detail::check_cutoff(order, labels, K);
  const auto relevant = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (relevant == 0) return 0.0;
  double hits = 0, sum = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (labels[order[k]] == 1) {
      hits += 1;
      sum += hits / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(std::min(K, relevant));
}

/// NDCG at K with gain = label and discount 1 / log2(rank + 1); 0 with no relevant items.
inline double ndcg_at_k(const Ranking& order, const std::vector<int>& labels, std::size_t K) {
  detail::check_cutoff(order, labels, K);
  std::vector<int> ideal = labels;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double dcg = 0, idcg = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double discount = 1.0 / std::log2(static_cast<double>(k) + 2.0);
    dcg += labels[order[k]] * discount;
    idcg += ideal[k] * discount;
  }
  return idcg > 0 ? dcg / idcg : 0.0;
}

enum class Protocol { log_replay, dcm };

inline std::string to_string(Protocol p) { return p == Protocol::log_replay ? "log_replay" : "dcm"; }

inline Protocol parse_protocol(const std::string& s) {
  if (s == "log_replay" || s == "log") return Protocol::log_replay;
  if (s == "dcm") return Protocol::dcm;
  throw std::invalid_argument("unknown protocol: " + s + " (expected log_replay or dcm)");
}

/// Logged clicks that the new ordering places in its top K.
inline double click_at_k_logged(const Ranking& order, const std::vector<int>& labels, std::size_t K) {
  detail::check_cutoff(order, labels, K);
  double c = 0;
  for (std::size_t k = 0; k < K; ++k) c += labels[order[k]];
  return c;
}

/// Expected top-K clicks when the simulated user of `user_id` scans the re-ordered list.
inline double click_at_k_dcm(const Ranking& order, const clicksim::SynthSidecar& side, std::int64_t user_id,
                             std::size_t K) {
  const clicksim::SynthUser* user = side.find_user(user_id);
  if (user == nullptr) throw std::invalid_argument("user " + std::to_string(user_id) + " missing from sidecar");
  if (order.size() != user->candidate_affinity.size()) {
    throw std::invalid_argument("ranking length does not match the simulated candidate list");
  }
  const std::vector<double> attractions = clicksim::reordered_attractions(side, *user, order);
  return clicksim::dcm_expected_clicks_at_k(attractions, side.dcm, K);
}

}  // namespace relife
