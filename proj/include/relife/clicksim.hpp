#pragma once

// Dependent click model (DCM) and the synthetic list-log generator built on it.
//
// A DCM user scans a list top-down. At an examined position k they click with
// probability a_k. After a click they continue with probability lambda; after
// a skip they always continue.

#include "relife/datamodel.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace relife::clicksim {

struct DcmParams {
  double lambda = 0.7;   // continuation probability after a click
  double epsilon = 0.1;  // attraction of a non-relevant item
  std::uint64_t seed = 7;

  void validate() const {
    if (!(lambda >= 0 && lambda <= 1)) throw std::invalid_argument("dcm lambda must be in [0,1]");
    if (!(epsilon >= 0 && epsilon < 1)) throw std::invalid_argument("dcm epsilon must be in [0,1)");
  }
};

/// Uniform double in [0,1) from the top 53 bits; portable across standard libraries.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double relevance_to_attraction(int relevant, const DcmParams& p) {
  return p.epsilon + (1.0 - p.epsilon) * (relevant ? 1.0 : 0.0);
}

inline std::vector<int> dcm_sample_clicks(std::span<const double> attractions, const DcmParams& p,
                                          std::mt19937_64& rng) {
  std::vector<int> clicks(attractions.size(), 0);
  for (std::size_t k = 0; k < attractions.size(); ++k) {
    if (uniform01(rng) < attractions[k]) {
      clicks[k] = 1;
      if (!(uniform01(rng) < p.lambda)) break;
    }
  }
  return clicks;
}

/// Exact expected number of clicks in the top K positions.
inline double dcm_expected_clicks_at_k(std::span<const double> attractions, const DcmParams& p, std::size_t K) {
  if (K > attractions.size()) {
    throw std::invalid_argument("K=" + std::to_string(K) + " exceeds list length " +
                                std::to_string(attractions.size()));
  }
  double examine = 1.0;
  double expected = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double a = attractions[k];
    expected += examine * a;
    examine *= a * p.lambda + (1.0 - a);
  }
  return expected;
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct SynthConfig {
  int n_users = 2000;
  int n_items = 200;
  int n_fields = 2;  // item id, category, then noise attributes
  int n_categories = 10;
  int n_history_lists = 3;
  int list_len = 10;
  int interest_dim = 8;
  double relevance_threshold = 0.0;
  double comparison_strength = 1.0;
  DcmParams dcm;

  void validate() const {
    if (n_users < 1 || n_items < 1 || n_fields < 1 || n_categories < 1 || n_history_lists < 1 || list_len < 1 ||
        interest_dim < 1) {
      throw std::invalid_argument("synth counts must be >= 1");
    }
    if (!(comparison_strength >= 0)) throw std::invalid_argument("comparison_strength must be >= 0");
    dcm.validate();
  }
};

inline constexpr int kNoiseAttributeVocab = 8;

struct SynthItem {
  int id = 0;
  int category = 0;
  std::vector<double> latent;
  FeatureVector features;
};

struct SynthUser {
  std::int64_t user_id = 0;
  std::vector<double> interest;
  std::vector<double> candidate_affinity;  // per candidate position, logged order
};

/// Ground truth behind a generated dataset, used for DCM re-simulation.
struct SynthSidecar {
  DcmParams dcm;
  double comparison_strength = 0;
  double relevance_threshold = 0;
  int interest_dim = 0;
  std::vector<SynthItem> items;
  std::vector<SynthUser> users;

  [[nodiscard]] const SynthUser* find_user(std::int64_t user_id) const {
    // Users are generated with user_id == index; fall back to a scan otherwise.
    if (user_id >= 0 && static_cast<std::size_t>(user_id) < users.size() && users[user_id].user_id == user_id) {
      return &users[static_cast<std::size_t>(user_id)];
    }
    for (const auto& u : users) {
      if (u.user_id == user_id) return &u;
    }
    return nullptr;
  }
};

struct SynthDataset {
  Schema schema;
  std::vector<Sample> samples;
  SynthSidecar sidecar;
  /// Attractions of every generated list, history lists first then the candidate.
  std::vector<std::vector<std::vector<double>>> list_attractions;
};

/// Attractions of a list in display order. An item whose direct neighbor has a
/// strictly higher affinity is suppressed by exp(-comparison_strength).
inline std::vector<double> list_attractions(std::span<const double> affinity, double threshold,
                                            double comparison_strength, const DcmParams& p) {
  const double damp = std::exp(-comparison_strength);
  std::vector<double> out(affinity.size());
  for (std::size_t k = 0; k < affinity.size(); ++k) {
    double a = relevance_to_attraction(affinity[k] > threshold ? 1 : 0, p);
    const bool left = k > 0 && affinity[k - 1] > affinity[k];
    const bool right = k + 1 < affinity.size() && affinity[k + 1] > affinity[k];
    if (left || right) a *= damp;
    out[k] = a;
  }
  return out;
}

inline double affinity(const std::vector<double>& interest, const std::vector<double>& latent) {
  double dot = 0;
  for (std::size_t k = 0; k < interest.size(); ++k) dot += interest[k] * latent[k];
  return dot / std::sqrt(static_cast<double>(interest.size()));
}

inline Schema synth_schema(const SynthConfig& cfg) {
  Schema s;
  s.fields.push_back({"item_id", cfg.n_items + 1});
  if (cfg.n_fields >= 2) s.fields.push_back({"category", cfg.n_categories + 1});
  for (int f = 2; f < cfg.n_fields; ++f) s.fields.push_back({"attr" + std::to_string(f - 1), kNoiseAttributeVocab + 1});
  return s;
}

/// Deterministic given cfg.dcm.seed. Users get a latent interest vector, items
/// a latent vector near their category centroid; history and candidate clicks
/// are drawn from the DCM over suppressed relevance attractions.
inline SynthDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.dcm.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = cfg.interest_dim;
  const int m = cfg.list_len;

  SynthDataset out;
  out.schema = synth_schema(cfg);
  auto& side = out.sidecar;
  side.dcm = cfg.dcm;
  side.comparison_strength = cfg.comparison_strength;
  side.relevance_threshold = cfg.relevance_threshold;
  side.interest_dim = d;

  std::vector<std::vector<double>> centroids(static_cast<std::size_t>(cfg.n_categories), std::vector<double>(d));
  for (auto& c : centroids) {
    for (auto& x : c) x = normal(rng);
  }
  // latent = 0.8 * centroid + 0.6 * noise keeps unit variance per coordinate.
  for (int i = 1; i <= cfg.n_items; ++i) {
    SynthItem item;
    item.id = i;
    item.category = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.n_categories));
    item.latent.resize(d);
    for (int k = 0; k < d; ++k) item.latent[k] = 0.8 * centroids[item.category - 1][k] + 0.6 * normal(rng);
    item.features.field_values.push_back(item.id);
    if (cfg.n_fields >= 2) item.features.field_values.push_back(item.category);
    for (int f = 2; f < cfg.n_fields; ++f) {
      item.features.field_values.push_back(1 + static_cast<int>(rng() % kNoiseAttributeVocab));
    }
    side.items.push_back(std::move(item));
  }

  std::vector<int> pool(static_cast<std::size_t>(cfg.n_items));
  auto draw_list = [&]() {
    std::vector<int> ids;
    if (cfg.n_items >= m) {
      for (int i = 0; i < cfg.n_items; ++i) pool[i] = i;
      for (int k = 0; k < m; ++k) {
        const auto j = k + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.n_items - k));
        std::swap(pool[k], pool[j]);
        ids.push_back(pool[k]);
      }
    } else {
      for (int k = 0; k < m; ++k) ids.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.n_items)));
    }
    return ids;
  };

  for (int u = 0; u < cfg.n_users; ++u) {
    SynthUser user;
    user.user_id = u;
    user.interest.resize(d);
    for (auto& x : user.interest) x = normal(rng);

    Sample s;
    s.user_id = u;
    std::vector<std::vector<double>> attractions_per_list;
    std::int64_t clock = 0;
    for (int t = 0; t <= cfg.n_history_lists; ++t) {
      const auto ids = draw_list();
      std::vector<double> aff;
      std::vector<FeatureVector> list;
      for (int id : ids) {
        aff.push_back(affinity(user.interest, side.items[id].latent));
        list.push_back(side.items[id].features);
      }
      auto attr = list_attractions(aff, cfg.relevance_threshold, cfg.comparison_strength, cfg.dcm);
      auto clicks = dcm_sample_clicks(attr, cfg.dcm, rng);
      attractions_per_list.push_back(attr);
      if (t < cfg.n_history_lists) {
        clock += 1 + static_cast<std::int64_t>(rng() % 1000);
        s.history.push_back(std::move(list));
        s.feedback.push_back(std::move(clicks));
        s.list_timestamps.push_back(clock);
      } else {
        s.candidate = std::move(list);
        s.labels = std::move(clicks);
        user.candidate_affinity = std::move(aff);
      }
    }
    out.samples.push_back(std::move(s));
    out.list_attractions.push_back(std::move(attractions_per_list));
    side.users.push_back(std::move(user));
  }
  return out;
}

/// Attractions of the candidate list after reordering: position k shows the
/// logged candidate order[k].
inline std::vector<double> reordered_attractions(const SynthSidecar& side, const SynthUser& user,
                                                 std::span<const std::size_t> order) {
  std::vector<double> aff;
  aff.reserve(order.size());
  for (std::size_t idx : order) aff.push_back(user.candidate_affinity.at(idx));
  return list_attractions(aff, side.relevance_threshold, side.comparison_strength, side.dcm);
}

// ---------------------------------------------------------------------------
// Sidecar file (JSON)

inline nlohmann::json sidecar_to_json(const SynthSidecar& s) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : s.items) {
    items.push_back({{"id", it.id}, {"category", it.category}, {"latent", it.latent}, {"features", it.features.field_values}});
  }
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : s.users) {
    users.push_back({{"user_id", u.user_id}, {"interest", u.interest}, {"candidate_affinity", u.candidate_affinity}});
  }
  return {{"dcm", {{"lambda", s.dcm.lambda}, {"epsilon", s.dcm.epsilon}, {"seed", s.dcm.seed}}},
          {"comparison_strength", s.comparison_strength},
          {"relevance_threshold", s.relevance_threshold},
          {"interest_dim", s.interest_dim},
          {"items", items},
          {"users", users}};
}

inline SynthSidecar sidecar_from_json(const nlohmann::json& j) {
  SynthSidecar s;
  s.dcm.lambda = j.at("dcm").at("lambda").get<double>();
  s.dcm.epsilon = j.at("dcm").at("epsilon").get<double>();
  s.dcm.seed = j.at("dcm").at("seed").get<std::uint64_t>();
  s.comparison_strength = j.at("comparison_strength").get<double>();
  s.relevance_threshold = j.at("relevance_threshold").get<double>();
  s.interest_dim = j.at("interest_dim").get<int>();
  for (const auto& it : j.at("items")) {
    SynthItem item;
    item.id = it.at("id").get<int>();
    item.category = it.at("category").get<int>();
    item.latent = it.at("latent").get<std::vector<double>>();
    item.features.field_values = it.at("features").get<std::vector<int>>();
    s.items.push_back(std::move(item));
  }
  for (const auto& u : j.at("users")) {
    SynthUser user;
    user.user_id = u.at("user_id").get<std::int64_t>();
    user.interest = u.at("interest").get<std::vector<double>>();
    user.candidate_affinity = u.at("candidate_affinity").get<std::vector<double>>();
    s.users.push_back(std::move(user));
  }
  return s;
}

inline void save_sidecar(const std::string& path, const SynthSidecar& s) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write sidecar " + path);
  os << sidecar_to_json(s).dump() << "\n";
}

inline SynthSidecar load_sidecar(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open sidecar " + path);
  return sidecar_from_json(nlohmann::json::parse(is));
}

}  // namespace relife::clicksim
