#pragma once

// List-level interaction log: samples, their JSONL encoding, and the two
// history views the model consumes (feedback split and chronological flatten).

#include "relife/model_config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace relife {

/// Categorical ids of one item, one per schema field. Id 0 is the pad id.
struct FeatureVector {
  std::vector<int> field_values;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline FeatureVector pad_item(std::size_t field_count) { return FeatureVector{std::vector<int>(field_count, 0)}; }

using ItemGrid = std::vector<std::vector<FeatureVector>>;
using FeedbackGrid = std::vector<std::vector<int>>;

/// One user's re-ranking episode.
struct Sample {
  std::int64_t user_id = 0;
  ItemGrid history;        // N x M, row t is the t-th history list
  FeedbackGrid feedback;   // N x M in {0,1}
  std::vector<FeatureVector> candidate;  // M
  std::vector<int> labels;               // M in {0,1}
  std::vector<std::int64_t> list_timestamps;  // N, strictly increasing oldest -> newest

  [[nodiscard]] std::size_t n_lists() const { return history.size(); }
  [[nodiscard]] std::size_t list_len() const { return candidate.size(); }
};

struct FieldSpec {
  std::string name;
  int vocab = 0;
};

struct Schema {
  std::vector<FieldSpec> fields;

  [[nodiscard]] std::size_t field_count() const { return fields.size(); }
  [[nodiscard]] std::vector<int> vocab_sizes() const {
    std::vector<int> v;
    for (const auto& f : fields) v.push_back(f.vocab);
    return v;
  }
};

/// History split by feedback type, each side padded to L.
struct SplitHistory {
  std::vector<FeatureVector> pos_items;
  std::vector<FeatureVector> neg_items;
  std::vector<bool> pos_mask;
  std::vector<bool> neg_mask;
};

/// History in chronological order, length N*M.
struct FlatHistory {
  std::vector<FeatureVector> items;
  std::vector<int> feedback;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Schema and dataset files

inline Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  for (const auto& f : j.at("fields")) s.fields.push_back({f.at("name").get<std::string>(), f.at("vocab").get<int>()});
  if (s.fields.empty()) throw DatasetError("schema declares no fields");
  for (const auto& f : s.fields) {
    if (f.vocab < 2) throw DatasetError("schema field '" + f.name + "' needs vocab >= 2 (id 0 is the pad id)");
  }
  return s;
}

inline nlohmann::json schema_to_json(const Schema& s) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : s.fields) fields.push_back({{"name", f.name}, {"vocab", f.vocab}});
  return {{"fields", fields}};
}

inline Schema load_schema(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DatasetError("cannot open schema " + path);
  try {
    return schema_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError("schema " + path + ": " + e.what());
  }
}

inline void save_schema(const std::string& path, const Schema& s) {
  std::ofstream os(path);
  if (!os) throw DatasetError("cannot write schema " + path);
  os << schema_to_json(s).dump(2) << "\n";
}

namespace detail {

inline FeatureVector parse_item(const nlohmann::json& j, const Schema& schema, const std::string& where) {
  if (!j.is_array()) throw DatasetError(where + ": item is not an array");
  if (j.size() != schema.field_count()) {
    throw DatasetError(where + ": item has " + std::to_string(j.size()) + " field values, schema declares " +
                       std::to_string(schema.field_count()));
  }
  FeatureVector fv;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const int id = j[k].get<int>();
    if (id < 0 || id >= schema.fields[k].vocab) {
      throw DatasetError(where + ": id " + std::to_string(id) + " outside vocabulary of field '" +
                         schema.fields[k].name + "' (size " + std::to_string(schema.fields[k].vocab) + ")");
    }
    fv.field_values.push_back(id);
  }
  return fv;
}

inline std::vector<int> parse_binary_row(const nlohmann::json& j, std::size_t expect, const std::string& field) {
  if (!j.is_array()) throw DatasetError("field '" + field + "' is not an array");
  if (j.size() != expect) {
    throw DatasetError("shape mismatch in field '" + field + "': expected " + std::to_string(expect) +
                       " entries, got " + std::to_string(j.size()));
  }
  return j.get<std::vector<int>>();
}

}  // namespace detail

/// Parses one JSONL record. Errors name the offending field; callers add the line number.
inline Sample sample_from_json(const nlohmann::json& j, const Schema& schema) {
  Sample s;
  s.user_id = j.at("user_id").get<std::int64_t>();
  const auto& cand = j.at("candidate");
  if (!cand.is_array()) throw DatasetError("field 'candidate' is not an array");
  for (std::size_t i = 0; i < cand.size(); ++i) {
    s.candidate.push_back(detail::parse_item(cand[i], schema, "field 'candidate'[" + std::to_string(i) + "]"));
  }
  const std::size_t m = s.candidate.size();
  s.labels = detail::parse_binary_row(j.at("labels"), m, "labels");

  const auto& hist = j.at("history");
  if (!hist.is_array()) throw DatasetError("field 'history' is not an array");
  for (std::size_t t = 0; t < hist.size(); ++t) {
    if (!hist[t].is_array() || hist[t].size() != m) {
      throw DatasetError("shape mismatch in field 'history': list " + std::to_string(t) + " has " +
                         std::to_string(hist[t].is_array() ? hist[t].size() : 0) + " items, candidate has " +
                         std::to_string(m));
    }
    std::vector<FeatureVector> list;
    for (std::size_t i = 0; i < m; ++i) {
      list.push_back(detail::parse_item(hist[t][i], schema,
                                        "field 'history'[" + std::to_string(t) + "][" + std::to_string(i) + "]"));
    }
    s.history.push_back(std::move(list));
  }
  const std::size_t n = s.history.size();
  const auto& fb = j.at("feedback");
  if (!fb.is_array() || fb.size() != n) {
    throw DatasetError("shape mismatch in field 'feedback': expected " + std::to_string(n) + " lists");
  }
  for (std::size_t t = 0; t < n; ++t) s.feedback.push_back(detail::parse_binary_row(fb[t], m, "feedback"));
  const auto& ts = j.at("list_timestamps");
  if (!ts.is_array() || ts.size() != n) {
    throw DatasetError("shape mismatch in field 'list_timestamps': expected " + std::to_string(n) + " entries");
  }
  s.list_timestamps = ts.get<std::vector<std::int64_t>>();
  return s;
}

inline nlohmann::json sample_to_json(const Sample& s) {
  auto items = [](const std::vector<FeatureVector>& list) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& fv : list) a.push_back(fv.field_values);
    return a;
  };
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& list : s.history) hist.push_back(items(list));
  return {{"user_id", s.user_id},       {"history", hist},       {"feedback", s.feedback},
          {"candidate", items(s.candidate)}, {"labels", s.labels}, {"list_timestamps", s.list_timestamps}};
}

inline std::vector<Sample> read_dataset(std::istream& is, const Schema& schema) {
  std::vector<Sample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(line), schema));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    } catch (const DatasetError& e) {
      throw DatasetError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Loads a JSONL dataset in file order.
inline std::vector<Sample> load_dataset(const std::string& path, const Schema& schema) {
  std::ifstream is(path);
  if (!is) throw DatasetError("cannot open dataset " + path);
  return read_dataset(is, schema);
}

inline void write_dataset(std::ostream& os, const std::vector<Sample>& samples) {
  for (const auto& s : samples) os << sample_to_json(s).dump() << "\n";
}

inline void save_dataset(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream os(path);
  if (!os) throw DatasetError("cannot write dataset " + path);
  write_dataset(os, samples);
}

// ---------------------------------------------------------------------------
// Validation

/// Returns every violated invariant; empty means the sample conforms to cfg.
inline std::vector<std::string> validate_sample(const Sample& s, const ModelConfig& cfg) {
  std::vector<std::string> v;
  const std::size_t n = s.history.size();
  const std::size_t m = s.candidate.size();
  if (static_cast<int>(n) != cfg.N) {
    v.push_back("history list count " + std::to_string(n) + " != N=" + std::to_string(cfg.N));
  }
  if (static_cast<int>(m) != cfg.M) {
    v.push_back("candidate length " + std::to_string(m) + " != M=" + std::to_string(cfg.M));
  }
  if (s.labels.size() != m) v.push_back("labels length differs from candidate length");
  if (std::any_of(s.labels.begin(), s.labels.end(), [](int y) { return y != 0 && y != 1; })) {
    v.push_back("labels not binary");
  }
  if (s.feedback.size() != n) v.push_back("feedback list count differs from history");
  bool fb_binary = true;
  for (std::size_t t = 0; t < n; ++t) {
    if (s.history[t].size() != m) v.push_back("history list " + std::to_string(t) + " length differs from M");
    if (t < s.feedback.size()) {
      if (s.feedback[t].size() != s.history[t].size()) v.push_back("feedback list " + std::to_string(t) + " shape");
      for (int f : s.feedback[t]) fb_binary = fb_binary && (f == 0 || f == 1);
    }
  }
  if (!fb_binary) v.push_back("feedback not binary");
  if (s.list_timestamps.size() != n) {
    v.push_back("list_timestamps length differs from history list count");
  } else {
    for (std::size_t t = 1; t < n; ++t) {
      if (s.list_timestamps[t] <= s.list_timestamps[t - 1]) {
        v.push_back("list_timestamps not strictly increasing");
        break;
      }
    }
  }
  const auto check_item = [&](const FeatureVector& fv, const std::string& where) {
    if (fv.field_values.size() != cfg.vocab_sizes.size()) {
      v.push_back(where + ": field count " + std::to_string(fv.field_values.size()) + " != " +
                  std::to_string(cfg.vocab_sizes.size()));
      return;
    }
    for (std::size_t k = 0; k < fv.field_values.size(); ++k) {
      if (fv.field_values[k] < 0 || fv.field_values[k] >= cfg.vocab_sizes[k]) {
        v.push_back(where + ": id out of vocabulary in field " + std::to_string(k));
      }
    }
  };
  if (!cfg.vocab_sizes.empty()) {
    for (std::size_t i = 0; i < m; ++i) check_item(s.candidate[i], "candidate[" + std::to_string(i) + "]");
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t i = 0; i < s.history[t].size(); ++i) {
        check_item(s.history[t][i], "history[" + std::to_string(t) + "][" + std::to_string(i) + "]");
      }
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// History views

namespace detail {

inline void check_grid_shapes(const ItemGrid& history, const FeedbackGrid& feedback) {
  if (history.size() != feedback.size()) throw std::invalid_argument("history/feedback list count mismatch");
  for (std::size_t t = 0; t < history.size(); ++t) {
    if (history[t].size() != feedback[t].size()) {
      throw std::invalid_argument("history/feedback shape mismatch in list " + std::to_string(t));
    }
  }
}

inline std::size_t grid_field_count(const ItemGrid& history) {
  for (const auto& list : history) {
    if (!list.empty()) return list.front().field_values.size();
  }
  return 0;
}

}  // namespace detail

/// Stable ascending order of list indices by timestamp.
inline std::vector<std::size_t> chronological_order(const std::vector<std::int64_t>& timestamps) {
  std::vector<std::size_t> order(timestamps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return timestamps[a] < timestamps[b]; });
  return order;
}

/// Concatenates the history lists oldest -> newest; within a list, position order.
inline FlatHistory flatten_chronological(const ItemGrid& history, const FeedbackGrid& feedback,
                                         const std::vector<std::int64_t>& timestamps) {
  detail::check_grid_shapes(history, feedback);
  if (timestamps.size() != history.size()) throw std::invalid_argument("timestamp count mismatch");
  FlatHistory flat;
  for (std::size_t t : chronological_order(timestamps)) {
    flat.items.insert(flat.items.end(), history[t].begin(), history[t].end());
    flat.feedback.insert(flat.feedback.end(), feedback[t].begin(), feedback[t].end());
  }
  return flat;
}

inline FlatHistory flatten_chronological(const Sample& s) {
  return flatten_chronological(s.history, s.feedback, s.list_timestamps);
}

namespace detail {

inline void fill_side(const std::vector<const FeatureVector*>& src, std::size_t L, std::size_t fields,
                      std::vector<FeatureVector>& items, std::vector<bool>& mask) {
  // Keep the most recent L entries, still oldest first.
  const std::size_t skip = src.size() > L ? src.size() - L : 0;
  for (std::size_t k = skip; k < src.size(); ++k) {
    items.push_back(*src[k]);
    mask.push_back(true);
  }
  while (items.size() < L) {
    items.push_back(pad_item(fields));
    mask.push_back(false);
  }
}

}  // namespace detail

/// Splits a history whose rows are already oldest -> newest into positive and
/// negative sequences, each truncated to its L most recent entries and padded to L.
inline SplitHistory split_by_feedback(const ItemGrid& history, const FeedbackGrid& feedback, int L) {
  detail::check_grid_shapes(history, feedback);
  if (L < 1) throw std::invalid_argument("split_by_feedback: L must be >= 1");
  std::vector<const FeatureVector*> pos, neg;
  for (std::size_t t = 0; t < history.size(); ++t) {
    for (std::size_t j = 0; j < history[t].size(); ++j) {
      (feedback[t][j] == 1 ? pos : neg).push_back(&history[t][j]);
    }
  }
  const std::size_t fields = detail::grid_field_count(history);
  SplitHistory out;
  detail::fill_side(pos, static_cast<std::size_t>(L), fields, out.pos_items, out.pos_mask);
  detail::fill_side(neg, static_cast<std::size_t>(L), fields, out.neg_items, out.neg_mask);
  return out;
}

/// Feedback split of a sample, ordering lists by their timestamps first.
inline SplitHistory split_by_feedback(const Sample& s, int L) {
  const FlatHistory flat = flatten_chronological(s);
  return split_by_feedback(ItemGrid{flat.items}, FeedbackGrid{flat.feedback}, L);
}

/// Keeps only the n most recent history lists (for sweeping the history depth).
inline Sample restrict_history(const Sample& s, std::size_t n) {
  if (n > s.history.size()) {
    throw std::invalid_argument("restrict_history: sample has only " + std::to_string(s.history.size()) + " lists");
  }
  const auto order = chronological_order(s.list_timestamps);
  Sample out = s;
  out.history.clear();
  out.feedback.clear();
  out.list_timestamps.clear();
  for (std::size_t k = order.size() - n; k < order.size(); ++k) {
    out.history.push_back(s.history[order[k]]);
    out.feedback.push_back(s.feedback[order[k]]);
    out.list_timestamps.push_back(s.list_timestamps[order[k]]);
  }
  return out;
}

}  // namespace relife
