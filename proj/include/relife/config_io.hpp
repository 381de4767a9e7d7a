#pragma once

// Plain-text configuration: one `key = value` per line, `#` starts a comment,
// lists are comma-separated. Model keys are bare (`beta = 0.5`); generator
// keys carry a `synth.` prefix and click-model keys a `dcm.` prefix.

#include "relife/clicksim.hpp"
#include "relife/model_config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace relife {

struct RunConfig {
  ModelConfig model;
  clicksim::SynthConfig synth;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  if (!is || !(is >> std::ws).eof()) throw ConfigError("bad value for '" + key + "': " + text);
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad boolean for '" + key + "': " + text);
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<int>(key, item));
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& config_setters() {
  auto model = [](auto member) {
    return [member](RunConfig& c, const std::string& k, const std::string& v) {
      using T = std::remove_reference_t<decltype(c.model.*member)>;
      c.model.*member = parse_number<T>(k, v);
    };
  };
  auto synth = [](auto member) {
    return [member](RunConfig& c, const std::string& k, const std::string& v) {
      using T = std::remove_reference_t<decltype(c.synth.*member)>;
      c.synth.*member = parse_number<T>(k, v);
    };
  };
  auto dcm = [](auto member) {
    return [member](RunConfig& c, const std::string& k, const std::string& v) {
      using T = std::remove_reference_t<decltype(c.synth.dcm.*member)>;
      c.synth.dcm.*member = parse_number<T>(k, v);
    };
  };
  static const std::map<std::string, Setter> setters = {
      {"M", model(&ModelConfig::M)},
      {"N", model(&ModelConfig::N)},
      {"L", model(&ModelConfig::L)},
      {"d_emb", model(&ModelConfig::d_emb)},
      {"d_f", model(&ModelConfig::d_f)},
      {"d_gru", model(&ModelConfig::d_gru)},
      {"heads", model(&ModelConfig::heads)},
      {"sigma", model(&ModelConfig::sigma)},
      {"tau", model(&ModelConfig::tau)},
      {"beta", model(&ModelConfig::beta)},
      {"leaky_alpha", model(&ModelConfig::leaky_alpha)},
      {"lr", model(&ModelConfig::lr)},
      {"batch_size", model(&ModelConfig::batch_size)},
      {"epochs", model(&ModelConfig::epochs)},
      {"seed", model(&ModelConfig::seed)},
      {"val_fraction", model(&ModelConfig::val_fraction)},
      {"mlp_widths",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.model.mlp_widths = parse_int_list(k, v); }},
      {"vocab_sizes",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.model.vocab_sizes = parse_int_list(k, v); }},
      {"variant", [](RunConfig& c, const std::string&, const std::string& v) { c.model.variant = parse_variant(v); }},
      {"cpe_share_params",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.model.cpe_share_params = parse_bool(k, v); }},
      {"synth.n_users", synth(&clicksim::SynthConfig::n_users)},
      {"synth.n_items", synth(&clicksim::SynthConfig::n_items)},
      {"synth.n_fields", synth(&clicksim::SynthConfig::n_fields)},
      {"synth.n_categories", synth(&clicksim::SynthConfig::n_categories)},
      {"synth.n_history_lists", synth(&clicksim::SynthConfig::n_history_lists)},
      {"synth.list_len", synth(&clicksim::SynthConfig::list_len)},
      {"synth.interest_dim", synth(&clicksim::SynthConfig::interest_dim)},
      {"synth.relevance_threshold", synth(&clicksim::SynthConfig::relevance_threshold)},
      {"synth.comparison_strength", synth(&clicksim::SynthConfig::comparison_strength)},
      {"dcm.lambda", dcm(&clicksim::DcmParams::lambda)},
      {"dcm.epsilon", dcm(&clicksim::DcmParams::epsilon)},
      {"dcm.seed", dcm(&clicksim::DcmParams::seed)},
  };
  return setters;
}

}  // namespace detail

/// Applies `key = value` lines on top of `base`. Unknown keys and malformed
/// values raise ConfigError naming the line.
inline RunConfig parse_config(std::istream& is, RunConfig base = {}) {
  const auto& setters = detail::config_setters();
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second(base, key, value);
    } catch (const std::exception& e) {
      throw ConfigError(where + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in, std::move(base));
}

/// Every key with its current value, in the file format.
inline void write_config(std::ostream& os, const RunConfig& c) {
  auto list = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  const ModelConfig& m = c.model;
  os << std::setprecision(17);
  os << "M = " << m.M << "\nN = " << m.N << "\nL = " << m.L << "\nd_emb = " << m.d_emb << "\nd_f = " << m.d_f
     << "\nd_gru = " << m.d_gru << "\nheads = " << m.heads << "\nsigma = " << m.sigma << "\ntau = " << m.tau
     << "\nbeta = " << m.beta << "\nmlp_widths = " << list(m.mlp_widths) << "\nleaky_alpha = " << m.leaky_alpha
     << "\nlr = " << m.lr << "\nbatch_size = " << m.batch_size << "\nepochs = " << m.epochs << "\nseed = " << m.seed
     << "\nval_fraction = " << m.val_fraction << "\nvariant = " << to_string(m.variant)
     << "\ncpe_share_params = " << (m.cpe_share_params ? "true" : "false");
  if (!m.vocab_sizes.empty()) os << "\nvocab_sizes = " << list(m.vocab_sizes);
  const auto& s = c.synth;
  os << "\nsynth.n_users = " << s.n_users << "\nsynth.n_items = " << s.n_items << "\nsynth.n_fields = " << s.n_fields
     << "\nsynth.n_categories = " << s.n_categories << "\nsynth.n_history_lists = " << s.n_history_lists
     << "\nsynth.list_len = " << s.list_len << "\nsynth.interest_dim = " << s.interest_dim
     << "\nsynth.relevance_threshold = " << s.relevance_threshold
     << "\nsynth.comparison_strength = " << s.comparison_strength << "\ndcm.lambda = " << s.dcm.lambda
     << "\ndcm.epsilon = " << s.dcm.epsilon << "\ndcm.seed = " << s.dcm.seed << "\n";
}

}  // namespace relife
