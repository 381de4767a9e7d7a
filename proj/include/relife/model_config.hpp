#pragma once

#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relife {

/// Ablation variants. Each removes one component of the full model.
enum class Variant { full, no_dim, no_cpe, no_spm, no_icc, no_cl, no_pat };

inline const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::full,   Variant::no_dim, Variant::no_cpe, Variant::no_spm,
                                         Variant::no_icc, Variant::no_cl,  Variant::no_pat};
  return v;
}

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_dim: return "-DIM";
    case Variant::no_cpe: return "-CPE";
    case Variant::no_spm: return "-SPM";
    case Variant::no_icc: return "-ICC";
    case Variant::no_cl: return "-CL";
    case Variant::no_pat: return "-PAT";
  }
  return "?";
}

/// Accepts "full", "-DIM", "no_dim", "dim" (case-insensitive) and so on.
inline Variant parse_variant(std::string name) {
  for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (name.rfind("no_", 0) == 0) name = name.substr(3);
  if (!name.empty() && name.front() == '-') name = name.substr(1);
  if (name == "full") return Variant::full;
  if (name == "dim") return Variant::no_dim;
  if (name == "cpe") return Variant::no_cpe;
  if (name == "spm") return Variant::no_spm;
  if (name == "icc") return Variant::no_icc;
  if (name == "cl") return Variant::no_cl;
  if (name == "pat") return Variant::no_pat;
  throw std::invalid_argument("unknown variant: " + name);
}

/// Every dimension and hyperparameter of the model and its training loop.
struct ModelConfig {
  int M = 10;  // candidate and history list length
  int N = 3;   // history lists per sample
  int L = 30;  // padded length of each feedback-split history sequence
  int d_emb = 64;
  int d_f = 64;
  int d_gru = 64;
  int heads = 2;
  double sigma = 0.5;
  double tau = 0.1;
  double beta = 0.5;
  std::vector<int> mlp_widths = {200, 80};
  double leaky_alpha = 0.01;
  double lr = 2.5e-3;
  int batch_size = 128;
  int epochs = 10;
  std::uint64_t seed = 42;
  double val_fraction = 0.2;
  Variant variant = Variant::full;
  bool cpe_share_params = true;
  /// Vocabulary size per feature field, taken from the dataset schema. Id 0 is the pad id.
  std::vector<int> vocab_sizes = {};

  [[nodiscard]] int field_count() const { return static_cast<int>(vocab_sizes.size()); }
  [[nodiscard]] int d_x() const { return field_count() * d_emb; }
  [[nodiscard]] int d_h() const { return d_x(); }

  [[nodiscard]] bool uses_icc() const { return variant != Variant::no_icc; }
  [[nodiscard]] bool uses_dim() const { return variant != Variant::no_dim; }
  [[nodiscard]] bool uses_spm() const { return variant != Variant::no_spm; }
  /// The history-pattern path runs whenever either the MLP or InfoNCE consumes it.
  [[nodiscard]] bool uses_cpe() const { return variant != Variant::no_cpe; }
  [[nodiscard]] bool pattern_in_mlp() const { return variant != Variant::no_cpe && variant != Variant::no_pat; }
  [[nodiscard]] bool uses_infonce() const { return uses_cpe() && beta > 0; }

  /// Width of [q_i ; p_h ; s_i ; x~_i] after the variant's removals.
  [[nodiscard]] int mlp_input_width() const {
    int w = d_x();
    if (uses_dim()) w += 2 * (d_x() + d_h());
    if (pattern_in_mlp()) w += d_h();
    if (uses_spm()) w += d_gru;
    return w;
  }

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid config: " + what); };
    if (M < 1 || N < 1 || L < 1) fail("M, N, L must be >= 1");
    if (d_emb < 1 || d_f < 1 || d_gru < 1) fail("dimensions must be >= 1");
    if (heads < 1) fail("heads must be >= 1");
    if (vocab_sizes.empty()) fail("no feature fields (vocab_sizes empty)");
    for (int v : vocab_sizes) {
      if (v < 2) fail("every vocabulary needs the pad id 0 plus at least one real id");
    }
    if (d_x() % heads != 0) fail("item width " + std::to_string(d_x()) + " not divisible by heads");
    if (!(sigma > 0)) fail("sigma must be > 0");
    if (!(tau > 0)) fail("tau must be > 0");
    if (!(beta >= 0)) fail("beta must be >= 0");
    for (int w : mlp_widths) {
      if (w < 1) fail("mlp widths must be >= 1");
    }
    if (!(lr > 0)) fail("lr must be > 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (epochs < 0) fail("epochs must be >= 0");
    if (!(val_fraction >= 0 && val_fraction < 1)) fail("val_fraction must be in [0,1)");
  }
};

/// Applies an ablation variant: -CPE and -CL also switch the contrastive term off.
inline ModelConfig make_variant(const ModelConfig& cfg, Variant v) {
  ModelConfig out = cfg;
  out.variant = v;
  if (v == Variant::no_cpe || v == Variant::no_cl) out.beta = 0;
  return out;
}

/// FNV-1a over the fields that determine parameter names and shapes.
inline std::uint64_t config_hash(const ModelConfig& cfg) {
  std::string key = "M=" + std::to_string(cfg.M) + ";N=" + std::to_string(cfg.N) + ";L=" + std::to_string(cfg.L) +
                    ";d_emb=" + std::to_string(cfg.d_emb) + ";d_f=" + std::to_string(cfg.d_f) +
                    ";d_gru=" + std::to_string(cfg.d_gru) + ";heads=" + std::to_string(cfg.heads) +
                    ";variant=" + to_string(cfg.variant) + ";share=" + std::to_string(cfg.cpe_share_params) + ";mlp=";
  for (int w : cfg.mlp_widths) key += std::to_string(w) + ",";
  key += ";vocab=";
  for (int v : cfg.vocab_sizes) key += std::to_string(v) + ",";
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h == 0 ? 1 : h;
}

}  // namespace relife
