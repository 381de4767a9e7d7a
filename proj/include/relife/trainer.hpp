#pragma once

// Mini-batch Adam training with a deterministic shuffle and a held-out split.

#include "relife/evaluation.hpp"
#include "relife/nn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace relife {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochLog {
  int epoch = 0;
  double l_util = 0;
  double l_info = 0;
  double val_map5 = std::numeric_limits<double>::quiet_NaN();
  double val_ndcg5 = std::numeric_limits<double>::quiet_NaN();
};

/// Sample indices of the training and held-out parts.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Fisher-Yates with a plain modulo draw, so the order depends only on the seed.
inline void deterministic_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

/// Shuffles once with the seed and holds out the last floor(n * val_fraction) samples.
inline DatasetSplit split_train_val(std::size_t n, double val_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eed5a1175ULL);
  deterministic_shuffle(idx, rng);
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction));
  DatasetSplit s;
  s.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
  s.val.assign(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

struct TrainResult {
  ParamRegistry params;
  std::vector<EpochLog> log;
  DatasetSplit split;
};

/// Called after every epoch with its log row and the parameters at that point.
using EpochCallback = std::function<void(const EpochLog&, const ParamRegistry&)>;

/// Throws DatasetError listing the first invalid sample's problems.
inline void validate_dataset(const std::vector<Sample>& data, const ModelConfig& cfg) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto problems = validate_sample(data[i], cfg);
    if (!problems.empty()) {
      std::string msg = "sample " + std::to_string(i) + ":";
      for (const auto& p : problems) msg += " " + p + ";";
      throw DatasetError(msg);
    }
  }
}

/// One optimizer step per mini-batch on L_util + beta * L_info. The last
/// partial batch is kept. Results depend only on the data and cfg (seed included).
inline TrainResult train(const std::vector<Sample>& data, const ModelConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  validate_dataset(data, cfg);

  TrainResult result;
  result.params = init_params(cfg);
  result.split = split_train_val(data.size(), cfg.val_fraction, cfg.seed);
  if (result.split.train.empty()) throw std::invalid_argument("train: validation split leaves no training samples");

  std::vector<Sample> val;
  for (std::size_t i : result.split.val) val.push_back(data[i]);
  const std::size_t k_log = static_cast<std::size_t>(std::min(5, cfg.M));

  nn::AdamState adam;
  adam.config.lr = cfg.lr;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order = result.split.train;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    deterministic_shuffle(order, rng);
    EpochLog log;
    log.epoch = epoch;
    double util_sum = 0, info_sum = 0;
    for (std::size_t start = 0, step = 0; start < order.size(); start += batch_size, ++step) {
      std::vector<const Sample*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) batch.push_back(&data[order[k]]);

      Tape tape;
      const BatchForward fwd = forward_batch(tape, batch, result.params, cfg, Mode::train);
      const BatchLoss loss = batch_loss(fwd, batch, cfg);
      const double total = loss.total.scalar();
      if (!std::isfinite(total)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(step));
      }
      result.params.zero_grad();
      tape.backward(loss.total);
      nn::adam_step(result.params, adam);

      const auto b = static_cast<double>(batch.size());
      util_sum += loss.utility.scalar() * b;
      if (loss.info.valid()) info_sum += loss.info.scalar() * b;
    }
    log.l_util = util_sum / static_cast<double>(order.size());
    log.l_info = info_sum / static_cast<double>(order.size());
    if (!val.empty()) {
      const MetricsReport r = evaluate(val, result.params, cfg, Protocol::log_replay, {k_log});
      log.val_map5 = r.get("MAP", k_log);
      log.val_ndcg5 = r.get("NDCG", k_log);
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log, result.params);
  }
  return result;
}

inline void write_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,L_util,L_info,val_map5,val_ndcg5\n" << std::setprecision(10);
  for (const auto& e : log) {
    os << e.epoch << "," << e.l_util << "," << e.l_info << "," << e.val_map5 << "," << e.val_ndcg5 << "\n";
  }
}

}  // namespace relife
