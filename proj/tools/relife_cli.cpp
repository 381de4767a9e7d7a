// Command-line entry points: data synthesis, training, evaluation, ablation,
// hyper-parameter sweeps, gradient checks and the similarity export.

#include "relife/relife.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace relife;
using json = nlohmann::json;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "Run configuration file (key = value lines)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Overrides the model seed (the generator seed for synth)");
  cmd->add_flag("--json", o.json, "Print machine-readable JSON on stdout");
}

/// Dataset directory layout shared by every subcommand.
struct DataPaths {
  fs::path schema, samples, sidecar;
  explicit DataPaths(const fs::path& dir)
      : schema(dir / "schema.json"), samples(dir / "samples.jsonl"), sidecar(dir / "sidecar.json") {}
};

struct LoadedData {
  Schema schema;
  std::vector<Sample> samples;
};

LoadedData load_data(const std::string& dir) {
  const DataPaths p(dir);
  LoadedData d;
  d.schema = load_schema(p.schema.string());
  d.samples = load_dataset(p.samples.string(), d.schema);
  return d;
}

/// Loads the config, applies the seed override and the variant, and fills the
/// vocabularies from the schema when the config leaves them empty.
RunConfig resolve_config(const CommonOptions& o, const Schema* schema) {
  RunConfig rc = load_config(o.config);
  if (o.seed) rc.model.seed = *o.seed;
  rc.model = make_variant(rc.model, rc.model.variant);
  if (schema != nullptr) {
    const auto vocab = schema->vocab_sizes();
    if (rc.model.vocab_sizes.empty()) {
      rc.model.vocab_sizes = vocab;
    } else if (rc.model.vocab_sizes != vocab) {
      throw ConfigError("config vocab_sizes disagree with the dataset schema");
    }
  }
  return rc;
}

/// Cutoffs from a comma list; an empty list means 5 and 10, dropping any above M.
std::vector<std::size_t> parse_ks(const std::string& text, int M) {
  std::vector<std::size_t> ks;
  if (text.empty()) {
    for (std::size_t k : {5, 10}) {
      if (static_cast<int>(k) <= M) ks.push_back(k);
    }
    if (ks.empty()) ks.push_back(static_cast<std::size_t>(M));
    return ks;
  }
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) ks.push_back(static_cast<std::size_t>(std::stoul(item)));
  if (ks.empty()) throw std::invalid_argument("no cutoffs given");
  return ks;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

/// Samples the trainer held out for validation, or all samples when none were held out.
std::vector<Sample> held_out(const std::vector<Sample>& data, const DatasetSplit& split) {
  if (split.val.empty()) return data;
  std::vector<Sample> out;
  for (std::size_t i : split.val) out.push_back(data[i]);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_synth(const CommonOptions& o, const std::string& out_dir) {
  RunConfig rc = load_config(o.config);
  if (o.seed) rc.synth.dcm.seed = *o.seed;
  const auto ds = clicksim::synth_generate(rc.synth);
  fs::create_directories(out_dir);
  const DataPaths p(out_dir);
  save_schema(p.schema.string(), ds.schema);
  save_dataset(p.samples.string(), ds.samples);
  clicksim::save_sidecar(p.sidecar.string(), ds.sidecar);
  if (o.json) {
    std::cout << json{{"samples", ds.samples.size()}, {"vocab_sizes", ds.schema.vocab_sizes()}, {"dir", out_dir}}.dump()
              << "\n";
  } else {
    std::cout << "wrote " << ds.samples.size() << " samples to " << out_dir << "\n";
  }
  return 0;
}

int cmd_train(const CommonOptions& o, const std::string& data_dir, const std::string& checkpoint,
              const std::string& log_path) {
  const LoadedData d = load_data(data_dir);
  const RunConfig rc = resolve_config(o, &d.schema);
  const TrainResult r = train(d.samples, rc.model, [&](const EpochLog& e, const ParamRegistry&) {
    if (!o.json) {
      std::cerr << "epoch " << e.epoch << " L_util " << e.l_util << " L_info " << e.l_info << " val MAP@5 "
                << e.val_map5 << "\n";
    }
  });
  nn::save_checkpoint(checkpoint, r.params, config_hash(rc.model));
  if (!log_path.empty()) {
    std::ostringstream log;
    write_log_csv(log, r.log);
    write_text(log_path, log.str());
  }
  const EpochLog last = r.log.empty() ? EpochLog{} : r.log.back();
  if (o.json) {
    std::cout << json{{"checkpoint", checkpoint},
                      {"config_hash", config_hash(rc.model)},
                      {"epochs", r.log.size()},
                      {"L_util", last.l_util},
                      {"L_info", last.l_info}}
                     .dump()
              << "\n";
  } else {
    std::cout << "saved " << checkpoint << " after " << r.log.size() << " epochs\n";
  }
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& data_dir, const std::string& checkpoint,
             const std::string& protocol_name, const std::string& ks_text, const std::string& out_path) {
  const LoadedData d = load_data(data_dir);
  const RunConfig rc = resolve_config(o, &d.schema);
  ParamRegistry params = init_params(rc.model);
  nn::load_checkpoint(checkpoint, params, config_hash(rc.model));
  const Protocol protocol = parse_protocol(protocol_name);
  std::optional<clicksim::SynthSidecar> sidecar;
  if (protocol == Protocol::dcm) sidecar = clicksim::load_sidecar(DataPaths(data_dir).sidecar.string());
  const MetricsReport r =
      evaluate(d.samples, params, rc.model, protocol, parse_ks(ks_text, rc.model.M), sidecar ? &*sidecar : nullptr);
  std::ostringstream csv;
  write_report_csv(csv, r);
  write_text(out_path, csv.str());
  if (o.json) {
    std::cout << report_to_json(r).dump() << "\n";
  } else {
    std::cout << csv.str();
  }
  return 0;
}

int cmd_ablate(const CommonOptions& o, const std::string& data_dir, const std::string& out_path) {
  const LoadedData d = load_data(data_dir);
  const RunConfig rc = resolve_config(o, &d.schema);
  std::ostringstream csv;
  csv << "variant,MAP@5,NDCG@5,Click@5\n" << std::setprecision(6) << std::fixed;
  json rows = json::array();
  for (Variant v : all_variants()) {
    const ModelConfig cfg = make_variant(rc.model, v);
    TrainResult r = train(d.samples, cfg);
    const MetricsReport rep = evaluate(held_out(d.samples, r.split), r.params, cfg, Protocol::log_replay, {5});
    csv << to_string(v) << "," << rep.get("MAP", 5) << "," << rep.get("NDCG", 5) << "," << rep.get("Click", 5)
        << "\n";
    rows.push_back({{"variant", to_string(v)}, {"metrics", rep.values}});
  }
  write_text(out_path, csv.str());
  std::cout << (o.json ? rows.dump() + "\n" : csv.str());
  return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& data_dir, const std::string& param,
              const std::vector<double>& values, const std::string& out_path) {
  if (param != "beta" && param != "N") throw std::invalid_argument("--param must be beta or N");
  const LoadedData d = load_data(data_dir);
  const RunConfig rc = resolve_config(o, &d.schema);
  std::ostringstream csv;
  csv << param << ",MAP@5,NDCG@5,Click@5\n" << std::setprecision(6);
  json rows = json::array();
  for (double value : values) {
    ModelConfig cfg = rc.model;
    std::vector<Sample> data = d.samples;
    if (param == "beta") {
      cfg.beta = value;
      cfg = make_variant(cfg, cfg.variant);
    } else {
      if (value < 1 || value != std::floor(value)) throw std::invalid_argument("N values must be positive integers");
      cfg.N = static_cast<int>(value);
      for (Sample& s : data) s = restrict_history(s, static_cast<std::size_t>(cfg.N));
    }
    TrainResult r = train(data, cfg);
    const MetricsReport rep = evaluate(held_out(data, r.split), r.params, cfg, Protocol::log_replay, {5});
    csv << value << "," << rep.get("MAP", 5) << "," << rep.get("NDCG", 5) << "," << rep.get("Click", 5) << "\n";
    rows.push_back({{param, value}, {"metrics", rep.values}});
  }
  write_text(out_path, csv.str());
  std::cout << (o.json ? rows.dump() + "\n" : csv.str());
  return 0;
}

int cmd_gradcheck(const CommonOptions& o, double tolerance) {
  const RunConfig rc = resolve_config(o, nullptr);
  const auto cases = run_gradcheck_suite(rc.model, o.seed.value_or(1));
  double worst = 0;
  json rows = json::array();
  for (const auto& c : cases) {
    worst = std::max(worst, c.report.max_rel_err);
    rows.push_back({{"name", c.name}, {"max_rel_err", c.report.max_rel_err}, {"worst", c.report.worst}});
    if (!o.json) {
      std::cout << std::left << std::setw(26) << c.name << " " << std::scientific << std::setprecision(3)
                << c.report.max_rel_err << "\n";
    }
  }
  const bool ok = worst < tolerance;
  if (o.json) {
    std::cout << json{{"cases", rows}, {"max_rel_err", worst}, {"pass", ok}}.dump() << "\n";
  } else {
    std::cout << "max relative error " << std::scientific << worst << (ok ? " (ok)" : " (above tolerance)") << "\n";
  }
  return ok ? 0 : 1;
}

int cmd_simexport(const CommonOptions& o, const std::string& data_dir, const std::string& checkpoint,
                  std::size_t index, const std::string& out_path) {
  const LoadedData d = load_data(data_dir);
  const RunConfig rc = resolve_config(o, &d.schema);
  if (index >= d.samples.size()) throw std::out_of_range("sample index " + std::to_string(index) + " out of range");
  ParamRegistry params = init_params(rc.model);
  nn::load_checkpoint(checkpoint, params, config_hash(rc.model));
  const SimilarityGrid g = export_pattern_similarity(d.samples[index], params, rc.model);
  std::ostringstream csv;
  write_similarity_csv(csv, g);
  write_text(out_path, csv.str());
  std::cout << (o.json ? similarity_to_json(g).dump() + "\n" : csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"List-level hybrid-feedback re-ranking"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string data_dir, out, checkpoint, log_path, protocol = "log_replay", ks, param;
  std::vector<double> values;
  double tolerance = 1e-4;
  std::size_t index = 0;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic click dataset");
  add_common(synth, common);
  synth->add_option("-o,--out", out, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(train_cmd, common);
  train_cmd->add_option("-d,--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("-o,--out", checkpoint, "Checkpoint path")->required();
  train_cmd->add_option("--log", log_path, "Per-epoch CSV log path");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, common);
  eval_cmd->add_option("-d,--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("-k,--checkpoint", checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--protocol", protocol, "log_replay or dcm")->check(CLI::IsMember({"log_replay", "dcm"}));
  eval_cmd->add_option("--ks", ks, "Comma-separated cutoffs (default 5,10)");
  eval_cmd->add_option("-o,--out", out, "Report CSV path");

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every variant");
  add_common(ablate, common);
  ablate->add_option("-d,--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ablate->add_option("-o,--out", out, "Table CSV path");

  auto* sweep = app.add_subcommand("sweep", "Vary beta or N and report metrics");
  add_common(sweep, common);
  sweep->add_option("-d,--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--param", param, "beta or N")->required()->check(CLI::IsMember({"beta", "N"}));
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("-o,--out", out, "CSV path");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  add_common(gradcheck, common);
  gradcheck->add_option("--tol", tolerance, "Largest accepted relative error");

  auto* simexport = app.add_subcommand("simexport", "Pattern similarity grid of one sample");
  add_common(simexport, common);
  simexport->add_option("-d,--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  simexport->add_option("-k,--checkpoint", checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  simexport->add_option("--index", index, "Sample index");
  simexport->add_option("-o,--out", out, "CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(common, out);
    if (*train_cmd) return cmd_train(common, data_dir, checkpoint, log_path);
    if (*eval_cmd) return cmd_eval(common, data_dir, checkpoint, protocol, ks, out);
    if (*ablate) return cmd_ablate(common, data_dir, out);
    if (*sweep) return cmd_sweep(common, data_dir, param, values, out);
    if (*gradcheck) return cmd_gradcheck(common, tolerance);
    if (*simexport) return cmd_simexport(common, data_dir, checkpoint, index, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
