#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crosscast/candles.hpp"
#include "crosscast/dataset.hpp"
#include "crosscast/eval.hpp"
#include "crosscast/lstm.hpp"
#include "crosscast/mlr.hpp"
#include "crosscast/phase.hpp"

namespace crosscast::cli {

/// Everything a pipeline run needs; config-file keys mirror these fields and
/// command-line flags win over the file.
struct RunConfig {
  std::string store = "store";
  std::string input;
  std::string gap_policy = "reject";
  std::vector<std::string> features = all_feature_names();
  std::string model = "both";
  double train_fraction = 0.75;
  std::size_t horizon = kHorizon;
  double ridge = 0.0;
  std::string date;    // predict anchor, defaults to the last feature row
  std::string actual;  // evaluate ground-truth CSV, defaults to the candle artifact
  IndicatorConfig indicators;
  TrainConfig train;
};

namespace detail {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(what + " not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

inline std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(csv);
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

/// `key = value` lines, '#' comments. Unknown keys are an error so typos
/// fail loudly.
inline std::map<std::string, std::string> load_config_file(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_file(path, "config file"));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto strip = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(line_no) + ": expected key=value");
    kv[strip(stripped.substr(0, eq))] = strip(stripped.substr(eq + 1));
  }
  return kv;
}

inline void apply_config(const std::map<std::string, std::string>& kv, RunConfig& cfg,
                         bool& seed_from_config) {
  auto to_size = [](const std::string& k, const std::string& v) {
    try {
      return static_cast<std::size_t>(std::stoull(v));
    } catch (...) {
      throw Error("config key '" + k + "': bad integer '" + v + "'");
    }
  };
  auto to_double = [](const std::string& k, const std::string& v) {
    try {
      return std::stod(v);
    } catch (...) {
      throw Error("config key '" + k + "': bad number '" + v + "'");
    }
  };
  for (const auto& [key, value] : kv) {
    if (key == "store") cfg.store = value;
    else if (key == "input") cfg.input = value;
    else if (key == "gap_policy") cfg.gap_policy = value;
    else if (key == "features") cfg.features = split_list(value);
    else if (key == "model") cfg.model = value;
    else if (key == "train_fraction") cfg.train_fraction = to_double(key, value);
    else if (key == "horizon") cfg.horizon = to_size(key, value);
    else if (key == "ridge") cfg.ridge = to_double(key, value);
    else if (key == "date") cfg.date = value;
    else if (key == "actual") cfg.actual = value;
    else if (key == "epochs") cfg.train.epochs = to_size(key, value);
    else if (key == "seed") { cfg.train.seed = to_size(key, value); seed_from_config = true; }
    else if (key == "hidden") cfg.train.hidden_size = to_size(key, value);
    else if (key == "window") cfg.train.window_length = to_size(key, value);
    else if (key == "learning_rate") cfg.train.learning_rate = to_double(key, value);
    else if (key == "batch_size") cfg.train.batch_size = to_size(key, value);
    else if (key == "gradient_clip") cfg.train.gradient_clip = to_double(key, value);
    else if (key == "sma_short") cfg.indicators.sma_short = to_size(key, value);
    else if (key == "sma_long") cfg.indicators.sma_long = to_size(key, value);
    else if (key == "rsi_period") cfg.indicators.rsi_period = to_size(key, value);
    else if (key == "macd_fast") cfg.indicators.macd_fast = to_size(key, value);
    else if (key == "macd_slow") cfg.indicators.macd_slow = to_size(key, value);
    else if (key == "macd_signal") cfg.indicators.macd_signal = to_size(key, value);
    else if (key == "momentum_period") cfg.indicators.momentum_period = to_size(key, value);
    else if (key == "bb_period") cfg.indicators.bb_period = to_size(key, value);
    else if (key == "bb_k") cfg.indicators.bb_k = to_double(key, value);
    else if (key == "roc_period") cfg.indicators.roc_period = to_size(key, value);
    else throw Error("config key '" + key + "' is not recognized");
  }
}

inline fs::path artifact(const RunConfig& cfg, const std::string& name) {
  return fs::path(cfg.store) / name;
}

inline std::vector<std::string> requested_models(const RunConfig& cfg) {
  if (cfg.model == "both") return {"mlr", "lstm"};
  if (cfg.model == "mlr" || cfg.model == "lstm") return {cfg.model};
  throw Error("model must be mlr, lstm or both");
}

inline CandleSeries load_candle_artifact(const RunConfig& cfg) {
  return parse_candles(read_file(artifact(cfg, "candles.csv"), "candle artifact"));
}

inline FeatureTable load_feature_artifact(const RunConfig& cfg,
                                          std::span<const std::string> selected) {
  return feature_table_from_csv(read_file(artifact(cfg, "features.csv"), "features artifact"),
                                selected);
}

// ---- subcommands ----------------------------------------------------------

inline void cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  if (cfg.input.empty()) throw Error("ingest needs --in <csv>");
  GapPolicy policy;
  if (cfg.gap_policy == "reject") policy = GapPolicy::Reject;
  else if (cfg.gap_policy == "fill") policy = GapPolicy::ForwardFill;
  else throw Error("gap policy must be 'reject' or 'fill'");

  auto parsed = parse_candles(read_file(cfg.input, "input csv"));
  auto validated = validate_series(parsed, policy);
  write_file(artifact(cfg, "candles.csv"), to_csv(validated.series));
  out << "ingested " << validated.series.size() << " candles (" << validated.filled
      << " gap-filled)\n";
}

inline void cmd_features(const RunConfig& cfg, std::ostream& out) {
  auto candles = load_candle_artifact(cfg);
  write_file(artifact(cfg, "features.csv"), indicator_csv(candles, cfg.indicators));
  out << "wrote indicator table for " << candles.size() << " days\n";
}

inline void cmd_train(const RunConfig& cfg, std::ostream& out) {
  auto table = load_feature_artifact(cfg, cfg.features);
  auto ds = attach_targets(table, cfg.horizon);
  auto [train_ds, test_ds] = chrono_split(ds, cfg.train_fraction);
  auto scaler = fit_scaler(train_ds);
  auto train_scaled = apply_scaler(train_ds, scaler);
  auto test_scaled = apply_scaler(test_ds, scaler);
  write_file(artifact(cfg, "dataset.csv"), to_csv(ds));  // unscaled, for inspection
  write_file(artifact(cfg, "scaler.json"), scaler.to_json().dump(2) + "\n");
  out << "dataset: " << train_ds.rows() << " train rows, " << test_ds.rows() << " test rows, "
      << ds.x.cols() << " features\n";

  for (const auto& model : requested_models(cfg)) {
    if (model == "mlr") {
      auto bank = fit_bank(train_scaled, cfg.ridge);
      write_file(artifact(cfg, "model_mlr.json"), bank.to_json().dump(2) + "\n");
      auto pred = predict_bank(bank, test_scaled.x);
      out << "mlr: fitted " << bank.models.size() << " horizon models; test R2 by horizon:\n";
      for (std::size_t h = 0; h < bank.models.size(); ++h) {
        Vec truth(test_scaled.rows()), est(test_scaled.rows());
        for (std::size_t r = 0; r < test_scaled.rows(); ++r) {
          truth[r] = test_scaled.y(r, h);
          est[r] = pred(r, h);
        }
        out << "  h" << h << ' ';
        try {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.4f", r2_score(truth, est));
          out << buf << '\n';
        } catch (const std::invalid_argument&) {
          out << "n/a (constant target)\n";
        }
      }
    } else {
      TrainConfig tc = cfg.train;
      auto result = train(train_scaled, tc);
      write_file(artifact(cfg, "model_lstm.json"), to_json(result.params).dump(2) + "\n");
      write_file(artifact(cfg, "history_lstm.csv"), history_csv(result.history));
      out << "lstm: trained " << result.history.size() << " epochs";
      if (!result.history.empty()) out << ", final loss " << result.history.back();
      out << "\n";
    }
  }
}

inline void cmd_predict(const RunConfig& cfg, std::ostream& out) {
  std::vector<std::string> models;
  for (const auto& model : requested_models(cfg))
    if (fs::exists(artifact(cfg, "model_" + model + ".json"))) models.push_back(model);
  if (models.empty()) throw Error("model artifact not found; run train first");

  auto scaler = Scaler::from_json(
      nlohmann::json::parse(read_file(artifact(cfg, "scaler.json"), "scaler artifact")));

  for (const auto& model : models) {
    auto jmodel = nlohmann::json::parse(
        read_file(artifact(cfg, "model_" + model + ".json"), "model artifact"));
    std::vector<std::string> names = jmodel.at("feature_names").get<std::vector<std::string>>();
    auto table = load_feature_artifact(cfg, names);

    std::size_t anchor = table.rows() - 1;
    if (!cfg.date.empty()) {
      Date want = Date::parse(cfg.date);
      auto it = std::find(table.dates.begin(), table.dates.end(), want);
      if (it == table.dates.end())
        throw Error("date " + cfg.date + " is not a feature-table row");
      anchor = static_cast<std::size_t>(it - table.dates.begin());
    }

    Matrix scaled = scaler.transform(table.values);
    Vec closes;
    if (model == "mlr") {
      auto bank = MlrBank::from_json(jmodel);
      Matrix one(1, scaled.cols());
      for (std::size_t c = 0; c < scaled.cols(); ++c) one(0, c) = scaled(anchor, c);
      Matrix pred = predict_bank(bank, one);
      for (std::size_t h = 0; h < pred.cols(); ++h)
        closes.push_back(scaler.unscale_target(pred(0, h)));
    } else {
      auto params = lstm_params_from_json(jmodel);
      if (anchor + 1 < params.window_length)
        throw Error("date " + table.dates[anchor].to_string() + " has no full " +
                    std::to_string(params.window_length) + "-day window");
      Matrix window(params.window_length, scaled.cols());
      for (std::size_t t = 0; t < params.window_length; ++t)
        for (std::size_t c = 0; c < scaled.cols(); ++c)
          window(t, c) = scaled(anchor - params.window_length + 1 + t, c);
      auto [pred, tape] = forward(params, window);
      for (double v : pred) closes.push_back(scaler.unscale_target(v));
    }

    nlohmann::json jf = {{"schema_version", 1},
                         {"model", model},
                         {"anchor_date", table.dates[anchor].to_string()},
                         {"closes", closes}};
    write_file(artifact(cfg, "forecast_" + model + ".json"), jf.dump(2) + "\n");
    out << model << ": forecast " << closes.size() << " horizons from "
        << table.dates[anchor].to_string() << "\n";
  }
}

inline void cmd_detect(const RunConfig& cfg, std::ostream& out) {
  auto candles = load_candle_artifact(cfg);

  std::vector<std::string> models;
  for (const auto& model : requested_models(cfg))
    if (fs::exists(artifact(cfg, "forecast_" + model + ".json"))) models.push_back(model);
  if (models.empty()) throw Error("forecast artifact not found; run predict first");

  for (const auto& model : models) {
    auto jf = nlohmann::json::parse(
        read_file(artifact(cfg, "forecast_" + model + ".json"), "forecast artifact"));
    if (jf.value("schema_version", 0) != 1) throw Error("forecast: schema-version mismatch");
    Date anchor = Date::parse(jf.at("anchor_date").get<std::string>());
    auto closes = jf.at("closes").get<std::vector<double>>();

    CandleSeries history;
    for (const auto& c : candles.candles)
      if (c.date <= anchor) history.candles.push_back(c);
    if (history.empty() || history.candles.back().date != anchor)
      throw Error("anchor date " + anchor.to_string() + " is not in the candle artifact");

    auto report = build_report(history, closes, cfg.indicators);
    write_file(artifact(cfg, "report_" + model + ".json"), report.to_json().dump(2) + "\n");
    write_file(artifact(cfg, "report_" + model + ".csv"), report.to_csv());
    std::size_t advance = 0;
    for (const auto& e : report.events) advance += e.advance ? 1u : 0u;
    out << model << ": " << report.events.size() << " cross events (" << advance
        << " in the forecast window)\n";
  }
}

inline void cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  auto load_report = [&](const std::string& model) {
    auto path = artifact(cfg, "report_" + model + ".json");
    if (!fs::exists(path))
      throw Error("report artifact for " + model + " not found; run detect first");
    return PhaseReport::from_json(nlohmann::json::parse(read_file(path, "report artifact")));
  };
  auto mlr_report = load_report("mlr");
  auto lstm_report = load_report("lstm");

  CandleSeries truth;
  if (cfg.actual.empty()) {
    truth = load_candle_artifact(cfg);
  } else {
    truth = validate_series(parse_candles(read_file(cfg.actual, "actual csv")),
                            GapPolicy::Reject)
                .series;
  }

  CandleSeries slice;
  Date first = mlr_report.series.dates.front();
  Date last = mlr_report.series.dates.back();
  for (const auto& c : truth.candles)
    if (c.date >= first && c.date <= last) slice.candles.push_back(c);
  if (slice.size() != mlr_report.series.size())
    throw Error("date-range mismatch: actual closes do not cover " + first.to_string() + ".." +
                last.to_string());

  auto actual = actual_report(slice, cfg.indicators);
  auto summary = compare_models(mlr_report, lstm_report, actual);
  write_file(artifact(cfg, "metrics.json"), summary.to_json().dump(2) + "\n");
  out << summary.to_table();
}

}  // namespace detail

/// Parses and runs one invocation. Returns the process exit code; failures
/// produce a one-line diagnostic on `err`.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;

  try {
    // The config file seeds the defaults; flags parsed afterwards win.
    bool seed_set = false;
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      else if (args[i].starts_with("--config=")) path = args[i].substr(9);
      if (!path.empty()) {
        detail::apply_config(detail::load_config_file(path), cfg, seed_set);
        break;
      }
    }

    CLI::App app{"forecast daily closes and project golden/death crosses", "crosscast"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "key=value config file; flags override it");
    app.add_option("--store", cfg.store, "artifact directory");

    std::string features_csv;

    auto* ingest = app.add_subcommand("ingest", "parse and validate a candle csv");
    ingest->add_option("--in", cfg.input, "input OHLCV csv")->required();
    ingest->add_option("--gap-policy", cfg.gap_policy, "reject|fill")
        ->check(CLI::IsMember({"reject", "fill"}));

    auto* features = app.add_subcommand("features", "compute the indicator table");

    auto* train = app.add_subcommand("train", "fit models on the feature table");
    train->add_option("--model", cfg.model, "mlr|lstm|both")
        ->check(CLI::IsMember({"mlr", "lstm", "both"}));
    train->add_option("--epochs", cfg.train.epochs, "lstm training epochs");
    auto* seed_opt = train->add_option("--seed", cfg.train.seed, "rng seed");
    train->add_option("--hidden", cfg.train.hidden_size, "lstm hidden units");
    train->add_option("--window", cfg.train.window_length, "days of context per lstm sample");
    train->add_option("--features", features_csv, "comma-separated feature subset");
    train->add_option("--lr", cfg.train.learning_rate, "adam learning rate");
    train->add_option("--batch", cfg.train.batch_size, "mini-batch size");
    train->add_option("--clip", cfg.train.gradient_clip, "gradient L2 clip");
    train->add_option("--train-fraction", cfg.train_fraction, "chronological split fraction");
    train->add_option("--ridge", cfg.ridge, "L2 penalty for the mlr bank (extension)");

    auto* predict = app.add_subcommand("predict", "forecast from a trained model");
    predict->add_option("--date", cfg.date, "anchor date (default: last feature row)");
    predict->add_option("--model", cfg.model, "mlr|lstm|both")
        ->check(CLI::IsMember({"mlr", "lstm", "both"}));

    auto* detect = app.add_subcommand("detect", "splice the forecast and find crosses");
    detect->add_option("--model", cfg.model, "mlr|lstm|both")
        ->check(CLI::IsMember({"mlr", "lstm", "both"}));

    auto* evaluate = app.add_subcommand("evaluate", "compare model reports against actuals");
    evaluate->add_option("--actual", cfg.actual, "ground-truth candle csv");

    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {  // --help
        out << app.help();
        return 0;
      }
      err << "crosscast: " << e.what() << "\n";
      return 2;
    }

    if (!features_csv.empty()) cfg.features = detail::split_list(features_csv);
    // Seed precedence: flag, then config file, then CROSSCAST_SEED, then default.
    if (seed_opt->count() == 0 && !seed_set) {
      if (const char* env = std::getenv("CROSSCAST_SEED")) {
        try {
          cfg.train.seed = std::stoull(env);
        } catch (...) {
          throw Error("CROSSCAST_SEED is not an integer");
        }
      }
    }

    if (ingest->parsed()) detail::cmd_ingest(cfg, out);
    else if (features->parsed()) detail::cmd_features(cfg, out);
    else if (train->parsed()) detail::cmd_train(cfg, out);
    else if (predict->parsed()) detail::cmd_predict(cfg, out);
    else if (detect->parsed()) detail::cmd_detect(cfg, out);
    else if (evaluate->parsed()) detail::cmd_evaluate(cfg, out);
    return 0;
  } catch (const std::exception& e) {
    err << "crosscast: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace crosscast::cli
