// Acceptance suite: one criterion per function, one pass/fail line each.
// Every tolerance is pinned here; a criterion also fails if it exceeds its
// runtime budget.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crosscast/cli.hpp"
#include "crosscast/crosscast.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace crosscast;

namespace {

struct Failure {
  std::string reason;
};

void require(bool ok, const std::string& reason) {
  if (!ok) throw Failure{reason};
}

std::mt19937_64 g_gen(20240811);

std::vector<double> random_closes(std::size_t n, double lo = 50.0, double hi = 150.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> xs(n);
  for (double& x : xs) x = dist(g_gen);
  return xs;
}

void match_series(const IndicatorSeries& got, const std::vector<double>& want, double tol,
                  const char* what) {
  require(got.size() == want.size(), std::string(what) + ": length mismatch");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (std::isnan(want[i])) {
      require(!got.defined(i), std::string(what) + ": defined too early at " + std::to_string(i));
    } else {
      require(got.defined(i), std::string(what) + ": undefined at " + std::to_string(i));
      require(std::abs(got.values[i] - want[i]) <= tol,
              std::string(what) + ": off by " + std::to_string(got.values[i] - want[i]) +
                  " at index " + std::to_string(i));
    }
  }
}

CandleSeries walk_series(std::size_t days, std::uint64_t seed, double start_price = 100.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> step(-1.5, 1.7);
  std::uniform_real_distribution<double> spread(0.0, 1.2);
  std::uniform_real_distribution<double> vol(100.0, 900.0);
  CandleSeries s;
  Date d = Date::parse("2020-01-01");
  double close = start_price;
  for (std::size_t i = 0; i < days; ++i) {
    double open = close;  // previous close
    close = std::max(20.0, close + step(gen));
    Candle c;
    c.date = d + static_cast<int>(i);
    c.open = open;
    c.close = close;
    c.high = std::max(open, close) + spread(gen);
    c.low = std::max(1.0, std::min(open, close) - spread(gen));
    c.volume = vol(gen);
    s.candles.push_back(c);
  }
  return s;
}

// 1. Every indicator matches its naive per-window oracle within 1e-9.
void criterion_indicator_oracles() {
  for (int rep = 0; rep < 100; ++rep) {
    auto xs = random_closes(500);
    match_series(sma(xs, 50), oracle::sma(xs, 50), 1e-9, "sma");
    match_series(ema(xs, 26), oracle::ema(xs, 26), 1e-9, "ema");
    match_series(rsi(xs, 14), oracle::rsi(xs, 14), 1e-9, "rsi");
    auto m = macd(xs, 12, 26, 9);
    auto mo = oracle::macd(xs, 12, 26, 9);
    match_series(m.macd_line, mo.line, 1e-9, "macd line");
    match_series(m.signal_line, mo.signal, 1e-9, "macd signal");
    match_series(m.histogram, mo.histogram, 1e-9, "macd histogram");
    match_series(momentum(xs, 10), oracle::momentum(xs, 10), 1e-9, "momentum");
    auto b = bollinger(xs, 20, 2.0);
    auto bo = oracle::bollinger(xs, 20, 2.0);
    match_series(b.middle, bo.middle, 1e-9, "bb middle");
    match_series(b.upper, bo.upper, 1e-9, "bb upper");
    match_series(b.lower, bo.lower, 1e-9, "bb lower");
    match_series(roc(xs, 10), oracle::roc(xs, 10), 1e-9, "roc");
  }
}

// 2. First defined index equals the analytic warmup on random configs.
void criterion_warmup() {
  std::uniform_int_distribution<std::size_t> rsi_p(2, 30), fast_p(2, 15), extra(1, 25),
      signal_p(2, 15), mom_p(1, 30), bb_p(2, 40), roc_p(1, 30);
  std::uniform_real_distribution<double> kdist(0.5, 3.0);
  for (int rep = 0; rep < 20; ++rep) {
    IndicatorConfig cfg;
    cfg.rsi_period = rsi_p(g_gen);
    cfg.macd_fast = fast_p(g_gen);
    cfg.macd_slow = cfg.macd_fast + extra(g_gen);
    cfg.macd_signal = signal_p(g_gen);
    cfg.momentum_period = mom_p(g_gen);
    cfg.bb_period = bb_p(g_gen);
    cfg.bb_k = kdist(g_gen);
    cfg.roc_period = roc_p(g_gen);

    auto xs = random_closes(400);
    require(rsi(xs, cfg.rsi_period).first_defined == cfg.rsi_period, "rsi warmup");
    auto m = macd(xs, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal);
    require(m.macd_line.first_defined == cfg.macd_slow - 1, "macd line warmup");
    require(m.signal_line.first_defined == cfg.macd_slow + cfg.macd_signal - 2,
            "macd signal warmup");
    require(momentum(xs, cfg.momentum_period).first_defined == cfg.momentum_period,
            "momentum warmup");
    auto b = bollinger(xs, cfg.bb_period, cfg.bb_k);
    require(b.upper.first_defined == cfg.bb_period - 1, "bollinger warmup");
    require(roc(xs, cfg.roc_period).first_defined == cfg.roc_period, "roc warmup");
    require(sma(xs, 50).first_defined == 49, "sma warmup");

    // the feature table drops exactly the max-warmup prefix
    CandleSeries series = walk_series(400, 1000 + static_cast<std::uint64_t>(rep));
    auto names = all_feature_names();
    auto table = build_features(series, cfg, names);
    std::size_t want = std::max({cfg.rsi_period, cfg.macd_slow - 1,
                                 cfg.macd_slow + cfg.macd_signal - 2, cfg.momentum_period,
                                 cfg.bb_period - 1, cfg.roc_period});
    require(table.rows() == 400 - want, "feature table row count");
    require(table.dates.front() == series[want].date, "feature table first row");
  }
}

// 3. Planted linear data is recovered; residuals orthogonal; bank size 22.
void criterion_ols() {
  std::normal_distribution<double> n01;
  Matrix x(200, 5);
  for (double& v : x.data()) v = n01(g_gen);
  const Vec beta{0.5, -1.2, 2.0, 0.7, -0.3};
  const double beta0 = 0.25;
  Vec y(200);
  for (std::size_t r = 0; r < 200; ++r) {
    double v = beta0;
    for (std::size_t c = 0; c < 5; ++c) v += beta[c] * x(r, c);
    y[r] = v;
  }
  auto model = fit_ols(x, y);
  require(std::abs(model.intercept - beta0) <= 1e-8 * std::abs(beta0), "intercept recovery");
  for (std::size_t c = 0; c < 5; ++c)
    require(std::abs(model.coefficients[c] - beta[c]) <= 1e-8 * std::abs(beta[c]),
            "coefficient recovery at " + std::to_string(c));

  double y_norm = 0.0;
  for (double v : y) y_norm += v * v;
  y_norm = std::sqrt(y_norm);
  Vec resid(200);
  Vec pred(200);
  for (std::size_t r = 0; r < 200; ++r) {
    pred[r] = model.predict(x.row(r));
    resid[r] = y[r] - pred[r];
  }
  double max_dot = 0.0;
  for (std::size_t c = 0; c < 5; ++c) {
    double dot = 0.0;
    for (std::size_t r = 0; r < 200; ++r) dot += x(r, c) * resid[r];
    max_dot = std::max(max_dot, std::abs(dot));
  }
  require(max_dot < 1e-8 * y_norm, "residual orthogonality");
  require(std::abs(r2_score(y, pred) - 1.0) <= 1e-10, "r2 of a perfect fit");

  Dataset ds;
  ds.feature_names = {"a", "b", "c", "d", "e"};
  ds.x = x;
  ds.y = Matrix(200, 22);
  Date d0 = Date::parse("2020-01-01");
  for (std::size_t r = 0; r < 200; ++r) {
    ds.dates.push_back(d0 + static_cast<int>(r));
    for (std::size_t h = 0; h < 22; ++h) ds.y(r, h) = y[r];
  }
  auto bank = fit_bank(ds);
  require(bank.models.size() == 22, "bank must hold exactly 22 models");
}

// 4. BPTT gradients match central finite differences coordinate by coordinate.
void criterion_gradient_check() {
  TrainConfig cfg;
  cfg.hidden_size = 3;
  cfg.window_length = 4;
  auto p = init_params(77, 2, cfg, 22);

  std::normal_distribution<double> n01;
  std::vector<Sample> batch(3);
  for (auto& s : batch) {
    s.window = Matrix(4, 2);
    for (double& v : s.window.data()) v = n01(g_gen);
    s.target.resize(22);
    for (double& t : s.target) t = std::abs(n01(g_gen));
  }

  auto [loss, grads] = loss_and_gradients(p, batch);
  auto gs = grads.tensors();
  auto ps = p.tensors();
  const double eps = 1e-5;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    for (std::size_t j = 0; j < ps[k].size(); ++j) {
      LstmParams plus = p, minus = p;
      plus.tensors()[k][j] += eps;
      minus.tensors()[k][j] -= eps;
      double numeric = (loss_and_gradients(plus, batch).first -
                        loss_and_gradients(minus, batch).first) /
                       (2.0 * eps);
      double analytic = gs[k][j];
      double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      require(std::abs(numeric - analytic) / denom < 1e-4,
              "gradient mismatch in tensor " + std::to_string(k) + " coordinate " +
                  std::to_string(j));
    }
  }
}

// 5. The cell reproduces a hand-unrolled second implementation to 1e-12.
void criterion_cell_conformance() {
  std::normal_distribution<double> n01;
  TrainConfig cfg;
  cfg.hidden_size = 2;
  for (int rep = 0; rep < 1000; ++rep) {
    auto p = init_params(static_cast<std::uint64_t>(rep), 3, cfg, 22);
    for (auto span : p.tensors())
      for (double& v : span) v = n01(g_gen);
    CellState prev{Vec{n01(g_gen), n01(g_gen)}, Vec{n01(g_gen), n01(g_gen)}};
    Vec x{n01(g_gen), n01(g_gen), n01(g_gen)};
    auto [state, tape] = cell_forward(p, x, prev);

    std::vector<std::vector<double>> wf(2, std::vector<double>(5)), wi = wf, wc = wf, wo = wf;
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 5; ++c) {
        wf[r][c] = p.w_f(r, c);
        wi[r][c] = p.w_i(r, c);
        wc[r][c] = p.w_c(r, c);
        wo[r][c] = p.w_o(r, c);
      }
    auto want = oracle::lstm_cell(wf, p.b_f, wi, p.b_i, wc, p.b_c, wo, p.b_o, prev.h, prev.c, x);
    for (std::size_t j = 0; j < 2; ++j) {
      require(std::abs(state.c[j] - want.c[j]) <= 1e-12, "cell state mismatch");
      require(std::abs(state.h[j] - want.h[j]) <= 1e-12, "cell output mismatch");
      require(tape.f[j] > 0.0 && tape.f[j] < 1.0, "forget gate out of (0,1)");
      require(tape.i[j] > 0.0 && tape.i[j] < 1.0, "input gate out of (0,1)");
      require(tape.o[j] > 0.0 && tape.o[j] < 1.0, "output gate out of (0,1)");
      require(std::abs(state.h[j]) <= 1.0, "|h| must stay <= 1");
    }
  }
}

// 6. The net can overfit a 500-day sine series within 2000 epochs.
void criterion_capacity() {
  Dataset ds;
  ds.feature_names = {"close"};
  Date d = Date::parse("2019-01-01");
  const std::size_t days = 500;
  std::vector<double> closes(days);
  for (std::size_t i = 0; i < days; ++i)
    closes[i] = 100.0 + 40.0 * std::sin(2.0 * 3.14159265358979 * static_cast<double>(i) / 60.0);
  const std::size_t rows = days - kHorizon;
  ds.x = Matrix(rows, 1);
  ds.y = Matrix(rows, kOutputs);
  for (std::size_t r = 0; r < rows; ++r) {
    ds.dates.push_back(d + static_cast<int>(r));
    ds.x(r, 0) = closes[r];
    for (std::size_t h = 0; h <= kHorizon; ++h) ds.y(r, h) = closes[r + h];
  }
  auto scaler = fit_scaler(ds);
  auto scaled = apply_scaler(ds, scaler);

  TrainConfig cfg;
  cfg.window_length = 30;
  cfg.hidden_size = 7;
  cfg.epochs = 2000;
  cfg.learning_rate = 3e-3;
  cfg.seed = 7;
  auto result = train(scaled, cfg);
  require(result.history.size() == 2000, "expected 2000 epochs of history");
  require(result.history.back() < 1e-3,
          "training MSE " + std::to_string(result.history.back()) + " not below 1e-3");
  require(result.history[1999] <= result.history[199],
          "loss at epoch 2000 must not exceed loss at epoch 200");
}

// 7. Targets equal the raw close h days ahead; split keeps the latest block.
void criterion_dataset_integrity() {
  auto series = walk_series(280, 42);
  auto names = all_feature_names();
  auto table = build_features(series, IndicatorConfig{}, names);
  auto ds = attach_targets(table, 21);
  require(ds.rows() == table.rows() - 21, "exactly the last 21 rows must be dropped");
  for (std::size_t r = 0; r < ds.rows(); ++r)
    for (std::size_t h = 0; h <= 21; ++h) {
      Date want = ds.dates[r] + static_cast<int>(h);
      std::size_t idx = static_cast<std::size_t>(want - series[0].date);
      require(series[idx].date == want, "date arithmetic");
      require(ds.y(r, h) == series[idx].close, "Y[i][h] must equal close at date+h");
    }

  auto [train_ds, test_ds] = chrono_split(ds, 0.75);
  require(train_ds.rows() ==
              static_cast<std::size_t>(std::floor(0.75 * static_cast<double>(ds.rows()))),
          "train size follows the floor rule");
  require(train_ds.rows() + test_ds.rows() == ds.rows(), "split partitions the rows");
  require(train_ds.dates.back() < test_ds.dates.front(), "train precedes test");
  require(test_ds.dates.back() == ds.dates.back(), "test is the latest block");
}

// 8. detect_crosses equals the brute-force sign scan, events alternate.
void criterion_cross_equivalence() {
  std::normal_distribution<double> step(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> tie_len(2, 12);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 300;
    std::vector<double> a(n), b(n);
    double xa = 100.0, xb = 100.0;
    for (std::size_t i = 0; i < n; ++i) {
      xa += step(g_gen);
      xb += 0.9 * step(g_gen);
      a[i] = xa;
      b[i] = xb;
    }
    for (std::size_t i = 0; i < n;) {
      if (coin(g_gen) < 0.06) {
        std::size_t len = static_cast<std::size_t>(tie_len(g_gen));
        for (std::size_t k = i; k < std::min(n, i + len); ++k) b[k] = a[k];
        i += len;
      } else {
        ++i;
      }
    }
    IndicatorSeries sa, sb;
    sa.values = a;
    sa.first_defined = 0;
    sb.values = b;
    sb.first_defined = 0;
    auto got = detect_crosses(sa, sb);
    auto want = oracle::cross_scan(a, b, 0);
    require(got.size() == want.size(), "event count differs from the oracle");
    for (std::size_t i = 0; i < got.size(); ++i) {
      require(got[i].index == want[i].first, "event index differs from the oracle");
      require((got[i].kind == CrossKind::Golden) ==
                  (want[i].second == oracle::CrossKindOracle::Golden),
              "event kind differs from the oracle");
      if (i > 0) require(got[i].kind != got[i - 1].kind, "events must alternate");
    }
  }
}

// 9. A rising forecast spliced onto a flat history yields exactly one golden
//    cross flagged as advance detection, through the CLI pipeline.
void criterion_advance_detection() {
  CandleSeries history;
  Date d = Date::parse("2020-01-01");
  for (int i = 0; i < 250; ++i) {
    double close = i < 190 ? 100.0 : 100.0 - 0.1 * static_cast<double>(i - 190);
    Candle c;
    c.date = d + i;
    c.open = c.high = c.low = c.close = close;
    c.volume = 1.0;
    history.candles.push_back(c);
  }
  std::vector<double> forecast(22);
  double last = history.candles.back().close;
  for (std::size_t h = 0; h < 22; ++h) forecast[h] = last + 2.5 * static_cast<double>(h);

  fs::path store = fs::temp_directory_path() / "crosscast_acceptance_advance";
  fs::remove_all(store);
  fs::create_directories(store);
  {
    std::ofstream out(store / "candles.csv", std::ios::binary);
    out << to_csv(history);
    nlohmann::json jf = {{"schema_version", 1},
                         {"model", "mlr"},
                         {"anchor_date", history.candles.back().date.to_string()},
                         {"closes", forecast}};
    std::ofstream fout(store / "forecast_mlr.json", std::ios::binary);
    fout << jf.dump(2) << "\n";
  }
  std::ostringstream out, err;
  int code = cli::run_cli({"detect", "--store", store.string()}, out, err);
  require(code == 0, "detect failed: " + err.str());

  std::ifstream in(store / "report_mlr.json", std::ios::binary);
  require(in.good(), "report artifact missing");
  auto report = PhaseReport::from_json(nlohmann::json::parse(in));
  require(report.events.size() == 1,
          "expected exactly one event, got " + std::to_string(report.events.size()));
  require(report.events[0].kind == CrossKind::Golden, "event must be a golden cross");
  require(report.events[0].advance, "event must fall in the predicted region");
  require(report.events[0].index >= 250, "event must lie beyond the actual days");
  fs::remove_all(store);
}

// 10. Two identical pipeline runs produce byte-identical artifacts.
void criterion_determinism() {
  auto fixture = walk_series(300, 99);
  fs::path base = fs::temp_directory_path() / "crosscast_acceptance_determinism";
  fs::remove_all(base);
  fs::create_directories(base);
  {
    std::ofstream out(base / "input.csv", std::ios::binary);
    out << to_csv(fixture);
  }

  auto run_pipeline = [&](const std::string& store) {
    auto invoke = [&](std::vector<std::string> args) {
      std::ostringstream out, err;
      int code = cli::run_cli(std::move(args), out, err);
      require(code == 0, "pipeline step failed: " + err.str());
    };
    invoke({"ingest", "--in", (base / "input.csv").string(), "--store", store});
    invoke({"features", "--store", store});
    invoke({"train", "--model", "both", "--epochs", "40", "--seed", "11", "--store", store});
    invoke({"predict", "--store", store});
    invoke({"detect", "--store", store});
  };
  run_pipeline((base / "a").string());
  run_pipeline((base / "b").string());

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  for (const char* name :
       {"candles.csv", "features.csv", "dataset.csv", "scaler.json", "model_mlr.json",
        "model_lstm.json", "history_lstm.csv", "forecast_mlr.json", "forecast_lstm.json",
        "report_mlr.json", "report_lstm.json", "report_mlr.csv", "report_lstm.csv"}) {
    auto a = slurp(base / "a" / name);
    auto b = slurp(base / "b" / name);
    require(!a.empty(), std::string(name) + " missing in run a");
    require(a == b, std::string(name) + " differs between identical runs");
  }
  fs::remove_all(base);
}

// 11. Curve-metric identities.
void criterion_comparison_machinery() {
  std::normal_distribution<double> step(0.0, 1.0);
  IndicatorSeries a;
  a.first_defined = 0;
  double x = 100.0;
  for (int i = 0; i < 150; ++i) {
    x += step(g_gen);
    a.values.push_back(x);
  }
  auto self = curve_metrics(a, a);
  require(self.rmse == 0.0, "identity rmse must be 0");
  require(self.pearson_r.has_value() && std::abs(*self.pearson_r - 1.0) <= 1e-12,
          "identity pearson must be 1");
  require(self.slope_agreement == 1.0, "identity slope agreement must be 1");

  auto b = a;
  for (double& v : b.values) v += 100.0;
  auto offset = curve_metrics(a, b);
  require(std::abs(offset.rmse - 100.0) <= 1e-9, "offset rmse must equal the offset");
  require(offset.pearson_r.has_value() && std::abs(*offset.pearson_r - 1.0) <= 1e-12,
          "offset pearson must be 1");
  require(offset.slope_agreement == 1.0, "offset slope agreement must be 1");
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "indicator oracle equivalence", 5.0, criterion_indicator_oracles},
      {2, "warmup correctness", 1.0, criterion_warmup},
      {3, "ols recovery", 1.0, criterion_ols},
      {4, "lstm gradient check", 10.0, criterion_gradient_check},
      {5, "lstm cell conformance", 2.0, criterion_cell_conformance},
      {6, "capacity overfit check", 180.0, criterion_capacity},
      {7, "dataset integrity", 1.0, criterion_dataset_integrity},
      {8, "cross-detection equivalence", 2.0, criterion_cross_equivalence},
      {9, "advance detection end to end", 5.0, criterion_advance_detection},
      {10, "pipeline determinism", 300.0, criterion_determinism},
      {11, "comparison machinery", 1.0, criterion_comparison_machinery},
  };

  // Optional criterion ids on the command line restrict the run.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  int failures = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    auto start = std::chrono::steady_clock::now();
    std::string reason;
    bool ok = true;
    try {
      c.run();
    } catch (const Failure& f) {
      ok = false;
      reason = f.reason;
    } catch (const std::exception& e) {
      ok = false;
      reason = e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && elapsed > c.limit_seconds) {
      ok = false;
      reason = "runtime over budget";
    }
    std::printf("[%s] %2d %-32s %7.2fs (limit %.0fs)%s%s\n", ok ? "PASS" : "FAIL", c.id, c.name,
                elapsed, c.limit_seconds, reason.empty() ? "" : " - ", reason.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("%d/%d acceptance criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
