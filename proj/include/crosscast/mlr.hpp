#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crosscast/dataset.hpp"
#include "crosscast/linalg.hpp"

namespace crosscast {

/// One ordinary-least-squares model: y ≈ β₀ + Σ βⱼ·xⱼ.
struct LinearModel {
  double intercept = 0.0;
  std::vector<double> coefficients;
  double residual_variance = 0.0;

  double predict(std::span<const double> x) const {
    double y = intercept;
    for (std::size_t j = 0; j < coefficients.size(); ++j) y += coefficients[j] * x[j];
    return y;
  }
};

/// Least-squares fit via QR on the intercept-augmented design. Normal
/// equations are avoided: they square the condition number, and the feature
/// set here is highly collinear. `ridge` > 0 switches on an L2 penalty on
/// the non-intercept coefficients (extension, off by default).
inline LinearModel fit_ols(const Matrix& x, std::span<const double> y, double ridge = 0.0) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (y.size() != n) throw std::invalid_argument("fit_ols: row count mismatch");
  if (n <= p + 1) throw std::invalid_argument("fit_ols: need rows > cols + 1");
  if (ridge < 0.0) throw std::invalid_argument("fit_ols: ridge must be >= 0");

  const std::size_t extra = ridge > 0.0 ? p : 0;
  Matrix design(n + extra, p + 1);
  Vec rhs(n + extra, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    design(r, 0) = 1.0;
    for (std::size_t c = 0; c < p; ++c) design(r, c + 1) = x(r, c);
    rhs[r] = y[r];
  }
  // Ridge as sqrt(λ)·I rows appended below the data; the intercept stays
  // unpenalized.
  for (std::size_t c = 0; c < extra; ++c) design(n + c, c + 1) = std::sqrt(ridge);

  Vec beta;
  try {
    beta = solve_least_squares(std::move(design), std::move(rhs));
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " (column 0 is the intercept, column j is feature j-1)");
  }

  LinearModel model;
  model.intercept = beta[0];
  model.coefficients.assign(beta.begin() + 1, beta.end());
  double rss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double resid = y[r] - model.predict(x.row(r));
    rss += resid * resid;
  }
  model.residual_variance = rss / static_cast<double>(n - p - 1);
  return model;
}

/// One independent model per target horizon, all sharing a feature list.
struct MlrBank {
  std::vector<std::string> feature_names;
  std::vector<LinearModel> models;  ///< indexed by horizon

  nlohmann::json to_json() const {
    nlohmann::json jmodels = nlohmann::json::array();
    for (std::size_t h = 0; h < models.size(); ++h)
      jmodels.push_back({{"horizon", h},
                         {"intercept", models[h].intercept},
                         {"coefficients", models[h].coefficients},
                         {"residual_variance", models[h].residual_variance}});
    return {{"schema_version", 1},
            {"kind", "mlr"},
            {"feature_names", feature_names},
            {"models", jmodels}};
  }

  static MlrBank from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != 1) throw Error("mlr bank: schema-version mismatch");
    if (j.value("kind", "") != "mlr") throw Error("mlr bank: wrong artifact kind");
    MlrBank bank;
    bank.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& jm : j.at("models")) {
      LinearModel m;
      m.intercept = jm.at("intercept").get<double>();
      m.coefficients = jm.at("coefficients").get<std::vector<double>>();
      m.residual_variance = jm.at("residual_variance").get<double>();
      if (m.coefficients.size() != bank.feature_names.size())
        throw Error("mlr bank: coefficient/feature count mismatch");
      bank.models.push_back(std::move(m));
    }
    return bank;
  }
};

/// Fits one model per target column of a scaled training set.
inline MlrBank fit_bank(const Dataset& train, double ridge = 0.0) {
  if (train.rows() == 0) throw std::invalid_argument("fit_bank: empty training set");
  MlrBank bank;
  bank.feature_names = train.feature_names;
  bank.models.reserve(train.horizons());
  for (std::size_t h = 0; h < train.horizons(); ++h) {
    Vec target(train.rows());
    for (std::size_t r = 0; r < train.rows(); ++r) target[r] = train.y(r, h);
    try {
      bank.models.push_back(fit_ols(train.x, target, ridge));
    } catch (const Error& e) {
      throw Error("horizon " + std::to_string(h) + ": " + e.what());
    }
  }
  return bank;
}

/// Row i, column h = prediction of the horizon-h model on X.row(i).
inline Matrix predict_bank(const MlrBank& bank, const Matrix& x) {
  if (x.cols() != bank.feature_names.size())
    throw std::invalid_argument("predict_bank: feature count mismatch");
  Matrix out(x.rows(), bank.models.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t h = 0; h < bank.models.size(); ++h)
      out(r, h) = bank.models[h].predict(x.row(r));
  return out;
}

/// Coefficient of determination, 1 − RSS/TSS. Reported per horizon and kept
/// out of the accuracy verdict: the collinear feature set makes it flatter
/// than it looks.
inline double r2_score(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("r2_score: length mismatch");
  if (y_true.size() < 2) throw std::invalid_argument("r2_score: need at least 2 points");
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= static_cast<double>(y_true.size());
  double rss = 0.0, tss = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    rss += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    tss += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (tss == 0.0) throw std::invalid_argument("r2_score: y_true is constant");
  return 1.0 - rss / tss;
}

}  // namespace crosscast
