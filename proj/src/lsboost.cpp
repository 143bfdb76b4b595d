#include "macrocast/lsboost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"
#include "macrocast/errors.hpp"

namespace macrocast {

void LagFeatureConfig::validate() const {
  if (lags.empty()) throw InvalidArgument("lag list is empty");
  std::set<int> seen;
  for (int l : lags) {
    if (l < 1) throw InvalidArgument("lags must be positive");
    if (!seen.insert(l).second) throw InvalidArgument("duplicate lag " + std::to_string(l));
  }
}

int LagFeatureConfig::max_lag() const { return lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end()); }

Eigen::VectorXd lag_features(const Eigen::Ref<const Eigen::VectorXd>& values, Eigen::Index t, Period start,
                             const LagFeatureConfig& cfg) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(cfg.width());
  Eigen::Index k = 0;
  for (int l : cfg.lags) row[k++] = values[t - l];
  if (cfg.include_seasonal_dummies) {
    const int q = start.shifted(t).quarter;
    if (q > 1) row[k + q - 2] = 1.0;
  }
  return row;
}

SupervisedData make_supervised(const TimeSeries& history, const LagFeatureConfig& cfg) {
  cfg.validate();
  const int L = cfg.max_lag();
  if (history.size() <= L)
    throw InvalidArgument("history of length " + std::to_string(history.size()) + " is too short for lag " +
                          std::to_string(L));
  const Eigen::Index rows = history.size() - L;
  SupervisedData out;
  out.X.resize(rows, cfg.width());
  out.y.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index t = i + L;
    out.X.row(i) = lag_features(history.values(), t, history.start(), cfg).transpose();
    out.y[i] = history[t];
    out.targets.push_back(history.period(t));
  }
  return out;
}

namespace {

// Exhaustive best split against residuals; features scanned in index order,
// thresholds ascending, replaced only on strict improvement.
Stump best_stump(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<std::vector<Eigen::Index>>& order,
                 const Eigen::VectorXd& resid) {
  const Eigen::Index n = X.rows();
  const double total = resid.sum();
  Stump best;
  best.threshold = std::numeric_limits<double>::infinity();
  best.left_value = best.right_value = total / static_cast<double>(n);
  double best_score = total * total / static_cast<double>(n);  // no-split score
  bool found = false;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto& idx = order[static_cast<std::size_t>(j)];
    double left_sum = 0.0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      left_sum += resid[idx[i]];
      const double a = X(idx[i], j), b = X(idx[i + 1], j);
      if (!(a < b)) continue;
      const double nl = static_cast<double>(i + 1), nr = static_cast<double>(n - i - 1);
      const double right_sum = total - left_sum;
      const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
      if (!found || score > best_score) {
        found = true;
        best_score = score;
        double thr = a + (b - a) / 2.0;
        if (!(thr < b)) thr = a;
        best.feature_index = static_cast<int>(j);
        best.threshold = thr;
        best.left_value = left_sum / nl;
        best.right_value = right_sum / nr;
      }
    }
  }
  return best;
}

}  // namespace

BoostModel fit_lsboost(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                       int n_stages, double shrinkage) {
  if (n_stages < 1) throw InvalidArgument("number of boosting stages must be >= 1");
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw InvalidArgument("shrinkage must lie in (0, 1]");
  if (X.rows() != y.size()) throw InvalidArgument("X rows and y length differ");
  if (y.size() < 4) throw InvalidArgument("LSBoost needs at least 4 training rows");

  const Eigen::Index n = y.size();
  BoostModel model;
  model.f0 = y.mean();
  model.shrinkage = shrinkage;
  model.n_stages = n_stages;
  model.n_features = X.cols();

  std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    auto& idx = order[static_cast<std::size_t>(j)];
    idx.resize(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return X(a, j) < X(b, j); });
  }

  Eigen::VectorXd F = Eigen::VectorXd::Constant(n, model.f0);
  Eigen::VectorXd resid = y - F;
  model.training_mse.push_back(resid.squaredNorm() / static_cast<double>(n));
  for (int m = 0; m < n_stages; ++m) {
    const Stump h = best_stump(X, order, resid);
    model.stages.push_back(BoostStage{1.0, h});
    for (Eigen::Index i = 0; i < n; ++i) F[i] += shrinkage * h(X.row(i).transpose());
    resid = y - F;
    model.training_mse.push_back(resid.squaredNorm() / static_cast<double>(n));
  }
  return model;
}

double predict_lsboost(const BoostModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.n_features)
    throw InvalidArgument("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                          std::to_string(model.n_features));
  double f = model.f0;
  for (const auto& s : model.stages) f += model.shrinkage * s.rho * s.learner(x);
  return f;
}

Eigen::VectorXd lsboost_forecast(const BoostModel& model, const TimeSeries& history, const LagFeatureConfig& cfg,
                                 int horizon) {
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (history.size() < cfg.max_lag()) throw InvalidArgument("history too short for the lag configuration");
  const Eigen::Index n = history.size();
  Eigen::VectorXd ext(n + horizon);
  ext.head(n) = history.values();
  for (int h = 0; h < horizon; ++h) {
    const Eigen::Index t = n + h;
    ext[t] = predict_lsboost(model, lag_features(ext.head(t + 1), t, history.start(), cfg));
  }
  return ext.tail(horizon);
}

Eigen::VectorXd lsboost_forecast(const TimeSeries& history, const LsBoostOptions& options, int horizon) {
  const auto data = make_supervised(history, options.features);
  const auto model = fit_lsboost(data.X, data.y, options.n_stages, options.shrinkage);
  return lsboost_forecast(model, history, options.features, horizon);
}

std::string lsboost_to_json(const BoostModel& model) {
  nlohmann::json j;
  j["format"] = "macrocast.lsboost";
  j["version"] = 1;
  j["f0"] = model.f0;
  j["shrinkage"] = model.shrinkage;
  j["n_stages"] = model.n_stages;
  j["n_features"] = model.n_features;
  auto& stages = j["stages"] = nlohmann::json::array();
  for (const auto& s : model.stages) {
    nlohmann::json st;
    st["rho"] = s.rho;
    st["feature"] = s.learner.feature_index;
    st["threshold"] = std::isfinite(s.learner.threshold) ? nlohmann::json(s.learner.threshold) : nlohmann::json(nullptr);
    st["left"] = s.learner.left_value;
    st["right"] = s.learner.right_value;
    stages.push_back(std::move(st));
  }
  j["training_mse"] = model.training_mse;
  return j.dump();
}

BoostModel lsboost_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "macrocast.lsboost" || j.at("version") != 1)
      throw DataError("unsupported LSBoost document format/version");
    BoostModel m;
    m.f0 = j.at("f0").get<double>();
    m.shrinkage = j.at("shrinkage").get<double>();
    m.n_stages = j.at("n_stages").get<int>();
    m.n_features = j.at("n_features").get<Eigen::Index>();
    for (const auto& st : j.at("stages")) {
      BoostStage s;
      s.rho = st.at("rho").get<double>();
      s.learner.feature_index = st.at("feature").get<int>();
      s.learner.threshold =
          st.at("threshold").is_null() ? std::numeric_limits<double>::infinity() : st.at("threshold").get<double>();
      s.learner.left_value = st.at("left").get<double>();
      s.learner.right_value = st.at("right").get<double>();
      m.stages.push_back(s);
    }
    m.training_mse = j.value("training_mse", std::vector<double>{});
    if (static_cast<int>(m.stages.size()) != m.n_stages) throw DataError("stage count mismatch in LSBoost document");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed LSBoost document: ") + e.what());
  }
}

}  // namespace macrocast
