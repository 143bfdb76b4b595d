#include "macrocast/forecaster.hpp"

#include <optional>

#include "macrocast/errors.hpp"
#include "macrocast/factor_model.hpp"
#include "macrocast/persistence.hpp"

namespace macrocast {

void ForecasterRegistry::add(std::shared_ptr<const Forecaster> f) {
  auto id = f->id();
  if (!models_.emplace(id, std::move(f)).second) throw InvalidArgument("duplicate model id '" + id + "'");
}

const Forecaster& ForecasterRegistry::get(const std::string& id) const {
  auto it = models_.find(id);
  if (it == models_.end()) throw InvalidArgument("unknown model '" + id + "'");
  return *it->second;
}

std::vector<std::string> ForecasterRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : models_) out.push_back(k);
  return out;
}

namespace {

class PersistenceSession final : public ForecastSession {
 public:
  Eigen::VectorXd forecast(const ForecastInput& in) override { return persistence_forecast(in.history, in.horizon); }
};

class Persistence final : public Forecaster {
 public:
  std::string id() const override { return "persistence"; }
  std::unique_ptr<ForecastSession> session(int) const override { return std::make_unique<PersistenceSession>(); }
};

class ArimaSession final : public ForecastSession {
 public:
  ArimaSession(AutoArimaOptions o, int stride) : opts_(o), stride_(stride) {}
  Eigen::VectorXd forecast(const ForecastInput& in) override {
    if (!fit_ || since_refit_ + 1 >= stride_) {
      fit_ = auto_arima(in.history, opts_);
      since_refit_ = 0;
    } else {
      fit_ = arima_extend(*fit_, in.history);
      ++since_refit_;
    }
    return arima_forecast(*fit_, in.history, in.horizon);
  }

 private:
  AutoArimaOptions opts_;
  int stride_;
  int since_refit_ = 0;
  std::optional<ArimaFit> fit_;
};

class Arima final : public Forecaster {
 public:
  explicit Arima(AutoArimaOptions o) : opts_(o) {}
  std::string id() const override { return "arima"; }
  std::unique_ptr<ForecastSession> session(int stride) const override {
    return std::make_unique<ArimaSession>(opts_, stride);
  }

 private:
  AutoArimaOptions opts_;
};

class LsBoostSession final : public ForecastSession {
 public:
  LsBoostSession(LsBoostOptions o, int stride) : opts_(std::move(o)), stride_(stride) {}
  Eigen::VectorXd forecast(const ForecastInput& in) override {
    if (!model_ || since_refit_ + 1 >= stride_) {
      const auto d = make_supervised(in.history, opts_.features);
      model_ = fit_lsboost(d.X, d.y, opts_.n_stages, opts_.shrinkage);
      since_refit_ = 0;
    } else {
      ++since_refit_;
    }
    return lsboost_forecast(*model_, in.history, opts_.features, in.horizon);
  }

 private:
  LsBoostOptions opts_;
  int stride_;
  int since_refit_ = 0;
  std::optional<BoostModel> model_;
};

class LsBoost final : public Forecaster {
 public:
  explicit LsBoost(LsBoostOptions o) : opts_(std::move(o)) { opts_.features.validate(); }
  std::string id() const override { return "lsboost"; }
  std::unique_ptr<ForecastSession> session(int stride) const override {
    return std::make_unique<LsBoostSession>(opts_, stride);
  }

 private:
  LsBoostOptions opts_;
};

class FactorSession final : public ForecastSession {
 public:
  explicit FactorSession(FactorOptions o) : opts_(o) {}
  Eigen::VectorXd forecast(const ForecastInput& in) override {
    if (!in.panel) throw InvalidArgument("factor model needs the panel");
    const auto panel = make_panel(*in.panel);
    const int r = choose_factor_count(panel, opts_.variance_threshold, opts_.max_factors);
    auto fit = extract_factors(panel, r);
    const int p = opts_.select_order_by_aic ? select_var_order(fit, opts_.max_var_order) : opts_.var_order;
    fit = fit_factor_var(std::move(fit), p);
    return factor_forecast(fit, static_cast<int>(in.series_index), in.horizon);
  }

 private:
  FactorOptions opts_;
};

class Factor final : public Forecaster {
 public:
  explicit Factor(FactorOptions o) : opts_(o) {}
  std::string id() const override { return "factor"; }
  std::string not_applicable(const std::vector<TimeSeries>& data) const override {
    if (data.size() < 2) return "factor model needs a panel of at least two series";
    return {};
  }
  bool needs_panel() const override { return true; }
  std::unique_ptr<ForecastSession> session(int) const override { return std::make_unique<FactorSession>(opts_); }

 private:
  FactorOptions opts_;
};

}  // namespace

std::shared_ptr<const Forecaster> make_persistence_forecaster() { return std::make_shared<Persistence>(); }
std::shared_ptr<const Forecaster> make_arima_forecaster(AutoArimaOptions o) { return std::make_shared<Arima>(o); }
std::shared_ptr<const Forecaster> make_lsboost_forecaster(LsBoostOptions o) {
  return std::make_shared<LsBoost>(std::move(o));
}
std::shared_ptr<const Forecaster> make_factor_forecaster(FactorOptions o) { return std::make_shared<Factor>(o); }

ForecasterRegistry builtin_registry() {
  ForecasterRegistry r;
  r.add(make_persistence_forecaster());
  r.add(make_arima_forecaster());
  r.add(make_lsboost_forecaster());
  r.add(make_factor_forecaster());
  return r;
}

}  // namespace macrocast
