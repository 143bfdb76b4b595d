#include "macrocast/config.hpp"

#include <algorithm>
#include <functional>

#include "json.hpp"
#include "macrocast/errors.hpp"

namespace macrocast {

using ojson = nlohmann::ordered_json;

namespace {

using Setter = std::function<void(const ojson&)>;

void apply_object(const ojson& obj, const std::string& where, const std::map<std::string, Setter>& setters) {
  if (!obj.is_object()) throw InvalidArgument(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    const auto name = where.empty() ? key : where + "." + key;
    auto it = setters.find(key);
    if (it == setters.end()) throw InvalidArgument("unknown config key '" + name + "'");
    try {
      it->second(value);
    } catch (const ojson::exception& e) {
      throw InvalidArgument("config key '" + name + "': " + e.what());
    } catch (const DataError& e) {
      throw InvalidArgument("config key '" + name + "': " + e.what());
    }
  }
}

template <class T>
Setter set(T& field) {
  return [&field](const ojson& v) { field = v.get<T>(); };
}

Setter set_optional_string(std::optional<std::string>& field) {
  return [&field](const ojson& v) {
    if (v.is_null())
      field.reset();
    else
      field = v.get<std::string>();
  };
}

Setter set_optional_period(std::optional<Period>& field) {
  return [&field](const ojson& v) {
    if (v.is_null())
      field.reset();
    else
      field = Period::parse(v.get<std::string>());
  };
}

ojson optional_json(const std::optional<Period>& p) { return p ? ojson(p->to_string()) : ojson(nullptr); }

}  // namespace

std::vector<std::string> RunConfig::model_ids() const {
  std::vector<std::string> out = models;
  if (out.empty()) out = {"persistence", "arima", "lsboost", "factor"};
  for (const auto& [name, spec] : adapters)
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  return out;
}

std::vector<std::string> RunConfig::references() const {
  if (!dm_references.empty()) return dm_references;
  std::vector<std::string> out;
  const auto ids = model_ids();
  for (const char* ref : {"persistence", "arima"})
    if (std::find(ids.begin(), ids.end(), ref) != ids.end()) out.emplace_back(ref);
  return out;
}

void apply_config_json(RunConfig& cfg, std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::exception& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  auto& a = cfg.arima;
  auto& b = cfg.lsboost;
  auto& f = cfg.factor;
  const std::map<std::string, Setter> arima = {
      {"max_p", set(a.max_p)}, {"max_q", set(a.max_q)}, {"max_P", set(a.max_P)}, {"max_Q", set(a.max_Q)},
      {"max_order", set(a.max_order)}, {"max_d", set(a.max_d)}, {"max_D", set(a.max_D)},
      {"seasonal", set(a.seasonal)}, {"kpss_alpha", set(a.kpss_alpha)},
      {"seasonal_strength_threshold", set(a.seasonal_strength_threshold)}, {"max_steps", set(a.max_steps)}};
  const std::map<std::string, Setter> lsboost = {{"lags", set(b.features.lags)},
                                                 {"seasonal_dummies", set(b.features.include_seasonal_dummies)},
                                                 {"n_stages", set(b.n_stages)},
                                                 {"shrinkage", set(b.shrinkage)}};
  const std::map<std::string, Setter> factor = {{"variance_threshold", set(f.variance_threshold)},
                                                {"max_factors", set(f.max_factors)},
                                                {"var_order", set(f.var_order)},
                                                {"select_order_by_aic", set(f.select_order_by_aic)},
                                                {"max_var_order", set(f.max_var_order)}};
  const std::map<std::string, Setter> robustness = {{"n_windows", set(cfg.robustness.n_windows)},
                                                    {"min_len", set(cfg.robustness.min_len)}};
  const std::map<std::string, Setter> top = {
      {"data", set(cfg.data)},
      {"unit", [&](const ojson& v) { cfg.unit = parse_unit(v.get<std::string>()); }},
      {"series", set(cfg.series)},
      {"models", set(cfg.models)},
      {"adapters", set(cfg.adapters)},
      {"arima", [&](const ojson& v) { apply_object(v, "arima", arima); }},
      {"lsboost", [&](const ojson& v) { apply_object(v, "lsboost", lsboost); }},
      {"factor", [&](const ojson& v) { apply_object(v, "factor", factor); }},
      {"horizon", set(cfg.horizon)},
      {"first_origin", set_optional_period(cfg.first_origin)},
      {"last_origin", set_optional_period(cfg.last_origin)},
      {"refit_stride", set(cfg.refit_stride)},
      {"slices",
       [&](const ojson& v) {
         cfg.slices.clear();
         for (const auto& s : v) {
           if (s.is_object())
             cfg.slices.push_back({s.at("name").get<std::string>(), Window::parse(s.at("window").get<std::string>())});
           else
             cfg.slices.push_back(parse_named_window(s.get<std::string>()));
         }
       }},
      {"failure_budget", set(cfg.failure_budget)},
      {"mase_m", set(cfg.mase_m)},
      {"mase_per_origin", set(cfg.mase_per_origin)},
      {"dm_loss", [&](const ojson& v) { cfg.dm_loss = parse_loss(v.get<std::string>()); }},
      {"dm_references", set(cfg.dm_references)},
      {"harvey", set(cfg.harvey)},
      {"robustness", [&](const ojson& v) { apply_object(v, "robustness", robustness); }},
      {"adapter_timeout_ms", set(cfg.adapter_timeout_ms)},
      {"cache_dir", set_optional_string(cfg.cache_dir)},
      {"record_dir", set_optional_string(cfg.record_dir)},
      {"out", set(cfg.out)},
      {"seed", set(cfg.seed)},
      {"jobs", set(cfg.jobs)},
  };
  apply_object(doc, "", top);
}

std::string resolved_config_json(const RunConfig& cfg, const std::string& data_sha256) {
  ojson slices = ojson::array();
  for (const auto& s : cfg.slices) slices.push_back({{"name", s.name}, {"window", s.window.to_string()}});
  ojson adapters = ojson::object();
  for (const auto& [name, spec] : cfg.adapters) adapters[name] = spec;
  const auto& a = cfg.arima;
  const auto& b = cfg.lsboost;
  const auto& f = cfg.factor;
  ojson j;
  j["data"] = cfg.data;
  j["data_sha256"] = data_sha256;
  j["unit"] = std::string(to_string(cfg.unit));
  j["series"] = cfg.series;
  j["models"] = cfg.model_ids();
  j["adapters"] = std::move(adapters);
  j["arima"] = {{"max_p", a.max_p}, {"max_q", a.max_q}, {"max_P", a.max_P}, {"max_Q", a.max_Q},
                {"max_order", a.max_order}, {"max_d", a.max_d}, {"max_D", a.max_D}, {"seasonal", a.seasonal},
                {"kpss_alpha", a.kpss_alpha}, {"seasonal_strength_threshold", a.seasonal_strength_threshold},
                {"max_steps", a.max_steps}};
  j["lsboost"] = {{"lags", b.features.lags},
                  {"seasonal_dummies", b.features.include_seasonal_dummies},
                  {"n_stages", b.n_stages},
                  {"shrinkage", b.shrinkage},
                  {"features", "univariate analogue: own lags and quarter dummies"}};
  j["factor"] = {{"variance_threshold", f.variance_threshold}, {"max_factors", f.max_factors},
                 {"var_order", f.var_order}, {"select_order_by_aic", f.select_order_by_aic},
                 {"max_var_order", f.max_var_order}};
  j["horizon"] = cfg.horizon;
  j["first_origin"] = optional_json(cfg.first_origin);
  j["last_origin"] = optional_json(cfg.last_origin);
  j["refit_stride"] = cfg.refit_stride;
  j["slices"] = std::move(slices);
  j["failure_budget"] = cfg.failure_budget;
  j["mase_m"] = cfg.mase_m;
  j["mase_per_origin"] = cfg.mase_per_origin;
  j["dm_loss"] = std::string(to_string(cfg.dm_loss));
  j["dm_references"] = cfg.references();
  j["harvey"] = cfg.harvey;
  j["robustness"] = {{"n_windows", cfg.robustness.n_windows}, {"min_len", cfg.robustness.min_len}};
  j["adapter_timeout_ms"] = cfg.adapter_timeout_ms;
  j["seed"] = cfg.seed;
  return j.dump();
}

}  // namespace macrocast
