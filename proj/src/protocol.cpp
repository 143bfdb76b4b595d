#include <cmath>

#include "json.hpp"
#include "macrocast/errors.hpp"
#include "macrocast/gateway.hpp"

namespace macrocast {

using ojson = nlohmann::ordered_json;

namespace {

ojson model_json(const ModelInfo& m) { return ojson{{"name", m.name}, {"version", m.version}}; }

ojson parse_object(std::string_view line, const char* what) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    throw ProtocolError(std::string(what) + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ProtocolError(std::string(what) + " must be a JSON object");
  return j;
}

const ojson& field(const ojson& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string(what) + " lacks '" + key + "'");
  return *it;
}

std::string str_field(const ojson& j, const char* key, const char* what) {
  const auto& v = field(j, key, what);
  if (!v.is_string()) throw ProtocolError(std::string(what) + " field '" + key + "' must be a string");
  return v.get<std::string>();
}

int int_field(const ojson& j, const char* key, const char* what) {
  const auto& v = field(j, key, what);
  if (!v.is_number_integer()) throw ProtocolError(std::string(what) + " field '" + key + "' must be an integer");
  return v.get<int>();
}

double number(const ojson& v, const char* what) {
  if (!v.is_number()) throw ProtocolError(std::string(what) + " must be numeric");
  return v.get<double>();
}

std::vector<double> numbers(const ojson& v, const char* what) {
  if (!v.is_array()) throw ProtocolError(std::string(what) + " must be an array");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number(x, what));
  return out;
}

ModelInfo parse_model(const ojson& j, const char* what) {
  const auto& m = field(j, "model_info", what);
  if (!m.is_object()) throw ProtocolError(std::string(what) + " model_info must be an object");
  return {str_field(m, "name", "model_info"), str_field(m, "version", "model_info")};
}

}  // namespace

std::string to_wire(const ForecastRequest& r) {
  ojson j;
  j["request_id"] = r.request_id;
  j["series_id"] = r.series_id;
  j["frequency"] = r.frequency;
  auto& h = j["history"] = ojson::array();
  for (const auto& p : r.history) h.push_back(ojson{{"period", p.period.to_string()}, {"value", p.value}});
  j["horizon"] = r.horizon;
  if (r.quantiles) j["quantiles"] = *r.quantiles;
  if (r.covariates) j["covariates"] = ojson::parse(*r.covariates);
  return j.dump();
}

std::string to_wire(const ForecastResponse& r) {
  ojson j;
  j["request_id"] = r.request_id;
  j["point"] = r.point;
  if (r.quantile_bands) {
    auto& q = j["quantile_bands"] = ojson::object();
    for (const auto& [k, v] : *r.quantile_bands) q[k] = v;
  }
  j["model_info"] = model_json(r.model_info);
  return j.dump();
}

std::string to_wire(const Handshake& h) {
  ojson j;
  j["protocol_version"] = h.protocol_version;
  j["role"] = h.role;
  j["capability"] = ojson{{"max_in_flight", h.max_in_flight}};
  j["model_info"] = model_json(h.model_info);
  return j.dump();
}

std::string error_to_wire(const std::string& request_id, const std::string& message) {
  ojson j;
  j["request_id"] = request_id;
  j["error"] = ojson{{"message", message}};
  return j.dump();
}

ForecastRequest parse_request(std::string_view line) {
  const auto j = parse_object(line, "request");
  ForecastRequest r;
  r.request_id = str_field(j, "request_id", "request");
  r.series_id = str_field(j, "series_id", "request");
  r.frequency = str_field(j, "frequency", "request");
  const auto& h = field(j, "history", "request");
  if (!h.is_array()) throw ProtocolError("request history must be an array");
  for (const auto& p : h) {
    if (!p.is_object()) throw ProtocolError("history entries must be objects");
    try {
      r.history.push_back({Period::parse(str_field(p, "period", "history entry")), number(field(p, "value", "history entry"), "history value")});
    } catch (const DataError& e) {
      throw ProtocolError(std::string("history period: ") + e.what());
    }
  }
  r.horizon = int_field(j, "horizon", "request");
  if (auto it = j.find("quantiles"); it != j.end() && !it->is_null()) r.quantiles = numbers(*it, "quantiles");
  if (auto it = j.find("covariates"); it != j.end() && !it->is_null()) r.covariates = it->dump();
  return r;
}

AdapterReply parse_reply(std::string_view line) {
  const auto j = parse_object(line, "response");
  AdapterReply out;
  out.request_id = str_field(j, "request_id", "response");
  if (auto it = j.find("error"); it != j.end() && !it->is_null()) {
    if (it->is_string())
      out.error = it->get<std::string>();
    else if (it->is_object() && it->contains("message") && (*it)["message"].is_string())
      out.error = (*it)["message"].get<std::string>();
    else
      out.error = it->dump();
    if (out.error.empty()) out.error = "unspecified adapter error";
    return out;
  }
  ForecastResponse r;
  r.request_id = out.request_id;
  r.point = numbers(field(j, "point", "response"), "point");
  if (auto it = j.find("quantile_bands"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ProtocolError("quantile_bands must be an object");
    std::map<std::string, std::vector<double>> bands;
    for (const auto& [k, v] : it->items()) bands[k] = numbers(v, "quantile band");
    r.quantile_bands = std::move(bands);
  }
  r.model_info = parse_model(j, "response");
  out.response = std::move(r);
  return out;
}

Handshake parse_handshake(std::string_view line) {
  const auto j = parse_object(line, "handshake");
  Handshake h;
  h.protocol_version = int_field(j, "protocol_version", "handshake");
  if (h.protocol_version != kProtocolVersion)
    throw ProtocolError("unsupported protocol_version " + std::to_string(h.protocol_version));
  h.role = str_field(j, "role", "handshake");
  if (auto it = j.find("capability"); it != j.end()) {
    if (!it->is_object()) throw ProtocolError("handshake capability must be an object");
    if (it->contains("max_in_flight")) h.max_in_flight = int_field(*it, "max_in_flight", "capability");
    if (h.max_in_flight < 1) throw ProtocolError("max_in_flight must be >= 1");
  }
  h.model_info = parse_model(j, "handshake");
  return h;
}

void validate_request(const ForecastRequest& r) {
  if (r.request_id.empty()) throw ProtocolError("request_id is empty");
  if (r.frequency != "Q") throw ProtocolError("frequency must be \"Q\"");
  if (r.horizon < 1) throw ProtocolError("horizon must be >= 1");
  if (r.history.empty()) throw ProtocolError("history is empty");
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    if (!std::isfinite(r.history[i].value)) throw ProtocolError("history value is not finite");
    if (i > 0 && r.history[i].period != r.history[i - 1].period.successor())
      throw ProtocolError("history periods are not contiguous at " + r.history[i].period.to_string());
  }
  if (r.quantiles)
    for (double q : *r.quantiles)
      if (!(q > 0.0 && q < 1.0)) throw ProtocolError("quantiles must lie in (0, 1)");
}

void validate_response(const ForecastRequest& req, const ForecastResponse& resp) {
  auto bad = [](const std::string& m) { throw ForecastFailure(failure::malformed, m); };
  if (resp.request_id != req.request_id) bad("response id '" + resp.request_id + "' does not echo '" + req.request_id + "'");
  if (static_cast<int>(resp.point.size()) != req.horizon)
    bad("point has " + std::to_string(resp.point.size()) + " values, horizon is " + std::to_string(req.horizon));
  for (double v : resp.point)
    if (!std::isfinite(v)) bad("point forecast is not finite");
  if (resp.model_info.name.empty()) bad("model_info.name is empty");
  if (resp.quantile_bands)
    for (const auto& [k, v] : *resp.quantile_bands) {
      if (static_cast<int>(v.size()) != req.horizon) bad("quantile band " + k + " has the wrong length");
      for (double x : v)
        if (!std::isfinite(x)) bad("quantile band " + k + " is not finite");
    }
}

ForecastRequest build_request(const TimeSeries& series, Period origin, int horizon) {
  const auto h = series.truncated(origin);
  ForecastRequest r;
  r.series_id = series.id();
  r.request_id = series.id() + "@" + origin.to_string() + "+" + std::to_string(horizon);
  r.horizon = horizon;
  for (Eigen::Index i = 0; i < h.size(); ++i) r.history.push_back({h.period(i), h[i]});
  return r;
}

std::string to_fixture_line(const FixtureRecord& r) {
  ojson j;
  j["key"] = r.key;
  j["request"] = ojson{{"model_info", model_json(r.model)},
                       {"series_id", r.series_id},
                       {"origin", r.origin.to_string()},
                       {"horizon", r.horizon},
                       {"history_sha256", r.history_sha256}};
  j["response"] = ojson::parse(r.response_line);
  return j.dump();
}

FixtureRecord parse_fixture_line(std::string_view line) {
  const auto j = parse_object(line, "fixture record");
  FixtureRecord r;
  r.key = str_field(j, "key", "fixture record");
  const auto& q = field(j, "request", "fixture record");
  if (!q.is_object()) throw ProtocolError("fixture request must be an object");
  r.model = parse_model(q, "fixture request");
  r.series_id = str_field(q, "series_id", "fixture request");
  try {
    r.origin = Period::parse(str_field(q, "origin", "fixture request"));
  } catch (const DataError& e) {
    throw ProtocolError(std::string("fixture origin: ") + e.what());
  }
  r.horizon = int_field(q, "horizon", "fixture request");
  r.history_sha256 = str_field(q, "history_sha256", "fixture request");
  const auto& resp = field(j, "response", "fixture record");
  if (!resp.is_object()) throw ProtocolError("fixture response must be an object");
  r.response_line = resp.dump();
  if (!parse_reply(r.response_line).response) throw ProtocolError("fixture response is an error reply");
  return r;
}

}  // namespace macrocast
