#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "macrocast/forecaster.hpp"
#include "macrocast/time_series.hpp"

namespace macrocast {

constexpr int kProtocolVersion = 1;

/// Schema violation in a wire line or fixture record.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The adapter could not be started or did not complete its handshake.
class AdapterStartupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure reason codes carried by ForecastFailure and recorded per origin.
namespace failure {
inline constexpr const char* timeout = "timeout";
inline constexpr const char* malformed = "malformed";
inline constexpr const char* crash = "crash";
inline constexpr const char* fixture_miss = "fixture_miss";
inline constexpr const char* adapter_error = "adapter_error";
inline constexpr const char* validation = "validation";
}  // namespace failure

struct ModelInfo {
  std::string name;
  std::string version;
  friend bool operator==(const ModelInfo&, const ModelInfo&) = default;
};

struct HistoryPoint {
  Period period;
  double value = 0.0;
  friend bool operator==(const HistoryPoint&, const HistoryPoint&) = default;
};

struct ForecastRequest {
  std::string request_id;
  std::string series_id;
  std::string frequency = "Q";
  std::vector<HistoryPoint> history;
  int horizon = 1;
  std::optional<std::vector<double>> quantiles;
  std::optional<std::string> covariates;  // reserved; raw JSON text, never populated here
  friend bool operator==(const ForecastRequest&, const ForecastRequest&) = default;
};

struct ForecastResponse {
  std::string request_id;
  std::vector<double> point;
  std::optional<std::map<std::string, std::vector<double>>> quantile_bands;
  ModelInfo model_info;
  friend bool operator==(const ForecastResponse&, const ForecastResponse&) = default;
};

/// What an adapter sends back for one request: a response or an error message.
struct AdapterReply {
  std::string request_id;
  std::optional<ForecastResponse> response;
  std::string error;
};

struct Handshake {
  int protocol_version = kProtocolVersion;
  std::string role;  // "adapter" or "gateway"
  int max_in_flight = 1;
  ModelInfo model_info;
};

std::string to_wire(const ForecastRequest& r);
std::string to_wire(const ForecastResponse& r);
std::string to_wire(const Handshake& h);
std::string error_to_wire(const std::string& request_id, const std::string& message);

/// Parsers throw ProtocolError on schema violations.
ForecastRequest parse_request(std::string_view line);
AdapterReply parse_reply(std::string_view line);
Handshake parse_handshake(std::string_view line);

/// Throws ProtocolError unless history is non-empty and contiguous, horizon >= 1,
/// frequency is "Q" and quantiles lie in (0, 1).
void validate_request(const ForecastRequest& r);
/// Throws ForecastFailure(malformed) on id mismatch, wrong length or non-finite values.
void validate_response(const ForecastRequest& req, const ForecastResponse& resp);

/// Request for `origin`: history is `series` truncated at origin, never later.
ForecastRequest build_request(const TimeSeries& series, Period origin, int horizon);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
/// Hash of period labels and the exact IEEE-754 bit patterns of the values.
std::string history_hash(const std::vector<HistoryPoint>& history);

struct CacheKey {
  ModelInfo model;
  std::string series_id;
  Period origin;
  int horizon = 1;
  std::string history_sha256;

  static CacheKey of(const ModelInfo& model, const ForecastRequest& req);
  std::string digest() const;
};

/// Content-addressed store of validated response lines, one file per key.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<std::string> get(const std::string& key) const;
  /// Atomic via write-to-temp then rename.
  void put(const std::string& key, const std::string& response_line) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual const Handshake& handshake() const = 0;
  /// One exchange. Throws ForecastFailure with a failure:: reason.
  virtual AdapterReply exchange(const ForecastRequest& req, std::chrono::milliseconds timeout) = 0;
};

/// Newline-delimited JSON over the stdin/stdout of `/bin/sh -c command`.
/// Throws AdapterStartupError when the process or its handshake fails.
std::unique_ptr<Adapter> make_subprocess_adapter(const std::string& command,
                                                 std::chrono::milliseconds startup_timeout = std::chrono::seconds(30));

/// POSTs request lines to `url` (http://host:port/path); handshake from GET <url>/handshake.
std::unique_ptr<Adapter> make_http_adapter(const std::string& url,
                                           std::chrono::milliseconds startup_timeout = std::chrono::seconds(10));

/// In-process adapter over wire lines; `handler` maps a request line to a reply line.
class FunctionAdapter final : public Adapter {
 public:
  FunctionAdapter(ModelInfo info, std::function<std::string(const std::string&)> handler, int max_in_flight = 1);
  const Handshake& handshake() const override { return hs_; }
  AdapterReply exchange(const ForecastRequest& req, std::chrono::milliseconds timeout) override;
  int calls() const { return calls_.load(); }

 private:
  Handshake hs_;
  std::function<std::string(const std::string&)> handler_;
  std::atomic<int> calls_{0};
};

struct FixtureRecord {
  std::string key;
  ModelInfo model;
  std::string series_id;
  Period origin;
  int horizon = 1;
  std::string history_sha256;
  std::string response_line;
};

std::string to_fixture_line(const FixtureRecord& r);
FixtureRecord parse_fixture_line(std::string_view line);

/// Answers only recorded requests; anything else fails with fixture_miss.
/// Throws ProtocolError on a corrupt file, mixed models or a key that does not match its record.
std::unique_ptr<Adapter> replay_fixture(const std::filesystem::path& path);

struct GatewayOptions {
  std::chrono::milliseconds timeout{30000};
  std::optional<std::filesystem::path> cache_dir;
  bool record = false;
};

/// Thread-safe front end for one adapter: admission control, validation, caching, recording.
class Gateway {
 public:
  Gateway(std::unique_ptr<Adapter> adapter, GatewayOptions options = {});

  const ModelInfo& model_info() const { return adapter_->handshake().model_info; }

  /// Cache hit: no adapter call. Miss: call, validate, cache. Throws ForecastFailure.
  ForecastResponse request_forecast(const ForecastRequest& req);

  int adapter_calls() const { return adapter_calls_.load(); }
  int cache_hits() const { return cache_hits_.load(); }

  /// Recorded exchanges (record mode), sorted by key, one JSON line each.
  std::string fixture_text() const;
  void write_fixture(const std::filesystem::path& path) const;

 private:
  std::unique_ptr<Adapter> adapter_;
  GatewayOptions opts_;
  std::optional<ResponseCache> cache_;
  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  int in_flight_ = 0;
  std::atomic<int> adapter_calls_{0}, cache_hits_{0};
  mutable std::mutex record_mutex_;
  std::map<std::string, FixtureRecord> recorded_;
};

/// Backtest model backed by a gateway; its id is `id`.
std::shared_ptr<const Forecaster> make_gateway_forecaster(std::string id, std::shared_ptr<Gateway> gateway);

}  // namespace macrocast
