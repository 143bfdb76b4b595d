#include "macrocast/gateway.hpp"

#include <fstream>

namespace macrocast {

Gateway::Gateway(std::unique_ptr<Adapter> adapter, GatewayOptions options)
    : adapter_(std::move(adapter)), opts_(std::move(options)) {
  if (opts_.cache_dir) cache_.emplace(*opts_.cache_dir);
}

ForecastResponse Gateway::request_forecast(const ForecastRequest& req) {
  try {
    validate_request(req);
  } catch (const ProtocolError& e) {
    throw ForecastFailure(failure::validation, e.what());
  }
  const auto key = CacheKey::of(model_info(), req);
  const auto digest = key.digest();
  auto remember = [&](const std::string& line) {
    if (!opts_.record) return;
    std::lock_guard lock(record_mutex_);
    recorded_[digest] = FixtureRecord{digest, key.model, key.series_id, key.origin, key.horizon, key.history_sha256, line};
  };

  if (cache_) {
    if (auto line = cache_->get(digest)) {
      try {
        auto reply = parse_reply(*line);
        if (reply.response) {
          auto resp = std::move(*reply.response);
          resp.request_id = req.request_id;
          validate_response(req, resp);
          ++cache_hits_;
          remember(*line);
          return resp;
        }
      } catch (const ProtocolError&) {
      } catch (const ForecastFailure&) {
      }
      // An unreadable entry is treated as a miss and overwritten below.
    }
  }

  AdapterReply reply;
  {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return in_flight_ < adapter_->handshake().max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    Gateway* g;
    ~Release() {
      {
        std::lock_guard lock(g->slots_mutex_);
        --g->in_flight_;
      }
      g->slots_cv_.notify_one();
    }
  } release{this};
  ++adapter_calls_;
  reply = adapter_->exchange(req, opts_.timeout);
  if (!reply.response) throw ForecastFailure(failure::adapter_error, reply.error);
  validate_response(req, *reply.response);
  const auto line = to_wire(*reply.response);
  if (cache_) cache_->put(digest, line);
  remember(line);
  return *reply.response;
}

std::string Gateway::fixture_text() const {
  std::lock_guard lock(record_mutex_);
  std::string out;
  for (const auto& [k, r] : recorded_) out += to_fixture_line(r) + "\n";
  return out;
}

void Gateway::write_fixture(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write fixture " + path.string());
  out << fixture_text();
}

namespace {

class GatewaySession final : public ForecastSession {
 public:
  explicit GatewaySession(std::shared_ptr<Gateway> g) : g_(std::move(g)) {}
  Eigen::VectorXd forecast(const ForecastInput& in) override {
    const auto resp = g_->request_forecast(build_request(in.history, in.origin, in.horizon));
    return Eigen::Map<const Eigen::VectorXd>(resp.point.data(), static_cast<Eigen::Index>(resp.point.size()));
  }

 private:
  std::shared_ptr<Gateway> g_;
};

class GatewayForecaster final : public Forecaster {
 public:
  GatewayForecaster(std::string id, std::shared_ptr<Gateway> g) : id_(std::move(id)), g_(std::move(g)) {}
  std::string id() const override { return id_; }
  std::unique_ptr<ForecastSession> session(int) const override { return std::make_unique<GatewaySession>(g_); }

 private:
  std::string id_;
  std::shared_ptr<Gateway> g_;
};

}  // namespace

std::shared_ptr<const Forecaster> make_gateway_forecaster(std::string id, std::shared_ptr<Gateway> gateway) {
  return std::make_shared<GatewayForecaster>(std::move(id), std::move(gateway));
}

}  // namespace macrocast
