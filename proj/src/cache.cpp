#include <openssl/evp.h>

#include <atomic>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "macrocast/errors.hpp"
#include "macrocast/gateway.hpp"

namespace macrocast {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string history_hash(const std::vector<HistoryPoint>& history) {
  std::string buf;
  char bits[17];
  for (const auto& p : history) {
    std::uint64_t u;
    std::memcpy(&u, &p.value, sizeof u);
    std::snprintf(bits, sizeof bits, "%016llx", static_cast<unsigned long long>(u));
    buf += p.period.to_string();
    buf += ':';
    buf += bits;
    buf += '\n';
  }
  return sha256_hex(buf);
}

CacheKey CacheKey::of(const ModelInfo& model, const ForecastRequest& req) {
  if (req.history.empty()) throw ProtocolError("cannot key a request with empty history");
  return {model, req.series_id, req.history.back().period, req.horizon, history_hash(req.history)};
}

std::string CacheKey::digest() const {
  std::string s = "macrocast-cache-v1\n";
  for (const auto& part : {model.name, model.version, series_id, origin.to_string(), std::to_string(horizon), history_sha256}) {
    s += part;
    s += '\n';
  }
  return sha256_hex(s);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::ifstream in(dir_ / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ResponseCache::put(const std::string& key, const std::string& response_line) const {
  static std::atomic<unsigned> counter{0};
  const auto tmp = dir_ / ("." + key + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache file " + tmp.string());
    out << response_line;
    if (!out.flush()) throw std::runtime_error("cannot write cache file " + tmp.string());
  }
  std::filesystem::rename(tmp, dir_ / (key + ".json"));
}

}  // namespace macrocast
