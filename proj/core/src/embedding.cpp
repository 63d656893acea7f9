#include "ragrade/embedding.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <semaphore>
#include <thread>

#include "http_url.hpp"
#include "ragrade/error.hpp"
#include "ragrade/util.hpp"

namespace ragrade {

namespace {
constexpr double kUnitTolerance = 1e-6;

double l2_norm(std::span<const double> v) noexcept {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}
}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
  for (double x : raw) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidEmbedding, "non-finite embedding component");
  }
  const double norm = l2_norm(raw);
  if (raw.empty() || norm == 0.0) throw Error(ErrorCode::InvalidEmbedding, "zero-norm embedding");
  for (double& x : raw) x /= norm;
  return EmbeddingVector(std::move(raw));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<double> values) {
  for (double x : values) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidEmbedding, "non-finite embedding component");
  }
  if (values.empty() || std::abs(l2_norm(values) - 1.0) > kUnitTolerance) {
    throw Error(ErrorCode::InvalidEmbedding, "embedding is not unit length");
  }
  return EmbeddingVector(std::move(values));
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dims() != b.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "cosine_similarity: " + std::to_string(a.dims()) +
                                                  " vs " + std::to_string(b.dims()) + " dims");
  }
  if (a.empty()) throw Error(ErrorCode::InvalidEmbedding, "cosine_similarity of empty vectors");
  const double s = dot(a.values(), b.values()) / (l2_norm(a.values()) * l2_norm(b.values()));
  return std::clamp(s, -1.0, 1.0);
}

void EmbeddingProviderConfig::validate() const {
  if (dims == 0) throw Error(ErrorCode::InvalidConfig, "embedding dims must be positive");
  const bool remote = provider_kind == EmbeddingProviderKind::remote;
  if (remote != endpoint_url.has_value()) {
    throw Error(ErrorCode::InvalidConfig, "endpoint_url must be set exactly when provider_kind is remote");
  }
  if (remote && max_in_flight == 0) throw Error(ErrorCode::InvalidConfig, "max_in_flight must be positive");
}

std::vector<std::string> reference_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t stable_hash64(std::string_view token) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

ReferenceEmbedder::ReferenceEmbedder(std::size_t dims) : dims_(dims) {
  if (dims == 0) throw Error(ErrorCode::InvalidConfig, "embedding dims must be positive");
}

EmbeddingVector ReferenceEmbedder::embed(std::string_view text) {
  const auto tokens = reference_tokens(text);
  if (tokens.empty()) throw Error(ErrorCode::EmptyText, "text has no tokens");
  std::vector<double> acc(dims_, 0.0);
  for (const auto& token : tokens) {
    const auto h = stable_hash64(token);
    const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
    acc[h % dims_] += sign;
  }
  if (std::all_of(acc.begin(), acc.end(), [](double x) { return x == 0.0; })) {
    throw Error(ErrorCode::EmptyText, "token hashes cancel to a zero vector");
  }
  return EmbeddingVector::normalized(std::move(acc));
}

std::string ReferenceEmbedder::label() const {
  return "reference-hash-" + std::to_string(dims_);
}

struct RemoteEmbedder::InFlight {
  explicit InFlight(unsigned limit) : slots(static_cast<std::ptrdiff_t>(limit)) {}
  std::counting_semaphore<> slots;
};

RemoteEmbedder::RemoteEmbedder(EmbeddingProviderConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.provider_kind != EmbeddingProviderKind::remote) {
    throw Error(ErrorCode::InvalidConfig, "RemoteEmbedder requires provider_kind remote");
  }
  in_flight_ = std::make_unique<InFlight>(config_.max_in_flight);
}

RemoteEmbedder::~RemoteEmbedder() = default;

std::string RemoteEmbedder::label() const { return "remote:" + *config_.endpoint_url; }

EmbeddingVector RemoteEmbedder::embed(std::string_view text) {
  if (trim(text).empty()) throw Error(ErrorCode::EmptyText, "text is blank");

  const auto url = detail::split_url(*config_.endpoint_url);
  const std::string body = nlohmann::json{{"input", std::string(text)}}.dump();
  httplib::Headers headers;
  if (config_.auth_token_env_var) {
    if (const char* token = std::getenv(config_.auth_token_env_var->c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  in_flight_->slots.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{in_flight_->slots};

  std::string last_failure = "no attempt made";
  auto delay = config_.backoff_base;
  for (unsigned attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_failure = "HTTP status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      last_failure = std::string("malformed reply: ") + e.what();
      continue;
    }
    if (!reply.is_object() || !reply.contains("embedding") || !reply["embedding"].is_array()) {
      last_failure = "reply lacks an embedding array";
      continue;
    }
    const auto& arr = reply["embedding"];
    if (arr.size() != config_.dims) {
      throw Error(ErrorCode::DimensionMismatch, "remote returned " + std::to_string(arr.size()) +
                                                    " dims, expected " + std::to_string(config_.dims));
    }
    std::vector<double> values;
    values.reserve(arr.size());
    for (const auto& v : arr) {
      if (!v.is_number()) throw Error(ErrorCode::InvalidEmbedding, "non-numeric embedding component");
      values.push_back(v.get<double>());
    }
    return EmbeddingVector::normalized(std::move(values));
  }
  throw Error(ErrorCode::RemoteUnavailable, "embedding endpoint unavailable after " +
                                                std::to_string(config_.max_retries + 1) +
                                                " attempts: " + last_failure);
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& config) {
  config.validate();
  if (config.provider_kind == EmbeddingProviderKind::remote) {
    return std::make_unique<RemoteEmbedder>(config);
  }
  return std::make_unique<ReferenceEmbedder>(config.dims);
}

EmbeddingVector embed(std::string_view text, const EmbeddingProviderConfig& config) {
  return make_embedding_provider(config)->embed(text);
}

}  // namespace ragrade
