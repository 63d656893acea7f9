#include "ragrade/llm.hpp"

#include <httplib.h>

#include <cstdlib>
#include <memory>
#include <nlohmann/json.hpp>

#include "http_url.hpp"
#include "ragrade/error.hpp"
#include "ragrade/util.hpp"

namespace ragrade {

using nlohmann::json;

void LlmProviderConfig::validate() const {
  const bool remote = provider_kind == LlmProviderKind::remote;
  if (remote != endpoint_url.has_value()) {
    throw Error(ErrorCode::InvalidConfig, "llm endpoint_url must be set exactly when provider_kind is remote");
  }
  if (!remote && !script_path) throw Error(ErrorCode::InvalidConfig, "scripted llm provider needs script_path");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
}

ScriptedProvider::ScriptedProvider(std::map<std::string, std::vector<std::string>> script)
    : script_(std::move(script)) {}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path) {
  try {
    const auto j = json::parse(read_file(path));
    return std::make_unique<ScriptedProvider>(j.get<std::map<std::string, std::vector<std::string>>>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": malformed script: " + e.what());
  }
}

std::string ScriptedProvider::complete(const LlmRequest& request) {
  std::lock_guard lock(mutex_);
  log_.push_back(request);
  const auto n = consumed_[request.submission_id]++;
  auto it = script_.find(request.submission_id);
  if (it == script_.end()) it = script_.find("*");
  if (it == script_.end()) {
    throw Error(ErrorCode::ProviderUnavailable, "no scripted responses for submission " + request.submission_id);
  }
  if (n >= it->second.size()) {
    throw Error(ErrorCode::ProviderUnavailable,
                "scripted responses exhausted for submission " + request.submission_id);
  }
  return it->second[n];
}

std::size_t ScriptedProvider::calls_for(const std::string& submission_id) const {
  std::lock_guard lock(mutex_);
  auto it = consumed_.find(submission_id);
  return it == consumed_.end() ? 0 : it->second;
}

std::size_t ScriptedProvider::total_calls() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::vector<LlmRequest> ScriptedProvider::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

RemoteLlmProvider::RemoteLlmProvider(LlmProviderConfig config) : config_(std::move(config)) {
  if (config_.provider_kind != LlmProviderKind::remote) {
    throw Error(ErrorCode::InvalidConfig, "RemoteLlmProvider requires provider_kind remote");
  }
  config_.validate();
}

std::string RemoteLlmProvider::complete(const LlmRequest& request) {
  const auto url = detail::split_url(*config_.endpoint_url);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (config_.auth_token_env_var) {
    if (const char* token = std::getenv(config_.auth_token_env_var->c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const json body{{"system", request.system}, {"prompt", request.prompt}, {"temperature", request.temperature}};
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::ProviderUnavailable, "llm transport error: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::ProviderUnavailable, "llm endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto reply = json::parse(res->body);
    return reply.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable, std::string("llm reply lacks a text field: ") + e.what());
  }
}

std::unique_ptr<LlmProvider> make_llm_provider(const LlmProviderConfig& config) {
  config.validate();
  if (config.provider_kind == LlmProviderKind::remote) return std::make_unique<RemoteLlmProvider>(config);
  return ScriptedProvider::from_file(*config.script_path);
}

}  // namespace ragrade
