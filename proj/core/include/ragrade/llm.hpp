#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ragrade {

enum class LlmProviderKind { scripted, remote };

struct LlmProviderConfig {
  LlmProviderKind provider_kind = LlmProviderKind::scripted;
  std::optional<std::string> endpoint_url;
  std::optional<std::string> auth_token_env_var;
  std::optional<std::filesystem::path> script_path;  // scripted provider only
  double temperature = 0.0;
  unsigned max_output_repair_attempts = 2;
  std::chrono::milliseconds timeout{60'000};

  // Throws InvalidConfig.
  void validate() const;
};

struct LlmRequest {
  std::string submission_id;
  std::string system;
  std::string prompt;
  double temperature = 0.0;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;

  // Returns the raw model text. Throws ProviderUnavailable.
  virtual std::string complete(const LlmRequest& request) = 0;
  virtual std::string label() const = 0;
};

// Test double. Responses are keyed by submission id and consumed one per
// call; the key "*" is the fallback for ids without their own entry, and
// its list is indexed by that submission's call count. Running out of
// responses is a ProviderUnavailable.
//
// Script file: {"<submission id>": ["<response 1>", "<response 2>", ...], ...}
class ScriptedProvider final : public LlmProvider {
 public:
  explicit ScriptedProvider(std::map<std::string, std::vector<std::string>> script);
  static std::unique_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);

  std::string complete(const LlmRequest& request) override;
  std::string label() const override { return "scripted"; }

  std::size_t calls_for(const std::string& submission_id) const;
  std::size_t total_calls() const;
  std::vector<LlmRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> script_;
  std::map<std::string, std::size_t> consumed_;
  std::vector<LlmRequest> log_;
};

// POSTs {"system", "prompt", "temperature"} and reads {"text"}.
class RemoteLlmProvider final : public LlmProvider {
 public:
  explicit RemoteLlmProvider(LlmProviderConfig config);

  std::string complete(const LlmRequest& request) override;
  std::string label() const override { return "remote:" + *config_.endpoint_url; }

 private:
  LlmProviderConfig config_;
};

std::unique_ptr<LlmProvider> make_llm_provider(const LlmProviderConfig& config);

}  // namespace ragrade
