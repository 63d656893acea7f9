#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ragrade/agent.hpp"
#include "ragrade/assessment.hpp"
#include "ragrade/corpus.hpp"
#include "ragrade/embedding.hpp"
#include "ragrade/llm.hpp"
#include "ragrade/review.hpp"
#include "ragrade/rubric.hpp"
#include "ragrade/stats.hpp"
#include "ragrade/vindex.hpp"

namespace ragrade {

struct ServiceConfig {
  std::string listen_address = "127.0.0.1:8080";
  std::filesystem::path corpus_path;
  std::filesystem::path index_path;
  std::filesystem::path assessment_store_path;
  std::optional<std::filesystem::path> rubric_path;  // default rubric when unset
  EmbeddingProviderConfig embedding;
  LlmProviderConfig llm;
  std::size_t default_k = kDefaultTopK;
  std::size_t parallelism = 4;
  bool auto_approve = false;
  // Environment variable holding the shared bearer token; no auth when unset.
  std::optional<std::string> auth_token_env_var;

  // Throws InvalidConfig.
  void validate() const;

  // Sibling files kept next to the assessment store.
  std::filesystem::path submissions_path() const;
  std::filesystem::path queue_path() const;
  std::filesystem::path human_scores_path() const;
};

// Relative paths in the file resolve against the file's directory.
ServiceConfig load_service_config(const std::filesystem::path& path);
ServiceConfig service_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct BatchFailure {
  std::string submission_id;
  std::string file;
  ErrorCode code;
  std::string reason;
};

struct BatchSummary {
  std::size_t graded = 0;
  std::size_t failed = 0;
  std::vector<std::string> assessment_ids;
  std::vector<BatchFailure> failures;  // ordered by file name
};

nlohmann::json batch_summary_to_json(const BatchSummary& summary);

// Owns every store and provider behind the CLI and the HTTP API.
class Engine {
 public:
  struct Options {
    Clock clock = system_clock_seconds;
    std::shared_ptr<IdGenerator> ids = std::make_shared<IdGenerator>();
    // Overrides the provider built from config.llm (tests).
    std::shared_ptr<LlmProvider> llm;
  };

  // Throws StoreLoadFailure (or InvalidConfig) when a store cannot be opened.
  explicit Engine(ServiceConfig config);
  Engine(ServiceConfig config, Options options);

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const ServiceConfig& config() const noexcept { return config_; }
  const Rubric& rubric() const noexcept { return rubric_; }

  // Ingest, embed and index.
  Document ingest_text(std::string_view text, DocType doc_type, std::string source_name,
                       std::optional<std::string> cohort = std::nullopt);
  ScanResult ingest_directory(const std::filesystem::path& dir, std::optional<DocType> default_type = std::nullopt);

  Submission create_submission(std::string student_ref, std::string essay_text,
                               std::optional<std::string> cohort = std::nullopt,
                               std::optional<std::string> id = std::nullopt);

  // Grades a stored submission; approves it right away when auto_approve is
  // set. Throws NotFound for an unknown id.
  Assessment grade_submission(std::string_view submission_id, std::optional<std::size_t> k = std::nullopt);

  // Grades every non-hidden file in `dir` (submission id = file stem) with at
  // most config.parallelism concurrent gradings. Throws IoFailure when the
  // directory cannot be listed.
  BatchSummary grade_batch(const std::filesystem::path& dir, std::optional<std::size_t> k = std::nullopt);

  // Re-grades submissions queued by rejections with request_regeneration.
  BatchSummary drain_regeneration_queue(std::optional<std::size_t> k = std::nullopt);

  // Human percent per submission id (rater_a column of the uploaded CSV).
  std::size_t store_human_scores(std::string_view csv);

  // Pairs stored human scores with the machine total of each submission's
  // latest assessment. Throws InsufficientData with fewer than two pairs.
  stats::ReliabilityReport reliability(const std::optional<std::string>& cohort = std::nullopt) const;

  CorpusStore& corpus() noexcept { return *corpus_; }
  VectorIndex& index() noexcept { return *index_; }
  AssessmentStore& assessments() noexcept { return *assessments_; }
  SubmissionStore& submissions() noexcept { return *submissions_; }
  GradingQueue& queue() noexcept { return *queue_; }
  ReviewService& review() noexcept { return *review_; }
  EmbeddingProvider& embedder() noexcept { return *embedder_; }
  LlmProvider& llm() noexcept { return *llm_; }

 private:
  ServiceConfig config_;
  Options options_;
  Rubric rubric_;
  std::unique_ptr<EmbeddingProvider> embedder_;
  std::shared_ptr<LlmProvider> llm_;
  std::unique_ptr<CorpusStore> corpus_;
  std::unique_ptr<VectorIndex> index_;
  std::unique_ptr<AssessmentStore> assessments_;
  std::unique_ptr<SubmissionStore> submissions_;
  std::unique_ptr<GradingQueue> queue_;
  std::unique_ptr<ReviewService> review_;
  std::unique_ptr<Grader> grader_;
  std::mutex ingest_mutex_;
};

// HTTP status for an error code: 400 invalid input, 401, 404, 409 invalid
// state, 500 storage, 502 provider failure.
int http_status_for(ErrorCode code) noexcept;

// JSON REST front end over an Engine.
class HttpService {
 public:
  explicit HttpService(Engine& engine);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port; throws
  // BindFailure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();
  bool is_running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// "host:port" split; throws InvalidConfig.
std::pair<std::string, int> parse_listen_address(std::string_view address);

}  // namespace ragrade
