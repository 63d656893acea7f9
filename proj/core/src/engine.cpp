#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "ragrade/service.hpp"

namespace ragrade {

using nlohmann::json;

void ServiceConfig::validate() const {
  if (corpus_path.empty() || index_path.empty() || assessment_store_path.empty()) {
    throw Error(ErrorCode::InvalidConfig, "corpus_path, index_path and assessment_store_path are required");
  }
  const auto c = std::filesystem::weakly_canonical(corpus_path);
  const auto i = std::filesystem::weakly_canonical(index_path);
  const auto a = std::filesystem::weakly_canonical(assessment_store_path);
  if (c == i || c == a || i == a || (rubric_path && (*rubric_path == c || *rubric_path == i || *rubric_path == a))) {
    throw Error(ErrorCode::InvalidConfig, "store paths must be distinct");
  }
  if (default_k < 1) throw Error(ErrorCode::InvalidConfig, "default_k must be at least 1");
  if (parallelism < 1) throw Error(ErrorCode::InvalidConfig, "parallelism must be at least 1");
  embedding.validate();
  parse_listen_address(listen_address);
}

namespace {
std::filesystem::path sibling(const std::filesystem::path& p, std::string_view suffix) {
  auto out = p;
  out += suffix;
  return out;
}
}  // namespace

std::filesystem::path ServiceConfig::submissions_path() const {
  return sibling(assessment_store_path, ".submissions.jsonl");
}
std::filesystem::path ServiceConfig::queue_path() const { return sibling(assessment_store_path, ".queue.jsonl"); }
std::filesystem::path ServiceConfig::human_scores_path() const {
  return sibling(assessment_store_path, ".human_scores.csv");
}

std::pair<std::string, int> parse_listen_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(ErrorCode::InvalidConfig, "listen_address must be host:port");
  }
  int port = -1;
  try {
    port = std::stoi(std::string(address.substr(colon + 1)));
  } catch (const std::exception&) {
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidConfig, "invalid port in listen_address");
  return {std::string(address.substr(0, colon)), port};
}

ServiceConfig service_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  auto path_of = [&](const json& v) {
    std::filesystem::path p = v.get<std::string>();
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  auto opt_str = [](const json& obj, const char* key) -> std::optional<std::string> {
    if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
    return obj[key].get<std::string>();
  };
  ServiceConfig c;
  try {
    c.listen_address = j.value("listen_address", c.listen_address);
    c.corpus_path = path_of(j.at("corpus_path"));
    c.index_path = path_of(j.at("index_path"));
    c.assessment_store_path = path_of(j.at("assessment_store_path"));
    if (j.contains("rubric_path") && !j["rubric_path"].is_null()) c.rubric_path = path_of(j["rubric_path"]);
    c.default_k = j.value("default_k", c.default_k);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.auto_approve = j.value("auto_approve", c.auto_approve);
    c.auth_token_env_var = opt_str(j, "auth_token_env_var");

    if (j.contains("embedding")) {
      const auto& e = j["embedding"];
      const auto kind = e.value("provider_kind", std::string("reference"));
      if (kind == "remote") c.embedding.provider_kind = EmbeddingProviderKind::remote;
      else if (kind != "reference") throw Error(ErrorCode::InvalidConfig, "unknown embedding provider " + kind);
      c.embedding.dims = e.value("dims", c.embedding.dims);
      c.embedding.endpoint_url = opt_str(e, "endpoint_url");
      c.embedding.auth_token_env_var = opt_str(e, "auth_token_env_var");
      c.embedding.timeout = std::chrono::milliseconds(e.value("timeout_ms", c.embedding.timeout.count()));
      c.embedding.max_retries = e.value("max_retries", c.embedding.max_retries);
      c.embedding.max_in_flight = e.value("max_in_flight", c.embedding.max_in_flight);
    }
    if (j.contains("llm")) {
      const auto& l = j["llm"];
      const auto kind = l.value("provider_kind", std::string("scripted"));
      if (kind == "remote") c.llm.provider_kind = LlmProviderKind::remote;
      else if (kind != "scripted") throw Error(ErrorCode::InvalidConfig, "unknown llm provider " + kind);
      c.llm.endpoint_url = opt_str(l, "endpoint_url");
      c.llm.auth_token_env_var = opt_str(l, "auth_token_env_var");
      if (l.contains("script_path") && !l["script_path"].is_null()) c.llm.script_path = path_of(l["script_path"]);
      c.llm.temperature = l.value("temperature", c.llm.temperature);
      c.llm.max_output_repair_attempts = l.value("max_output_repair_attempts", c.llm.max_output_repair_attempts);
      c.llm.timeout = std::chrono::milliseconds(l.value("timeout_ms", c.llm.timeout.count()));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return service_config_from_json(j, path.parent_path());
}

json batch_summary_to_json(const BatchSummary& summary) {
  json failures = json::array();
  for (const auto& f : summary.failures) {
    failures.push_back({{"submission_id", f.submission_id},
                        {"file", f.file},
                        {"code", std::string(to_string(f.code))},
                        {"reason", f.reason}});
  }
  return {{"graded", summary.graded},
          {"failed", summary.failed},
          {"assessment_ids", summary.assessment_ids},
          {"failures", failures}};
}

Engine::Engine(ServiceConfig config) : Engine(std::move(config), Options{}) {}

Engine::Engine(ServiceConfig config, Options options) : config_(std::move(config)), options_(std::move(options)) {
  config_.validate();
  rubric_ = config_.rubric_path ? load_rubric(*config_.rubric_path) : default_rubric();
  embedder_ = make_embedding_provider(config_.embedding);
  llm_ = options_.llm ? options_.llm : std::shared_ptr<LlmProvider>(make_llm_provider(config_.llm));

  try {
    corpus_ = std::make_unique<CorpusStore>(config_.corpus_path, options_.clock, options_.ids);
    index_ = VectorIndex::open(config_.index_path, config_.embedding.dims);
    assessments_ = std::make_unique<AssessmentStore>(config_.assessment_store_path);
    submissions_ = std::make_unique<SubmissionStore>(config_.submissions_path());
    queue_ = std::make_unique<GradingQueue>(config_.queue_path());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StoreLoadFailure) throw;
    throw Error(ErrorCode::StoreLoadFailure, e.what());
  }
  review_ = std::make_unique<ReviewService>(*assessments_, *corpus_, *index_, *embedder_, rubric_, *queue_,
                                            options_.clock);
  grader_ = std::make_unique<Grader>(*embedder_, *index_, *llm_, *assessments_, config_.llm, options_.clock,
                                     options_.ids);
}

Document Engine::ingest_text(std::string_view text, DocType doc_type, std::string source_name,
                             std::optional<std::string> cohort) {
  if (trim(text).empty()) throw Error(ErrorCode::EmptyDocument, "document text is blank");
  auto embedding = embedder_->embed(trim(text));
  std::lock_guard lock(ingest_mutex_);
  auto doc = corpus_->ingest_document(text, doc_type, std::move(source_name), std::move(cohort));
  doc.embedding = std::move(embedding);
  index_->upsert(doc);
  corpus_->put(doc);
  return doc;
}

ScanResult Engine::ingest_directory(const std::filesystem::path& dir, std::optional<DocType> default_type) {
  std::lock_guard lock(ingest_mutex_);
  auto result = corpus_->scan_inbox(dir, default_type);
  std::vector<Document> indexed;
  for (auto& doc : result.documents) {
    try {
      doc.embedding = embedder_->embed(doc.text);
      index_->upsert(doc);
      corpus_->put(doc);
      indexed.push_back(std::move(doc));
    } catch (const Error& e) {
      result.errors.push_back({dir / doc.source_name, e.code(), e.what()});
    }
  }
  result.documents = std::move(indexed);
  return result;
}

Submission Engine::create_submission(std::string student_ref, std::string essay_text,
                                     std::optional<std::string> cohort, std::optional<std::string> id) {
  auto s = make_submission(id ? *id : options_.ids->next("sub"), std::move(student_ref), std::move(essay_text),
                           options_.clock(), std::move(cohort));
  submissions_->put(s);
  return s;
}

Assessment Engine::grade_submission(std::string_view submission_id, std::optional<std::size_t> k) {
  const auto submission = submissions_->find(submission_id);
  if (!submission) throw Error(ErrorCode::NotFound, "no submission " + std::string(submission_id));
  auto a = grader_->grade(*submission, rubric_, k.value_or(config_.default_k));
  if (config_.auto_approve) {
    review_->approve(a.id, "auto");
    a = *assessments_->find(a.id);
  }
  return a;
}

namespace {
template <class Job>
void run_bounded(std::size_t jobs, std::size_t parallelism, Job&& job) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) job(i);
  };
  const auto threads = std::min(parallelism, jobs);
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  if (threads > 0) worker();
}

struct JobOutcome {
  std::optional<std::string> assessment_id;
  std::optional<BatchFailure> failure;
};

void tally(BatchSummary& summary, std::vector<JobOutcome>& outcomes) {
  for (auto& o : outcomes) {
    if (o.assessment_id) {
      ++summary.graded;
      summary.assessment_ids.push_back(std::move(*o.assessment_id));
    } else if (o.failure) {
      ++summary.failed;
      summary.failures.push_back(std::move(*o.failure));
    }
  }
}
}  // namespace

BatchSummary Engine::grade_batch(const std::filesystem::path& dir, std::optional<std::size_t> k) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + dir.string() + ": " + ec.message());
  for (const auto& entry : it) {
    const auto name = entry.path().filename().string();
    std::error_code dir_ec;
    if (name.empty() || name.front() == '.' || entry.is_directory(dir_ec)) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<JobOutcome> outcomes(files.size());
  run_bounded(files.size(), config_.parallelism, [&](std::size_t i) {
    const auto& file = files[i];
    const auto id = file.stem().string();
    try {
      const auto raw = read_file(file);
      if (!is_valid_utf8(raw)) throw Error(ErrorCode::InvalidEncoding, "file is not valid UTF-8");
      create_submission(id, raw, std::nullopt, id);
      outcomes[i].assessment_id = grade_submission(id, k).id;
    } catch (const Error& e) {
      outcomes[i].failure = BatchFailure{id, file.filename().string(), e.code(), e.what()};
    }
  });

  BatchSummary summary;
  tally(summary, outcomes);
  return summary;
}

BatchSummary Engine::drain_regeneration_queue(std::optional<std::size_t> k) {
  std::vector<std::string> ids;
  while (auto id = queue_->pop()) ids.push_back(std::move(*id));
  std::vector<JobOutcome> outcomes(ids.size());
  run_bounded(ids.size(), config_.parallelism, [&](std::size_t i) {
    try {
      outcomes[i].assessment_id = grade_submission(ids[i], k).id;
    } catch (const Error& e) {
      outcomes[i].failure = BatchFailure{ids[i], {}, e.code(), e.what()};
    }
  });
  BatchSummary summary;
  tally(summary, outcomes);
  return summary;
}

std::size_t Engine::store_human_scores(std::string_view csv) {
  const auto parsed = stats::parse_pairs_csv(csv, false);
  for (double v : parsed.rater_a) {
    if (!(v >= 0.0 && v <= 100.0)) throw Error(ErrorCode::PercentOutOfRange, "human score outside [0, 100]");
  }
  write_file_atomic(config_.human_scores_path(), csv);
  return parsed.rater_a.size();
}

stats::ReliabilityReport Engine::reliability(const std::optional<std::string>& cohort) const {
  if (!std::filesystem::exists(config_.human_scores_path())) {
    throw Error(ErrorCode::NotFound, "no human scores uploaded");
  }
  const auto human = stats::parse_pairs_csv(read_file(config_.human_scores_path()), false);
  std::map<std::string, double> human_by_id;
  for (std::size_t i = 0; i < human.labels.size(); ++i) human_by_id[human.labels[i]] = human.rater_a[i];

  // all() is ordered by generated_at, so the last write per submission wins.
  std::map<std::string, double> machine_by_id;
  for (const auto& a : assessments_->all()) {
    if (cohort && a.cohort != cohort) continue;
    machine_by_id[a.submission_id] = a.machine_total_percent;
  }

  stats::PairedScores pairs;
  for (const auto& [id, machine] : machine_by_id) {
    auto h = human_by_id.find(id);
    if (h == human_by_id.end()) continue;
    pairs.labels.push_back(id);
    pairs.rater_a.push_back(h->second);
    pairs.rater_b.push_back(machine);
  }
  if (pairs.rater_a.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "fewer than two submissions have both human and machine scores");
  }
  const auto counts = review_->counts(cohort);
  std::optional<stats::ApprovalTally> tally;
  if (counts.decided() > 0) tally = stats::ApprovalTally{counts.approved + counts.edited_and_approved, counts.decided()};
  return stats::reliability_report(pairs, stats::default_total_bands(), tally);
}

}  // namespace ragrade
