#include "ragrade/assessment.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>

namespace ragrade {

using nlohmann::json;

Submission make_submission(std::string id, std::string student_ref, std::string essay_text,
                           Timestamp submitted_at, std::optional<std::string> cohort) {
  if (trim(id).empty()) throw Error(ErrorCode::InvalidSubmission, "submission id is blank");
  if (trim(essay_text).empty()) throw Error(ErrorCode::InvalidSubmission, "essay text is blank");
  Submission s;
  s.id = std::move(id);
  s.student_ref = std::move(student_ref);
  s.word_count = whitespace_word_count(essay_text);
  s.essay_text = std::move(essay_text);
  s.submitted_at = submitted_at;
  s.cohort = std::move(cohort);
  return s;
}

std::string_view to_string(AssessmentStatus status) noexcept {
  switch (status) {
    case AssessmentStatus::draft: return "draft";
    case AssessmentStatus::pending_review: return "pending_review";
    case AssessmentStatus::approved: return "approved";
    case AssessmentStatus::rejected: return "rejected";
  }
  return "unknown";
}

std::string_view to_string(AuditAction action) noexcept {
  switch (action) {
    case AuditAction::submitted: return "submitted";
    case AuditAction::approved: return "approved";
    case AuditAction::edited_and_approved: return "edited_and_approved";
    case AuditAction::rejected: return "rejected";
    case AuditAction::regeneration_requested: return "regeneration_requested";
  }
  return "unknown";
}

AssessmentStatus parse_assessment_status(std::string_view name) {
  for (auto s : {AssessmentStatus::draft, AssessmentStatus::pending_review, AssessmentStatus::approved,
                 AssessmentStatus::rejected}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::InvalidInput, "unknown assessment status '" + std::string(name) + "'");
}

AuditAction parse_audit_action(std::string_view name) {
  for (auto a : {AuditAction::submitted, AuditAction::approved, AuditAction::edited_and_approved,
                 AuditAction::rejected, AuditAction::regeneration_requested}) {
    if (to_string(a) == name) return a;
  }
  throw Error(ErrorCode::InvalidInput, "unknown audit action '" + std::string(name) + "'");
}

bool is_legal_transition(AssessmentStatus from, AssessmentStatus to) noexcept {
  using S = AssessmentStatus;
  return (from == S::draft && to == S::pending_review) ||
         (from == S::pending_review && (to == S::approved || to == S::rejected));
}

void check_transition(AssessmentStatus from, AssessmentStatus to) {
  if (!is_legal_transition(from, to)) {
    throw Error(ErrorCode::InvalidState, "illegal transition " + std::string(to_string(from)) + " -> " +
                                             std::string(to_string(to)));
  }
}

namespace {
json opt_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> read_opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}
}  // namespace

json criterion_score_to_json(const CriterionScore& s) {
  return {{"criterion_id", s.criterion_id},
          {"band", std::string(to_string(s.band))},
          {"percent", s.percent},
          {"comment", s.comment}};
}

CriterionScore criterion_score_from_json(const json& j) {
  try {
    return {j.at("criterion_id").get<std::string>(), parse_band_label(j.at("band").get<std::string>()),
            j.at("percent").get<double>(), j.at("comment").get<std::string>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("malformed criterion score: ") + e.what());
  }
}

json retrieval_result_to_json(const RetrievalResult& r) {
  return {{"doc_id", r.doc_id},
          {"doc_type", std::string(to_string(r.doc_type))},
          {"similarity", r.similarity},
          {"rank", r.rank}};
}

json assessment_to_json(const Assessment& a) {
  json scores = json::array();
  for (const auto& s : a.criterion_scores) scores.push_back(criterion_score_to_json(s));
  json evidence = json::array();
  for (const auto& r : a.evidence) evidence.push_back(retrieval_result_to_json(r));
  json trail = json::array();
  for (const auto& e : a.review_trail) {
    trail.push_back({{"at", e.at},
                     {"reviewer_id", e.reviewer_id},
                     {"action", std::string(to_string(e.action))},
                     {"note", opt_string(e.note)},
                     {"diff_summary", opt_string(e.diff_summary)}});
  }
  return {{"id", a.id},
          {"submission_id", a.submission_id},
          {"rubric_id", a.rubric_id},
          {"criterion_scores", scores},
          {"overall_comment", a.overall_comment},
          {"total_percent", a.total_percent},
          {"machine_total_percent", a.machine_total_percent},
          {"evidence", evidence},
          {"generated_at", a.generated_at},
          {"model_label", a.model_label},
          {"status", std::string(to_string(a.status))},
          {"review_trail", trail},
          {"cohort", opt_string(a.cohort)}};
}

Assessment assessment_from_json(const json& j) {
  try {
    Assessment a;
    a.id = j.at("id").get<std::string>();
    a.submission_id = j.at("submission_id").get<std::string>();
    a.rubric_id = j.at("rubric_id").get<std::string>();
    for (const auto& s : j.at("criterion_scores")) a.criterion_scores.push_back(criterion_score_from_json(s));
    a.overall_comment = j.at("overall_comment").get<std::string>();
    a.total_percent = j.at("total_percent").get<double>();
    a.machine_total_percent = j.value("machine_total_percent", a.total_percent);
    for (const auto& r : j.at("evidence")) {
      a.evidence.push_back({r.at("doc_id").get<std::string>(), parse_doc_type(r.at("doc_type").get<std::string>()),
                            r.at("similarity").get<double>(), r.at("rank").get<std::size_t>()});
    }
    a.generated_at = j.at("generated_at").get<Timestamp>();
    a.model_label = j.at("model_label").get<std::string>();
    a.status = parse_assessment_status(j.at("status").get<std::string>());
    for (const auto& e : j.at("review_trail")) {
      a.review_trail.push_back({e.at("at").get<Timestamp>(), e.at("reviewer_id").get<std::string>(),
                                parse_audit_action(e.at("action").get<std::string>()), read_opt_string(e, "note"),
                                read_opt_string(e, "diff_summary")});
    }
    a.cohort = read_opt_string(j, "cohort");
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("malformed assessment record: ") + e.what());
  }
}

json submission_to_json(const Submission& s) {
  return {{"id", s.id},
          {"student_ref", s.student_ref},
          {"essay_text", s.essay_text},
          {"word_count", s.word_count},
          {"length_flag", s.length_flag()},
          {"submitted_at", s.submitted_at},
          {"cohort", opt_string(s.cohort)}};
}

Submission submission_from_json(const json& j) {
  try {
    return make_submission(j.at("id").get<std::string>(), j.value("student_ref", std::string{}),
                           j.at("essay_text").get<std::string>(), j.value("submitted_at", Timestamp{0}),
                           read_opt_string(j, "cohort"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("malformed submission record: ") + e.what());
  }
}

namespace {
template <class F>
void for_each_record(const std::filesystem::path& path, F&& f) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StoreLoadFailure, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      f(json::parse(line));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::StoreLoadFailure, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}
}  // namespace

AssessmentStore::AssessmentStore(std::filesystem::path path) : path_(std::move(path)) {
  failures_path_ = path_;
  failures_path_ += ".failures.jsonl";
  for_each_record(path_, [&](const json& j) {
    auto a = assessment_from_json(j);
    records_.insert_or_assign(a.id, std::move(a));
  });
  for_each_record(failures_path_, [&](const json& j) {
    failures_.push_back({j.at("submission_id").get<std::string>(),
                         parse_error_code(j.at("code").get<std::string>()), j.at("message").get<std::string>(),
                         j.at("at").get<Timestamp>()});
  });
}

void AssessmentStore::put(const Assessment& a) {
  std::unique_lock lock(mutex_);
  append_line(path_, assessment_to_json(a).dump());
  records_.insert_or_assign(a.id, a);
}

std::optional<Assessment> AssessmentStore::find(std::string_view id) const {
  std::shared_lock lock(mutex_);
  if (auto it = records_.find(id); it != records_.end()) return it->second;
  return std::nullopt;
}

std::vector<Assessment> AssessmentStore::all() const {
  std::shared_lock lock(mutex_);
  std::vector<Assessment> out;
  out.reserve(records_.size());
  for (const auto& [id, a] : records_) out.push_back(a);
  lock.unlock();
  std::stable_sort(out.begin(), out.end(), [](const Assessment& x, const Assessment& y) {
    return x.generated_at != y.generated_at ? x.generated_at < y.generated_at : x.id < y.id;
  });
  return out;
}

std::size_t AssessmentStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

void AssessmentStore::record_failure(const GradingFailure& failure) {
  std::unique_lock lock(mutex_);
  append_line(failures_path_, json{{"submission_id", failure.submission_id},
                                   {"code", std::string(to_string(failure.code))},
                                   {"message", failure.message},
                                   {"at", failure.at}}
                                  .dump());
  failures_.push_back(failure);
}

std::vector<GradingFailure> AssessmentStore::failures() const {
  std::shared_lock lock(mutex_);
  return failures_;
}

SubmissionStore::SubmissionStore(std::filesystem::path path) : path_(std::move(path)) {
  for_each_record(path_, [&](const json& j) {
    auto s = submission_from_json(j);
    records_.insert_or_assign(s.id, std::move(s));
  });
}

void SubmissionStore::put(const Submission& s) {
  std::unique_lock lock(mutex_);
  append_line(path_, submission_to_json(s).dump());
  records_.insert_or_assign(s.id, s);
}

std::optional<Submission> SubmissionStore::find(std::string_view id) const {
  std::shared_lock lock(mutex_);
  if (auto it = records_.find(id); it != records_.end()) return it->second;
  return std::nullopt;
}

std::vector<Submission> SubmissionStore::all() const {
  std::shared_lock lock(mutex_);
  std::vector<Submission> out;
  for (const auto& [id, s] : records_) out.push_back(s);
  return out;
}

std::size_t SubmissionStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

}  // namespace ragrade
