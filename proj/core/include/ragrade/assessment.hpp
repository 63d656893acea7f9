#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "ragrade/rubric.hpp"
#include "ragrade/util.hpp"
#include "ragrade/vindex.hpp"

namespace ragrade {

inline constexpr std::size_t kMinEssayWords = 800;
inline constexpr std::size_t kMaxEssayWords = 1000;

struct Submission {
  std::string id;
  std::string student_ref;
  std::string essay_text;
  std::size_t word_count = 0;
  Timestamp submitted_at = 0;
  std::optional<std::string> cohort;

  // Set when the essay falls outside the expected 800–1,000 words.
  bool length_flag() const noexcept { return word_count < kMinEssayWords || word_count > kMaxEssayWords; }

  bool operator==(const Submission&) const = default;
};

// Throws InvalidSubmission for a blank essay or id.
Submission make_submission(std::string id, std::string student_ref, std::string essay_text,
                           Timestamp submitted_at, std::optional<std::string> cohort = std::nullopt);

enum class AssessmentStatus { draft, pending_review, approved, rejected };
enum class AuditAction { submitted, approved, edited_and_approved, rejected, regeneration_requested };

std::string_view to_string(AssessmentStatus status) noexcept;
std::string_view to_string(AuditAction action) noexcept;
AssessmentStatus parse_assessment_status(std::string_view name);
AuditAction parse_audit_action(std::string_view name);

// The review state machine: draft -> pending_review -> {approved, rejected}.
bool is_legal_transition(AssessmentStatus from, AssessmentStatus to) noexcept;
// Throws InvalidState for anything is_legal_transition rejects.
void check_transition(AssessmentStatus from, AssessmentStatus to);

struct AuditEntry {
  Timestamp at = 0;
  std::string reviewer_id;
  AuditAction action = AuditAction::submitted;
  std::optional<std::string> note;
  std::optional<std::string> diff_summary;

  bool operator==(const AuditEntry&) const = default;
};

struct Assessment {
  std::string id;
  std::string submission_id;
  std::string rubric_id;
  std::vector<CriterionScore> criterion_scores;
  std::string overall_comment;
  double total_percent = 0.0;
  // Engine total of the model's scores at grading time; kept when a reviewer
  // edits so reliability reports compare against the machine grade.
  double machine_total_percent = 0.0;
  std::vector<RetrievalResult> evidence;
  Timestamp generated_at = 0;
  std::string model_label;
  AssessmentStatus status = AssessmentStatus::draft;
  std::vector<AuditEntry> review_trail;
  std::optional<std::string> cohort;

  bool operator==(const Assessment&) const = default;
};

nlohmann::json criterion_score_to_json(const CriterionScore& s);
CriterionScore criterion_score_from_json(const nlohmann::json& j);
nlohmann::json retrieval_result_to_json(const RetrievalResult& r);
nlohmann::json assessment_to_json(const Assessment& a);
Assessment assessment_from_json(const nlohmann::json& j);
nlohmann::json submission_to_json(const Submission& s);
Submission submission_from_json(const nlohmann::json& j);

struct GradingFailure {
  std::string submission_id;
  ErrorCode code;
  std::string message;
  Timestamp at = 0;
};

// JSON-lines assessment store. Each put appends the full record; the last
// record per id wins on load. Failed grading attempts go to a sibling
// `<path>.failures.jsonl` for operator attention.
class AssessmentStore {
 public:
  explicit AssessmentStore(std::filesystem::path path);

  AssessmentStore(const AssessmentStore&) = delete;
  AssessmentStore& operator=(const AssessmentStore&) = delete;

  void put(const Assessment& a);
  std::optional<Assessment> find(std::string_view id) const;
  // Ordered by (generated_at, id).
  std::vector<Assessment> all() const;
  std::size_t size() const;

  void record_failure(const GradingFailure& failure);
  std::vector<GradingFailure> failures() const;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::filesystem::path failures_path_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Assessment, std::less<>> records_;
  std::vector<GradingFailure> failures_;
};

class SubmissionStore {
 public:
  explicit SubmissionStore(std::filesystem::path path);

  SubmissionStore(const SubmissionStore&) = delete;
  SubmissionStore& operator=(const SubmissionStore&) = delete;

  void put(const Submission& s);
  std::optional<Submission> find(std::string_view id) const;
  std::vector<Submission> all() const;  // ordered by id
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Submission, std::less<>> records_;
};

}  // namespace ragrade
