#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragrade/assessment.hpp"
#include "ragrade/corpus.hpp"
#include "ragrade/embedding.hpp"
#include "ragrade/rubric.hpp"
#include "ragrade/vindex.hpp"

namespace ragrade {

// Submissions waiting to be (re)graded, persisted as one JSON line per entry.
class GradingQueue {
 public:
  explicit GradingQueue(std::filesystem::path path);

  void push(const std::string& submission_id, Timestamp at);
  std::optional<std::string> pop();
  std::vector<std::string> items() const;
  std::size_t size() const;

 private:
  void persist_locked() const;

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<std::pair<std::string, Timestamp>> items_;
};

struct ApprovalCounts {
  std::size_t approved = 0;
  std::size_t edited_and_approved = 0;
  std::size_t rejected = 0;
  std::size_t pending = 0;

  std::size_t decided() const noexcept { return approved + edited_and_approved + rejected; }
};

// (approved + edited) / decided. Throws NoDecidedAssessments.
double approval_rate(const ApprovalCounts& counts);

// Body of a re-ingested feedback document: "## <criterion name>" then the
// comment for each criterion, then "## Overall" and the overall comment.
std::string approved_feedback_text(const Rubric& rubric, const Assessment& assessment);

// Human-readable list of score/comment changes, or "no changes".
std::string diff_summary(const Rubric& rubric, const Assessment& before, std::span<const CriterionScore> scores,
                         std::string_view overall_comment);

// The human-in-the-loop decisions. An approval touches three stores (index,
// corpus, assessments); it is first written as an intent record next to the
// assessment store and replayed by recover() if the process dies mid-way.
class ReviewService {
 public:
  // Called with a stage name after each durable step of an approval; tests
  // throw from it to simulate a crash.
  using FaultHook = std::function<void(std::string_view stage)>;

  ReviewService(AssessmentStore& assessments, CorpusStore& corpus, VectorIndex& index, EmbeddingProvider& embedder,
                Rubric rubric, GradingQueue& queue, Clock clock = system_clock_seconds);

  // Assessments in pending_review, oldest first.
  std::vector<Assessment> list_pending(const std::optional<std::string>& cohort = std::nullopt) const;

  // Throws NotFound or InvalidState.
  Document approve(std::string_view assessment_id, const std::string& reviewer_id);

  // Also throws MissingCriterionScore, ExtraCriterionScore,
  // BandPercentMismatch, PercentOutOfRange or SchemaViolation (blank comment);
  // the assessment is untouched on error.
  Document edit_and_approve(std::string_view assessment_id, const std::string& reviewer_id,
                            std::vector<CriterionScore> edited_scores, std::string edited_overall_comment);

  // Throws NotFound, InvalidState or EmptyReason.
  void reject(std::string_view assessment_id, const std::string& reviewer_id, const std::string& reason,
              bool request_regeneration);

  ApprovalCounts counts(const std::optional<std::string>& cohort = std::nullopt) const;
  double approval_rate(const std::optional<std::string>& cohort = std::nullopt) const;

  // Replays an interrupted approval, if any. Returns true when one was found.
  bool recover();

  void set_fault_hook(FaultHook hook) { fault_hook_ = std::move(hook); }

  const std::filesystem::path& intent_path() const noexcept { return intent_path_; }

 private:
  Assessment load_pending(std::string_view assessment_id) const;
  Document commit_approval(Assessment updated, AuditEntry entry);
  void apply_intent(const Assessment& updated, const Document& doc);
  void fault(std::string_view stage) const;

  AssessmentStore& assessments_;
  CorpusStore& corpus_;
  VectorIndex& index_;
  EmbeddingProvider& embedder_;
  Rubric rubric_;
  GradingQueue& queue_;
  Clock clock_;
  std::filesystem::path intent_path_;
  FaultHook fault_hook_;
  mutable std::mutex mutex_;
};

}  // namespace ragrade
