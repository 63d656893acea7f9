#include "ragrade/review.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "ragrade/error.hpp"

namespace ragrade {

using nlohmann::json;

namespace {
std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}
}  // namespace

GradingQueue::GradingQueue(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      items_.emplace_back(j.at("submission_id").get<std::string>(), j.at("enqueued_at").get<Timestamp>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::StoreLoadFailure, path_.string() + ": " + e.what());
    }
  }
}

void GradingQueue::persist_locked() const {
  std::string out;
  for (const auto& [id, at] : items_) out += json{{"submission_id", id}, {"enqueued_at", at}}.dump() + "\n";
  write_file_atomic(path_, out);
}

void GradingQueue::push(const std::string& submission_id, Timestamp at) {
  std::lock_guard lock(mutex_);
  items_.emplace_back(submission_id, at);
  try {
    persist_locked();
  } catch (...) {
    items_.pop_back();
    throw;
  }
}

std::optional<std::string> GradingQueue::pop() {
  std::lock_guard lock(mutex_);
  if (items_.empty()) return std::nullopt;
  auto front = items_.front();
  items_.erase(items_.begin());
  try {
    persist_locked();
  } catch (...) {
    items_.insert(items_.begin(), front);
    throw;
  }
  return front.first;
}

std::vector<std::string> GradingQueue::items() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, at] : items_) out.push_back(id);
  return out;
}

std::size_t GradingQueue::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

double approval_rate(const ApprovalCounts& counts) {
  if (counts.decided() == 0) throw Error(ErrorCode::NoDecidedAssessments, "no approved or rejected assessments");
  return static_cast<double>(counts.approved + counts.edited_and_approved) / static_cast<double>(counts.decided());
}

std::string approved_feedback_text(const Rubric& rubric, const Assessment& assessment) {
  std::string out;
  for (const auto& c : rubric.criteria) {
    auto it = std::find_if(assessment.criterion_scores.begin(), assessment.criterion_scores.end(),
                           [&](const CriterionScore& s) { return s.criterion_id == c.id; });
    if (it == assessment.criterion_scores.end()) continue;
    out += "## " + c.name + "\n" + it->comment + "\n\n";
  }
  out += "## Overall\n" + assessment.overall_comment;
  return out;
}

std::string diff_summary(const Rubric& rubric, const Assessment& before, std::span<const CriterionScore> scores,
                         std::string_view overall_comment) {
  std::vector<std::string> changes;
  for (const auto& c : rubric.criteria) {
    auto old_it = std::find_if(before.criterion_scores.begin(), before.criterion_scores.end(),
                               [&](const CriterionScore& s) { return s.criterion_id == c.id; });
    auto new_it =
        std::find_if(scores.begin(), scores.end(), [&](const CriterionScore& s) { return s.criterion_id == c.id; });
    if (old_it == before.criterion_scores.end() || new_it == scores.end()) continue;
    if (old_it->band != new_it->band) {
      changes.push_back(c.id + ": band " + std::string(to_string(old_it->band)) + " -> " +
                        std::string(to_string(new_it->band)));
    }
    if (old_it->percent != new_it->percent) {
      changes.push_back(c.id + ": percent " + fmt_num(old_it->percent) + " -> " + fmt_num(new_it->percent));
    }
    if (old_it->comment != new_it->comment) changes.push_back(c.id + ": comment edited");
  }
  if (before.overall_comment != overall_comment) changes.push_back("overall comment edited");
  if (changes.empty()) return "no changes";
  std::string out;
  for (const auto& ch : changes) {
    if (!out.empty()) out += "; ";
    out += ch;
  }
  return out;
}

ReviewService::ReviewService(AssessmentStore& assessments, CorpusStore& corpus, VectorIndex& index,
                             EmbeddingProvider& embedder, Rubric rubric, GradingQueue& queue, Clock clock)
    : assessments_(assessments),
      corpus_(corpus),
      index_(index),
      embedder_(embedder),
      rubric_(std::move(rubric)),
      queue_(queue),
      clock_(std::move(clock)) {
  intent_path_ = assessments_.path();
  intent_path_ += ".intent.json";
  recover();
}

void ReviewService::fault(std::string_view stage) const {
  if (fault_hook_) fault_hook_(stage);
}

std::vector<Assessment> ReviewService::list_pending(const std::optional<std::string>& cohort) const {
  std::vector<Assessment> out;
  for (auto& a : assessments_.all()) {
    if (a.status != AssessmentStatus::pending_review) continue;
    if (cohort && a.cohort != cohort) continue;
    out.push_back(std::move(a));
  }
  return out;
}

Assessment ReviewService::load_pending(std::string_view assessment_id) const {
  auto a = assessments_.find(assessment_id);
  if (!a) throw Error(ErrorCode::NotFound, "no assessment " + std::string(assessment_id));
  if (a->status != AssessmentStatus::pending_review) {
    throw Error(ErrorCode::InvalidState, "assessment " + a->id + " is " + std::string(to_string(a->status)) +
                                             ", not pending_review");
  }
  return *a;
}

void ReviewService::apply_intent(const Assessment& updated, const Document& doc) {
  index_.upsert(doc);
  fault("index_upserted");
  if (!corpus_.find(doc.id)) corpus_.put(doc);
  fault("corpus_written");
  auto current = assessments_.find(updated.id);
  if (!current || *current != updated) assessments_.put(updated);
  fault("assessment_written");
  std::error_code ec;
  std::filesystem::remove(intent_path_, ec);
}

Document ReviewService::commit_approval(Assessment updated, AuditEntry entry) {
  const auto now = entry.at;
  check_transition(updated.status, AssessmentStatus::approved);
  updated.status = AssessmentStatus::approved;
  updated.review_trail.push_back(entry);

  Document doc;
  doc.id = "fb-" + updated.id;
  doc.doc_type = DocType::approved_feedback;
  doc.text = approved_feedback_text(rubric_, updated);
  doc.source_name = "assessment:" + updated.id;
  doc.ingested_at = now;
  doc.cohort = updated.cohort;
  doc.provenance = Provenance{updated.submission_id, entry.reviewer_id, now};
  doc.embedding = embedder_.embed(doc.text);

  write_file_atomic(intent_path_, json{{"assessment", assessment_to_json(updated)},
                                       {"document", document_to_json(doc)}}
                                      .dump());
  fault("intent_written");
  apply_intent(updated, doc);
  return doc;
}

Document ReviewService::approve(std::string_view assessment_id, const std::string& reviewer_id) {
  std::lock_guard lock(mutex_);
  auto a = load_pending(assessment_id);
  return commit_approval(std::move(a), {clock_(), reviewer_id, AuditAction::approved, std::nullopt, std::nullopt});
}

Document ReviewService::edit_and_approve(std::string_view assessment_id, const std::string& reviewer_id,
                                         std::vector<CriterionScore> edited_scores,
                                         std::string edited_overall_comment) {
  std::lock_guard lock(mutex_);
  auto a = load_pending(assessment_id);
  for (const auto& s : edited_scores) {
    if (trim(s.comment).empty()) throw SchemaViolationError("comment", "empty for " + s.criterion_id);
  }
  if (trim(edited_overall_comment).empty()) throw SchemaViolationError("overall_comment", "empty");
  const double total = weighted_total(rubric_, edited_scores);

  // Store scores in rubric order.
  std::vector<CriterionScore> ordered;
  for (const auto& c : rubric_.criteria) {
    auto it = std::find_if(edited_scores.begin(), edited_scores.end(),
                           [&](const CriterionScore& s) { return s.criterion_id == c.id; });
    ordered.push_back(*it);
  }
  const auto summary = diff_summary(rubric_, a, ordered, edited_overall_comment);
  a.criterion_scores = std::move(ordered);
  a.overall_comment = std::move(edited_overall_comment);
  a.total_percent = total;
  return commit_approval(std::move(a),
                         {clock_(), reviewer_id, AuditAction::edited_and_approved, std::nullopt, summary});
}

void ReviewService::reject(std::string_view assessment_id, const std::string& reviewer_id, const std::string& reason,
                           bool request_regeneration) {
  std::lock_guard lock(mutex_);
  auto a = load_pending(assessment_id);
  if (trim(reason).empty()) throw Error(ErrorCode::EmptyReason, "a rejection needs a reason");
  check_transition(a.status, AssessmentStatus::rejected);
  const auto now = clock_();
  a.status = AssessmentStatus::rejected;
  a.review_trail.push_back({now, reviewer_id, AuditAction::rejected, reason, std::nullopt});
  if (request_regeneration) {
    a.review_trail.push_back({now, reviewer_id, AuditAction::regeneration_requested, std::nullopt, std::nullopt});
    queue_.push(a.submission_id, now);
  }
  assessments_.put(a);
}

ApprovalCounts ReviewService::counts(const std::optional<std::string>& cohort) const {
  ApprovalCounts c;
  for (const auto& a : assessments_.all()) {
    if (cohort && a.cohort != cohort) continue;
    switch (a.status) {
      case AssessmentStatus::approved: {
        const bool edited = std::any_of(a.review_trail.begin(), a.review_trail.end(), [](const AuditEntry& e) {
          return e.action == AuditAction::edited_and_approved;
        });
        ++(edited ? c.edited_and_approved : c.approved);
        break;
      }
      case AssessmentStatus::rejected: ++c.rejected; break;
      case AssessmentStatus::pending_review: ++c.pending; break;
      case AssessmentStatus::draft: break;
    }
  }
  return c;
}

double ReviewService::approval_rate(const std::optional<std::string>& cohort) const {
  return ragrade::approval_rate(counts(cohort));
}

bool ReviewService::recover() {
  std::lock_guard lock(mutex_);
  if (!std::filesystem::exists(intent_path_)) return false;
  json j;
  try {
    j = json::parse(read_file(intent_path_));
  } catch (const json::parse_error&) {
    // A torn intent write means the approval never started.
    std::filesystem::remove(intent_path_);
    return false;
  }
  apply_intent(assessment_from_json(j.at("assessment")), document_from_json(j.at("document")));
  return true;
}

}  // namespace ragrade
