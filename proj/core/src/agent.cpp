#include "ragrade/agent.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <nlohmann/json.hpp>
#include <set>

#include "ragrade/error.hpp"

namespace ragrade {

using nlohmann::json;

namespace {

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fmt_similarity(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

constexpr std::string_view kSystemText =
    "You are an assessment assistant for a university engineering course. Grade the student essay "
    "using only the rubric and the reference materials supplied in this prompt. Do not draw on "
    "outside knowledge or invent facts about the essay. For every rubric criterion choose exactly one "
    "performance band and a percent that lies inside that band's range, and write a specific, "
    "constructive comment grounded in the essay and the supplied materials. Do not compute a total; "
    "the grading engine does that. Reply with the JSON object described in the output contract and "
    "nothing else.";

// Index one past the '}' matching the '{' at `open`, or npos.
std::size_t match_object(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

json extract_object(std::string_view raw) {
  std::size_t pos = raw.find('{');
  while (pos != std::string_view::npos) {
    const auto end = match_object(raw, pos);
    if (end != std::string_view::npos) {
      try {
        auto j = json::parse(raw.substr(pos, end - pos));
        if (j.is_object()) return j;
      } catch (const json::parse_error&) {
      }
    }
    pos = raw.find('{', pos + 1);
  }
  throw Error(ErrorCode::NoJsonObject, "model output contains no JSON object");
}

std::string correction_note(const Error& e) {
  std::string note =
      "\n\n# Correction\n\nYour previous reply was rejected by the grading engine: [" +
      std::string(to_string(e.code())) + "] " + e.what() + ".";
  if (e.code() == ErrorCode::BandPercentMismatch) {
    note += " Choose a percent inside the range of the band you name for that criterion, or name the band "
            "whose range contains the percent.";
  }
  note += " Reply again with a single JSON object that follows the output contract exactly.";
  return note;
}

}  // namespace

std::string_view to_string(SectionRole role) noexcept {
  switch (role) {
    case SectionRole::rubric: return "rubric";
    case SectionRole::evidence: return "evidence";
    case SectionRole::essay: return "essay";
    case SectionRole::output_contract: return "output_contract";
  }
  return "unknown";
}

std::string Prompt::render() const {
  std::string out;
  for (const auto& s : sections) {
    out += "# ";
    out += s.heading;
    out += "\n\n";
    out += s.body;
    out += "\n\n";
  }
  return out;
}

EmbeddingVector build_retrieval_query(const Submission& submission, EmbeddingProvider& embedder) {
  return embedder.embed(submission.essay_text);
}

Prompt assemble_prompt(const Submission& submission, const Rubric& rubric,
                       std::span<const RetrievalResult> evidence, std::span<const std::string> evidence_texts) {
  if (evidence.size() != evidence_texts.size()) {
    throw Error(ErrorCode::EvidenceMismatch, std::to_string(evidence.size()) + " evidence entries but " +
                                                 std::to_string(evidence_texts.size()) + " texts");
  }
  Prompt prompt;
  prompt.system_text = std::string(kSystemText);

  for (const auto& c : rubric.criteria) {
    std::string body = "Criterion id: " + c.id + "\nWeight: " + fmt_num(c.weight_percent) + "%\nBands:\n";
    for (const auto& interval : band_intervals(c.bands)) {
      const auto band = std::find_if(c.bands.begin(), c.bands.end(),
                                     [&](const Band& b) { return b.label == interval.label; });
      body += "- " + std::string(to_string(interval.label)) + " [" + fmt_num(interval.lo) + ", " +
              fmt_num(interval.hi) + (interval.closed_hi ? "]" : ")") + ": " + band->descriptor + "\n";
    }
    body.pop_back();
    prompt.sections.push_back({SectionRole::rubric, "Rubric criterion: " + c.name, std::move(body)});
  }

  std::vector<std::size_t> order(evidence.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(evidence[a].similarity, evidence[a].doc_id, evidence[b].similarity, evidence[b].doc_id);
  });
  for (std::size_t n = 0; n < order.size(); ++n) {
    const auto& r = evidence[order[n]];
    prompt.sections.push_back({SectionRole::evidence,
                               "Reference " + std::to_string(n + 1) + ": " + std::string(to_string(r.doc_type)) +
                                   " " + r.doc_id + " (similarity " + fmt_similarity(r.similarity) + ")",
                               evidence_texts[order[n]]});
  }

  prompt.sections.push_back({SectionRole::essay, "Student essay " + submission.id, submission.essay_text});

  std::string contract =
      "Reply with exactly one JSON object of this form:\n" + std::string(kOutputSchema) +
      "\nInclude one entry in \"criteria\" for each of these criterion ids, each exactly once: ";
  for (std::size_t i = 0; i < rubric.criteria.size(); ++i) {
    if (i > 0) contract += ", ";
    contract += rubric.criteria[i].id;
  }
  contract +=
      ".\n\"band\" must be one of Excellent, Good, Satisfactory, NeedsImprovement, and \"percent\" must be a "
      "number inside that band's range for the criterion. \"comment\" and \"overall_comment\" must be "
      "non-empty.";
  prompt.sections.push_back({SectionRole::output_contract, "Output contract", std::move(contract)});
  return prompt;
}

AgentDraft parse_agent_output(std::string_view raw, const Rubric& rubric) {
  const json j = extract_object(raw);

  if (!j.contains("criteria") || !j["criteria"].is_array()) {
    throw SchemaViolationError("criteria", "missing or not an array");
  }
  const auto& entries = j["criteria"];
  if (entries.size() != rubric.criteria.size()) {
    throw SchemaViolationError("criteria", "expected " + std::to_string(rubric.criteria.size()) + " entries, got " +
                                               std::to_string(entries.size()));
  }

  std::vector<CriterionScore> parsed;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!e.is_object()) throw SchemaViolationError("criteria", "entry is not an object");
    if (!e.contains("criterion_id") || !e["criterion_id"].is_string()) {
      throw SchemaViolationError("criterion_id", "missing or not a string");
    }
    CriterionScore s;
    s.criterion_id = e["criterion_id"].get<std::string>();
    if (rubric.find(s.criterion_id) == nullptr) {
      throw Error(ErrorCode::UnknownCriterion, "unknown criterion_id '" + s.criterion_id + "'");
    }
    if (!seen.insert(s.criterion_id).second) {
      throw SchemaViolationError("criteria", "criterion_id '" + s.criterion_id + "' appears more than once");
    }
    if (!e.contains("band") || !e["band"].is_string()) {
      throw SchemaViolationError("band", "missing or not a string for " + s.criterion_id);
    }
    try {
      s.band = parse_band_label(e["band"].get<std::string>());
    } catch (const Error&) {
      throw SchemaViolationError("band", "'" + e["band"].get<std::string>() + "' is not a band label");
    }
    if (!e.contains("percent") || !e["percent"].is_number()) {
      throw SchemaViolationError("percent", "missing or not a number for " + s.criterion_id);
    }
    s.percent = e["percent"].get<double>();
    if (!(s.percent >= 0.0 && s.percent <= 100.0)) {
      throw SchemaViolationError("percent", fmt_num(s.percent) + " outside [0, 100] for " + s.criterion_id);
    }
    if (!e.contains("comment") || !e["comment"].is_string() || trim(e["comment"].get<std::string>()).empty()) {
      throw SchemaViolationError("comment", "missing or empty for " + s.criterion_id);
    }
    s.comment = std::string(trim(e["comment"].get<std::string>()));
    parsed.push_back(std::move(s));
  }
  if (!j.contains("overall_comment") || !j["overall_comment"].is_string() ||
      trim(j["overall_comment"].get<std::string>()).empty()) {
    throw SchemaViolationError("overall_comment", "missing or empty");
  }

  AgentDraft draft;
  draft.overall_comment = std::string(trim(j["overall_comment"].get<std::string>()));
  for (const auto& c : rubric.criteria) {
    auto it = std::find_if(parsed.begin(), parsed.end(), [&](const CriterionScore& s) { return s.criterion_id == c.id; });
    check_band_percent(c, it->band, it->percent);
    draft.scores.push_back(std::move(*it));
  }
  return draft;
}

Grader::Grader(EmbeddingProvider& embedder, const VectorIndex& index, LlmProvider& llm, AssessmentStore& store,
               LlmProviderConfig config, Clock clock, std::shared_ptr<IdGenerator> ids)
    : embedder_(embedder),
      index_(index),
      llm_(llm),
      store_(store),
      config_(std::move(config)),
      clock_(std::move(clock)),
      ids_(std::move(ids)) {}

Assessment Grader::grade(const Submission& submission, const Rubric& rubric, std::size_t k) {
  validate_rubric(rubric);
  if (trim(submission.essay_text).empty()) throw Error(ErrorCode::InvalidSubmission, "essay text is blank");

  const auto query = build_retrieval_query(submission, embedder_);
  std::vector<RetrievalResult> evidence;
  std::vector<std::string> texts;
  for (auto& r : index_.query(query, k)) {
    // A document removed between query and lookup is dropped.
    if (auto doc = index_.find(r.doc_id)) {
      texts.push_back(doc->text);
      evidence.push_back(std::move(r));
    }
  }
  for (std::size_t i = 0; i < evidence.size(); ++i) evidence[i].rank = i + 1;

  const Prompt prompt = assemble_prompt(submission, rubric, evidence, texts);
  const std::string base_prompt = prompt.render();

  LlmRequest request{submission.id, prompt.system_text, base_prompt, config_.temperature};
  std::optional<AgentDraft> draft;
  std::string last_error;
  for (unsigned attempt = 0; attempt <= config_.max_output_repair_attempts; ++attempt) {
    const std::string raw = llm_.complete(request);
    try {
      draft = parse_agent_output(raw, rubric);
      break;
    } catch (const Error& e) {
      last_error = std::string(to_string(e.code())) + ": " + e.what();
      request.prompt = base_prompt + correction_note(e);
    }
  }
  if (!draft) {
    const std::string message = "no valid output after " + std::to_string(config_.max_output_repair_attempts + 1) +
                                " attempts; last error " + last_error;
    store_.record_failure({submission.id, ErrorCode::UnparseableAfterRepairs, message, clock_()});
    throw Error(ErrorCode::UnparseableAfterRepairs, message);
  }

  Assessment a;
  a.id = ids_->next("asm");
  a.submission_id = submission.id;
  a.rubric_id = rubric.id;
  a.criterion_scores = std::move(draft->scores);
  a.overall_comment = std::move(draft->overall_comment);
  a.total_percent = weighted_total(rubric, a.criterion_scores);
  a.machine_total_percent = a.total_percent;
  a.evidence = std::move(evidence);
  a.generated_at = clock_();
  a.model_label = llm_.label();
  a.cohort = submission.cohort;
  check_transition(a.status, AssessmentStatus::pending_review);
  a.status = AssessmentStatus::pending_review;
  a.review_trail.push_back({a.generated_at, "engine", AuditAction::submitted, std::nullopt, std::nullopt});
  store_.put(a);
  return a;
}

}  // namespace ragrade
