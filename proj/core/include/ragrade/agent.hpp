#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragrade/assessment.hpp"
#include "ragrade/embedding.hpp"
#include "ragrade/llm.hpp"
#include "ragrade/rubric.hpp"
#include "ragrade/util.hpp"
#include "ragrade/vindex.hpp"

namespace ragrade {

enum class SectionRole { rubric, evidence, essay, output_contract };

std::string_view to_string(SectionRole role) noexcept;

struct PromptSection {
  SectionRole role = SectionRole::rubric;
  std::string heading;
  std::string body;

  bool operator==(const PromptSection&) const = default;
};

struct Prompt {
  std::string system_text;
  std::vector<PromptSection> sections;

  // "# heading\n\nbody\n\n" per section, in order.
  std::string render() const;

  bool operator==(const Prompt&) const = default;
};

// The response schema the model must follow, quoted in every prompt.
inline constexpr std::string_view kOutputSchema =
    R"({"criteria":[{"criterion_id":"<id>","band":"<Excellent|Good|Satisfactory|NeedsImprovement>","percent":<number>,"comment":"<text>"}],"overall_comment":"<text>"})";

// Embedding of the full essay text.
EmbeddingVector build_retrieval_query(const Submission& submission, EmbeddingProvider& embedder);

// Deterministic prompt: one rubric section per criterion, one evidence
// section per retrieved document (descending similarity, ties by doc_id),
// the essay, and the output contract. Throws EvidenceMismatch when
// `evidence` and `evidence_texts` differ in length.
Prompt assemble_prompt(const Submission& submission, const Rubric& rubric,
                       std::span<const RetrievalResult> evidence, std::span<const std::string> evidence_texts);

struct AgentDraft {
  std::vector<CriterionScore> scores;  // rubric order
  std::string overall_comment;
};

// Pulls the first complete top-level JSON object out of `raw` (prose and
// code fences around it are ignored) and validates it against the rubric.
// Throws NoJsonObject, SchemaViolationError, UnknownCriterion or
// BandPercentMismatch.
AgentDraft parse_agent_output(std::string_view raw, const Rubric& rubric);

// Runs retrieval, prompting, parsing and engine-side totalling for one
// submission. Unparseable output is re-prompted up to
// max_output_repair_attempts times with a correction note; when every attempt
// fails the failure is recorded in the store and UnparseableAfterRepairs is
// thrown without creating an assessment.
class Grader {
 public:
  Grader(EmbeddingProvider& embedder, const VectorIndex& index, LlmProvider& llm, AssessmentStore& store,
         LlmProviderConfig config, Clock clock = system_clock_seconds,
         std::shared_ptr<IdGenerator> ids = std::make_shared<IdGenerator>());

  Assessment grade(const Submission& submission, const Rubric& rubric, std::size_t k = kDefaultTopK);

 private:
  EmbeddingProvider& embedder_;
  const VectorIndex& index_;
  LlmProvider& llm_;
  AssessmentStore& store_;
  LlmProviderConfig config_;
  Clock clock_;
  std::shared_ptr<IdGenerator> ids_;
};

}  // namespace ragrade
