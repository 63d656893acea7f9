#include <gtest/gtest.h>

#include <fstream>

#include "error_matchers.hpp"
#include "fixtures.hpp"
#include "ragrade/service.hpp"

using namespace ragrade;
using ragrade::testing::code_of;
using ragrade::testing::TempDir;

namespace {

struct InjectedCrash : std::runtime_error {
  InjectedCrash() : std::runtime_error("injected crash") {}
};

std::shared_ptr<ScriptedProvider> wildcard_llm(std::size_t responses = 4) {
  return std::make_shared<ScriptedProvider>(std::map<std::string, std::vector<std::string>>{
      {"*", std::vector<std::string>(responses, ragrade::testing::profile_response())}});
}

class ReviewTest : public ::testing::Test {
 protected:
  TempDir dir;
  std::unique_ptr<Engine> engine;

  void SetUp() override { open(); }

  void open() {
    engine.reset();
    engine = std::make_unique<Engine>(ragrade::testing::make_config(dir.path()),
                                      ragrade::testing::fixed_options(wildcard_llm()));
  }

  Assessment graded(const std::string& id, std::optional<std::string> cohort = std::nullopt,
                    std::size_t essay = 1) {
    engine->create_submission("st-" + id, ragrade::testing::synthetic_essay(essay), cohort, id);
    return engine->grade_submission(id);
  }
};

}  // namespace

TEST(TransitionMatrix, OnlyThreeEdgesAreLegal) {
  using S = AssessmentStatus;
  const std::array all = {S::draft, S::pending_review, S::approved, S::rejected};
  int legal = 0;
  for (auto from : all) {
    for (auto to : all) {
      const bool expected = (from == S::draft && to == S::pending_review) ||
                            (from == S::pending_review && (to == S::approved || to == S::rejected));
      EXPECT_EQ(is_legal_transition(from, to), expected);
      if (expected) {
        EXPECT_NO_THROW(check_transition(from, to));
        ++legal;
      } else {
        EXPECT_EQ(code_of([&] { check_transition(from, to); }), ErrorCode::InvalidState);
      }
    }
  }
  EXPECT_EQ(legal, 3);
}

TEST_F(ReviewTest, ListPendingCounts) {
  EXPECT_TRUE(engine->review().list_pending().empty());
  const auto a = graded("s1");
  graded("s2");
  graded("s3");
  engine->review().approve(a.id, "r");
  EXPECT_EQ(engine->review().list_pending().size(), 2u);
  EXPECT_TRUE(engine->review().list_pending("no-such-cohort").empty());
}

TEST_F(ReviewTest, ListPendingFiltersCohort) {
  graded("s1", "2023");
  graded("s2", "2024");
  const auto p = engine->review().list_pending("2024");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].submission_id, "s2");
}

TEST_F(ReviewTest, ApproveAddsFeedbackDocument) {
  const auto a = graded("s1");
  const auto before = engine->index().size();
  const auto doc = engine->review().approve(a.id, "dr-lee");
  EXPECT_EQ(engine->index().size(), before + 1);
  EXPECT_EQ(doc.doc_type, DocType::approved_feedback);
  ASSERT_TRUE(doc.provenance.has_value());
  EXPECT_EQ(doc.provenance->submission_id, "s1");
  EXPECT_EQ(doc.provenance->reviewer_id, "dr-lee");
  EXPECT_EQ(engine->corpus().find(doc.id), engine->index().find(doc.id));
  const auto stored = engine->assessments().find(a.id);
  EXPECT_EQ(stored->status, AssessmentStatus::approved);
  EXPECT_EQ(stored->review_trail.back().action, AuditAction::approved);
  EXPECT_FALSE(std::filesystem::exists(engine->review().intent_path()));
}

TEST_F(ReviewTest, ApprovedFeedbackIsRetrievableFromEssay) {
  const auto a = graded("s1");
  const auto doc = engine->review().approve(a.id, "r");
  ASSERT_LT(engine->index().size(), kDefaultTopK);
  const auto r = engine->index().query(engine->embedder().embed(ragrade::testing::synthetic_essay(1)), kDefaultTopK);
  EXPECT_TRUE(std::any_of(r.begin(), r.end(), [&](const RetrievalResult& x) { return x.doc_id == doc.id; }));
}

TEST_F(ReviewTest, SecondApprovalIsInvalidState) {
  const auto a = graded("s1");
  engine->review().approve(a.id, "r");
  const auto size = engine->index().size();
  EXPECT_EQ(code_of([&] { engine->review().approve(a.id, "r"); }), ErrorCode::InvalidState);
  EXPECT_EQ(engine->index().size(), size);
}

TEST_F(ReviewTest, UnknownAssessmentIsNotFound) {
  EXPECT_EQ(code_of([&] { engine->review().approve("asm-missing", "r"); }), ErrorCode::NotFound);
}

TEST_F(ReviewTest, EditRecomputesTotal) {
  const auto a = graded("s1");
  auto scores = a.criterion_scores;
  ASSERT_EQ(scores[2].criterion_id, "design_methodology");
  ASSERT_EQ(scores[2].percent, 75);
  scores[2].percent = 78;
  engine->review().edit_and_approve(a.id, "r", scores, a.overall_comment);
  const auto stored = engine->assessments().find(a.id);
  EXPECT_EQ(stored->total_percent, 72.75);
  EXPECT_EQ(stored->machine_total_percent, 72.0);
  EXPECT_EQ(stored->status, AssessmentStatus::approved);
  EXPECT_EQ(stored->review_trail.back().action, AuditAction::edited_and_approved);
  EXPECT_EQ(stored->review_trail.back().diff_summary, "design_methodology: percent 75 -> 78");
}

TEST_F(ReviewTest, EditWithMismatchLeavesStateUnchanged) {
  const auto a = graded("s1");
  auto scores = a.criterion_scores;
  scores[1].band = BandLabel::Satisfactory;
  scores[1].percent = 85;
  const auto index_size = engine->index().size();
  EXPECT_EQ(code_of([&] { engine->review().edit_and_approve(a.id, "r", scores, "x"); }),
            ErrorCode::BandPercentMismatch);
  EXPECT_EQ(engine->assessments().find(a.id), a);
  EXPECT_EQ(engine->index().size(), index_size);
}

TEST_F(ReviewTest, EditWithoutChangesRecordsNoChanges) {
  const auto a = graded("s1");
  engine->review().edit_and_approve(a.id, "r", a.criterion_scores, a.overall_comment);
  EXPECT_EQ(engine->assessments().find(a.id)->review_trail.back().diff_summary, "no changes");
}

TEST_F(ReviewTest, EditRejectsBlankComments) {
  const auto a = graded("s1");
  auto scores = a.criterion_scores;
  scores[0].comment = " ";
  EXPECT_EQ(code_of([&] { engine->review().edit_and_approve(a.id, "r", scores, "ok"); }), ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([&] { engine->review().edit_and_approve(a.id, "r", a.criterion_scores, ""); }),
            ErrorCode::SchemaViolation);
}

TEST_F(ReviewTest, RejectWithoutRegeneration) {
  const auto a = graded("s1");
  const auto size = engine->index().size();
  engine->review().reject(a.id, "r", "off topic", false);
  EXPECT_EQ(engine->index().size(), size);
  EXPECT_EQ(engine->queue().size(), 0u);
  const auto stored = engine->assessments().find(a.id);
  EXPECT_EQ(stored->status, AssessmentStatus::rejected);
  EXPECT_EQ(stored->review_trail.back().note, "off topic");
}

TEST_F(ReviewTest, RejectWithRegenerationQueues) {
  const auto a = graded("s1");
  engine->review().reject(a.id, "r", "off topic", true);
  EXPECT_EQ(engine->queue().size(), 1u);
  EXPECT_EQ(engine->assessments().find(a.id)->review_trail.back().action, AuditAction::regeneration_requested);
  const auto summary = engine->drain_regeneration_queue();
  EXPECT_EQ(summary.graded, 1u);
  EXPECT_EQ(engine->queue().size(), 0u);
  EXPECT_EQ(engine->review().list_pending().size(), 1u);
}

TEST_F(ReviewTest, RejectNeedsReasonAndPendingState) {
  const auto a = graded("s1");
  EXPECT_EQ(code_of([&] { engine->review().reject(a.id, "r", "  ", false); }), ErrorCode::EmptyReason);
  engine->review().approve(a.id, "r");
  EXPECT_EQ(code_of([&] { engine->review().reject(a.id, "r", "late", false); }), ErrorCode::InvalidState);
}

TEST_F(ReviewTest, ApprovalRate) {
  EXPECT_EQ(code_of([&] { engine->review().approval_rate(); }), ErrorCode::NoDecidedAssessments);
  const auto a = graded("s1");
  const auto b = graded("s2");
  graded("s3");
  engine->review().approve(a.id, "r");
  engine->review().reject(b.id, "r", "no", false);
  EXPECT_EQ(engine->review().approval_rate(), 0.5);
  const auto c = engine->review().counts();
  EXPECT_EQ(c.approved, 1u);
  EXPECT_EQ(c.rejected, 1u);
  EXPECT_EQ(c.pending, 1u);
}

TEST(ApprovalRate, Arithmetic) {
  EXPECT_EQ(approval_rate({94, 0, 6, 0}), 0.94);
  EXPECT_EQ(approval_rate({99, 0, 1, 0}), 0.99);
  EXPECT_EQ(approval_rate({90, 4, 6, 10}), 0.94);
  EXPECT_EQ(code_of([] { approval_rate({0, 0, 0, 5}); }), ErrorCode::NoDecidedAssessments);
}

TEST(FeedbackText, OneSectionPerCriterion) {
  const auto rubric = default_rubric();
  Assessment a;
  for (const auto& c : rubric.criteria) a.criterion_scores.push_back({c.id, BandLabel::Good, 70, "comment " + c.id});
  a.overall_comment = "overall";
  const auto text = approved_feedback_text(rubric, a);
  EXPECT_EQ(text.rfind("## " + rubric.criteria[0].name + "\ncomment problem_definition\n\n", 0), 0u);
  EXPECT_NE(text.find("## Overall\noverall"), std::string::npos);
}

class ApprovalCrash : public ReviewTest, public ::testing::WithParamInterface<const char*> {};

TEST_P(ApprovalCrash, RestartCompletesApproval) {
  const auto a = graded("s1");
  const auto index_before = engine->index().size();
  const auto corpus_before = engine->corpus().size();
  const std::string stage = GetParam();
  engine->review().set_fault_hook([&](std::string_view s) {
    if (s == stage) throw InjectedCrash();
  });
  EXPECT_THROW(engine->review().approve(a.id, "r"), InjectedCrash);
  EXPECT_TRUE(std::filesystem::exists(engine->review().intent_path()));

  open();  // restart: the constructor replays the intent
  EXPECT_FALSE(std::filesystem::exists(engine->review().intent_path()));
  const auto stored = engine->assessments().find(a.id);
  EXPECT_EQ(stored->status, AssessmentStatus::approved);
  EXPECT_EQ(engine->index().size(), index_before + 1);
  EXPECT_EQ(engine->corpus().size(), corpus_before + 1);
  EXPECT_TRUE(engine->index().find("fb-" + a.id).has_value());
  EXPECT_EQ(engine->review().approval_rate(), 1.0);
  EXPECT_FALSE(engine->review().recover());
}

TEST_P(ApprovalCrash, InProcessRecoveryIsIdempotent) {
  const auto a = graded("s1");
  const std::string stage = GetParam();
  engine->review().set_fault_hook([&](std::string_view s) {
    if (s == stage) throw InjectedCrash();
  });
  EXPECT_THROW(engine->review().approve(a.id, "r"), InjectedCrash);
  engine->review().set_fault_hook({});
  EXPECT_TRUE(engine->review().recover());
  EXPECT_EQ(engine->assessments().find(a.id)->status, AssessmentStatus::approved);
  EXPECT_EQ(engine->review().counts().approved, 1u);
  EXPECT_EQ(code_of([&] { engine->review().approve(a.id, "r"); }), ErrorCode::InvalidState);
}

INSTANTIATE_TEST_SUITE_P(Stages, ApprovalCrash,
                         ::testing::Values("intent_written", "index_upserted", "corpus_written", "assessment_written"));

TEST_F(ReviewTest, TornIntentIsDiscarded) {
  const auto a = graded("s1");
  const auto intent = engine->review().intent_path();
  std::ofstream(intent) << "{\"assessment\": {";
  open();
  EXPECT_FALSE(std::filesystem::exists(intent));
  EXPECT_EQ(engine->assessments().find(a.id)->status, AssessmentStatus::pending_review);
}

TEST(GradingQueue, PersistsFifo) {
  TempDir dir;
  {
    GradingQueue q(dir / "q.jsonl");
    q.push("a", 1);
    q.push("b", 2);
    EXPECT_EQ(q.pop(), "a");
  }
  GradingQueue q(dir / "q.jsonl");
  EXPECT_EQ(q.items(), std::vector<std::string>{"b"});
  EXPECT_EQ(q.pop(), "b");
  EXPECT_FALSE(q.pop().has_value());
}
