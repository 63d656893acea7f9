#include "fixtures.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

namespace ragrade::testing {

namespace {

const std::vector<std::string> kFiller = {
    "the",        "design",     "load",      "analysis",   "report",     "system",    "we",
    "model",      "results",    "shows",     "because",    "structure",  "material",  "stress",
    "test",       "method",     "and",       "of",         "a",          "to",        "in",
    "was",        "requirement", "safety",   "factor",     "constraint", "cost",      "team",
    "prototype",  "simulation", "data",      "measured",   "error",      "assumption", "process",
    "evaluation", "criteria",   "solution",  "approach",   "principle",  "energy",    "force",
    "component",  "failure",    "mode",      "iteration",  "reflection", "learned",   "future",
    "improve",    "clearly",    "figure",    "table",      "reference",  "standard",  "code"};

std::string letters(std::size_t v, std::size_t width) {
  std::string out;
  for (std::size_t i = 0; i < width; ++i) {
    out.push_back(static_cast<char>('a' + v % 26));
    v /= 26;
  }
  return out;
}

}  // namespace

TempDir::TempDir() {
  static std::mt19937_64 rng{std::random_device{}()};
  char buf[32];
  std::snprintf(buf, sizeof buf, "ragrade-%016llx", static_cast<unsigned long long>(rng()));
  path_ = std::filesystem::temp_directory_path() / buf;
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<std::string> topic_words(std::size_t i) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < 8; ++j) out.push_back("zq" + letters(i * 8 + j, 4));
  return out;
}

std::string synthetic_essay(std::size_t i, std::size_t words) {
  std::mt19937_64 rng(1000 + i);
  const auto topics = topic_words(i);
  std::string out;
  for (std::size_t w = 0; w < words; ++w) {
    if (w > 0) out += (w % 17 == 0) ? ".\n" : " ";
    out += (rng() % 3 == 0) ? topics[rng() % topics.size()] : kFiller[rng() % kFiller.size()];
  }
  return out + ".";
}

std::string profile_response(const std::string& comment_suffix) {
  const std::vector<std::tuple<std::string, std::string, int>> rows = {
      {"problem_definition", "Excellent", 90},   {"engineering_principles", "Satisfactory", 60},
      {"design_methodology", "Good", 75},        {"critical_reflection", "NeedsImprovement", 45},
      {"communication", "Excellent", 90}};
  nlohmann::json criteria = nlohmann::json::array();
  for (const auto& [id, band, pct] : rows) {
    criteria.push_back({{"criterion_id", id},
                        {"band", band},
                        {"percent", pct},
                        {"comment", "Assessed " + id + " against the band descriptor." + comment_suffix}});
  }
  return nlohmann::json{{"criteria", criteria}, {"overall_comment", "Solid report overall." + comment_suffix}}
      .dump();
}

std::string topical_response(std::size_t i) {
  std::string suffix;
  for (const auto& w : topic_words(i)) suffix += " " + w;
  return "Here is the assessment:\n```json\n" + profile_response(suffix) + "\n```";
}

void seed_corpus(Engine& engine) {
  engine.ingest_text(
      "Rubric. Problem definition, engineering principles, design methodology, critical reflection and "
      "communication are each marked in four bands from excellent to needs improvement.",
      DocType::rubric, "rubric.md");
  engine.ingest_text(synthetic_essay(900) + " exemplar high band", DocType::exemplar_essay, "exemplar-a.md");
  engine.ingest_text(synthetic_essay(901) + " exemplar middle band", DocType::exemplar_essay, "exemplar-b.md");
  engine.ingest_text("Instructor feedback: the analysis needs clearer assumptions and a stronger reflection.",
                     DocType::instructor_feedback, "feedback-2023.md");
}

ServiceConfig make_config(const std::filesystem::path& dir) {
  ServiceConfig c;
  c.listen_address = "127.0.0.1:0";
  c.corpus_path = dir / "corpus.jsonl";
  c.index_path = dir / "index.jsonl";
  c.assessment_store_path = dir / "assessments.jsonl";
  c.llm.script_path = dir / "script.json";
  return c;
}

Engine::Options fixed_options(std::shared_ptr<LlmProvider> llm, std::uint64_t seed) {
  Engine::Options o;
  o.clock = [] { return kFixedTime; };
  o.ids = std::make_shared<IdGenerator>(seed);
  o.llm = std::move(llm);
  return o;
}

std::vector<std::string> write_essays(const std::filesystem::path& dir, std::size_t n) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> ids;
  for (std::size_t i = 1; i <= n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "essay-%02zu", i);
    std::ofstream(dir / (std::string(name) + ".txt")) << synthetic_essay(i);
    ids.emplace_back(name);
  }
  return ids;
}

std::map<std::string, std::vector<std::string>> topical_script(std::size_t n) {
  std::map<std::string, std::vector<std::string>> script;
  for (std::size_t i = 1; i <= n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "essay-%02zu", i);
    script[name] = {topical_response(i)};
  }
  return script;
}

std::vector<RetrievalResult> brute_force_top_k(const std::vector<Document>& docs, const EmbeddingVector& query,
                                               std::size_t k, const QueryFilter& filter) {
  std::vector<RetrievalResult> all;
  for (const auto& d : docs) {
    if (!filter.allowed_doc_types.empty() && !filter.allowed_doc_types.count(d.doc_type)) continue;
    const auto a = d.embedding->values();
    const auto b = query.values();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    s = std::min(1.0, std::max(-1.0, s));
    all.push_back({d.id, d.doc_type, s, 0});
  }
  std::stable_sort(all.begin(), all.end(), [](const RetrievalResult& x, const RetrievalResult& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    return x.doc_id < y.doc_id;
  });
  if (all.size() > k) all.resize(k);
  for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = i + 1;
  return all;
}

}  // namespace ragrade::testing
