#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ragrade/service.hpp"

namespace ragrade::testing {

// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline constexpr Timestamp kFixedTime = 1'700'000'000;

// Letters-only words unique to essay i.
std::vector<std::string> topic_words(std::size_t i);

// Deterministic essay of `words` words; about a third come from topic_words(i).
std::string synthetic_essay(std::size_t i, std::size_t words = 850);

// Band/percent profile (Excellent 90, Satisfactory 60, Good 75,
// NeedsImprovement 45, Excellent 90) over the default rubric; totals 72.0.
std::string profile_response(const std::string& comment_suffix = {});

// profile_response whose comments repeat essay i's topic words.
std::string topical_response(std::size_t i);

// Small base corpus: one rubric, two exemplars, one instructor feedback.
void seed_corpus(Engine& engine);

// Config rooted in `dir` using the reference embedder.
ServiceConfig make_config(const std::filesystem::path& dir);

Engine::Options fixed_options(std::shared_ptr<LlmProvider> llm, std::uint64_t seed = 7);

// Writes essays 1..n as essay-NN.txt into dir; returns their submission ids.
std::vector<std::string> write_essays(const std::filesystem::path& dir, std::size_t n);

// Scripted responses keyed "essay-NN" for essays 1..n.
std::map<std::string, std::vector<std::string>> topical_script(std::size_t n);

// Exhaustive scan with an independent ordering: similarity descending, then
// doc_id ascending.
std::vector<RetrievalResult> brute_force_top_k(const std::vector<Document>& docs, const EmbeddingVector& query,
                                               std::size_t k, const QueryFilter& filter = {});

}  // namespace ragrade::testing
