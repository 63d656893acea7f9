#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ragrade/corpus.hpp"
#include "ragrade/embedding.hpp"

namespace ragrade {

inline constexpr std::size_t kDefaultTopK = 5;

struct RetrievalResult {
  std::string doc_id;
  DocType doc_type = DocType::rubric;
  double similarity = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RetrievalResult&) const = default;
};

struct QueryFilter {
  std::set<DocType> allowed_doc_types;  // empty admits everything

  bool admits(DocType type) const { return allowed_doc_types.empty() || allowed_doc_types.contains(type); }
};

// Orders results by descending similarity, then ascending doc_id.
bool ranks_before(double sim_a, std::string_view id_a, double sim_b, std::string_view id_b) noexcept;

// Exact flat cosine index. Queries run under a shared lock; upsert/remove take
// the exclusive lock and, when a backing file is attached, rewrite it before
// returning.
//
// File format: one document_to_json record per line, followed by a final
// `#sha256:<hex>` line over every preceding byte.
class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dims);

  VectorIndex(const VectorIndex&) = delete;
  VectorIndex& operator=(const VectorIndex&) = delete;

  // Loads `path`. Throws IoFailure, or CorruptIndex when the trailing digest
  // is missing or does not match.
  static std::unique_ptr<VectorIndex> load(const std::filesystem::path& path, std::size_t dims);

  // Loads `path` if it exists, otherwise starts empty; either way later
  // writes are persisted to `path`.
  static std::unique_ptr<VectorIndex> open(const std::filesystem::path& path, std::size_t dims);

  // Throws MissingEmbedding or DimensionMismatch.
  void upsert(const Document& doc);
  bool remove(std::string_view doc_id);

  std::vector<RetrievalResult> query(const EmbeddingVector& query_vector, std::size_t k,
                                     const QueryFilter& filter = {}) const;

  void save(const std::filesystem::path& path) const;

  std::optional<Document> find(std::string_view doc_id) const;
  std::vector<Document> documents() const;  // ordered by id
  std::size_t size() const;
  std::size_t count(DocType type) const;
  std::size_t dims() const noexcept { return dims_; }

 private:
  std::string serialize_locked() const;
  void persist_locked() const;

  std::size_t dims_;
  std::optional<std::filesystem::path> backing_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Document, std::less<>> entries_;
};

}  // namespace ragrade
