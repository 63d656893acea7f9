#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ragrade/embedding.hpp"
#include "ragrade/error.hpp"
#include "ragrade/util.hpp"

namespace ragrade {

enum class DocType { rubric, exemplar_essay, instructor_feedback, approved_feedback };

std::string_view to_string(DocType type) noexcept;
// Throws UnknownDocType.
DocType parse_doc_type(std::string_view name);

struct Provenance {
  std::string submission_id;
  std::string reviewer_id;
  Timestamp approved_at = 0;

  bool operator==(const Provenance&) const = default;
};

struct Document {
  std::string id;
  DocType doc_type = DocType::rubric;
  std::string text;
  std::string source_name;
  Timestamp ingested_at = 0;
  std::optional<std::string> cohort;
  std::optional<Provenance> provenance;  // approved_feedback only
  std::optional<EmbeddingVector> embedding;

  std::size_t word_count() const noexcept { return whitespace_word_count(text); }

  bool operator==(const Document&) const = default;
};

// Throws EmptyDocument or InvalidInput when a Document invariant fails.
void validate_document(const Document& doc);

// One corpus/index line record. Field names are part of the file format.
nlohmann::json document_to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);

// A file that may open with a `---` delimited block of `key: value` lines.
struct FrontMatter {
  std::map<std::string, std::string> fields;
  std::string body;
};

// Files without a leading `---` line come back with empty fields and the
// whole input as body. Throws InvalidInput for an unterminated block.
FrontMatter split_front_matter(std::string_view file_text);

struct ScanError {
  std::filesystem::path path;
  ErrorCode code;
  std::string message;
};

struct ScanResult {
  std::vector<Document> documents;
  std::vector<ScanError> errors;
};

// Append-structured JSON-lines store: one Document record per line, later
// records for the same id supersede earlier ones. Writers are serialized;
// readers take a shared lock and never observe a half-applied ingest.
class CorpusStore {
 public:
  explicit CorpusStore(std::filesystem::path path, Clock clock = system_clock_seconds,
                       std::shared_ptr<IdGenerator> ids = std::make_shared<IdGenerator>());

  CorpusStore(const CorpusStore&) = delete;
  CorpusStore& operator=(const CorpusStore&) = delete;

  // Trims raw_text, assigns a fresh id and the current time, persists.
  Document ingest_document(std::string_view raw_text, DocType doc_type, std::string source_name,
                           std::optional<std::string> cohort = std::nullopt);

  // Ingests every not-yet-seen file in `directory` (dedup by SHA-256 of the
  // trimmed body). Front matter may set doc_type, source_name and cohort;
  // files without a doc_type need `default_type`. Per-file failures are
  // collected. Throws IoFailure if the directory cannot be listed.
  ScanResult scan_inbox(const std::filesystem::path& directory,
                        std::optional<DocType> default_type = std::nullopt);

  // Inserts or supersedes a fully formed document (e.g. approved feedback).
  void put(const Document& doc);

  std::optional<Document> find(std::string_view id) const;
  std::vector<Document> documents() const;  // ordered by id
  std::size_t size() const;
  bool contains_digest(std::string_view sha256) const;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void load();
  void put_locked(const Document& doc);

  std::filesystem::path path_;
  Clock clock_;
  std::shared_ptr<IdGenerator> ids_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Document, std::less<>> docs_;
  std::unordered_set<std::string> digests_;
};

}  // namespace ragrade
