#include "ragrade/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

namespace ragrade {

using nlohmann::json;

std::string_view to_string(DocType type) noexcept {
  switch (type) {
    case DocType::rubric: return "rubric";
    case DocType::exemplar_essay: return "exemplar_essay";
    case DocType::instructor_feedback: return "instructor_feedback";
    case DocType::approved_feedback: return "approved_feedback";
  }
  return "unknown";
}

DocType parse_doc_type(std::string_view name) {
  for (auto t : {DocType::rubric, DocType::exemplar_essay, DocType::instructor_feedback,
                 DocType::approved_feedback}) {
    if (to_string(t) == name) return t;
  }
  throw Error(ErrorCode::UnknownDocType, "unknown doc_type '" + std::string(name) + "'");
}

void validate_document(const Document& doc) {
  if (trim(doc.text).empty()) throw Error(ErrorCode::EmptyDocument, "document text is blank");
  if (doc.id.empty()) throw Error(ErrorCode::InvalidInput, "document id is empty");
  const bool approved = doc.doc_type == DocType::approved_feedback;
  if (approved != doc.provenance.has_value()) {
    throw Error(ErrorCode::InvalidInput,
                "provenance must be present exactly for approved_feedback documents");
  }
}

json document_to_json(const Document& doc) {
  json j;
  j["id"] = doc.id;
  j["doc_type"] = std::string(to_string(doc.doc_type));
  j["text"] = doc.text;
  j["source_name"] = doc.source_name;
  j["ingested_at"] = doc.ingested_at;
  j["cohort"] = doc.cohort ? json(*doc.cohort) : json(nullptr);
  if (doc.provenance) {
    j["provenance"] = {{"submission_id", doc.provenance->submission_id},
                       {"reviewer_id", doc.provenance->reviewer_id},
                       {"approved_at", doc.provenance->approved_at}};
  } else {
    j["provenance"] = nullptr;
  }
  if (doc.embedding) {
    const auto values = doc.embedding->values();
    j["embedding"] = std::vector<double>(values.begin(), values.end());
  } else {
    j["embedding"] = nullptr;
  }
  return j;
}

Document document_from_json(const json& j) {
  try {
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.doc_type = parse_doc_type(j.at("doc_type").get<std::string>());
    doc.text = j.at("text").get<std::string>();
    doc.source_name = j.at("source_name").get<std::string>();
    doc.ingested_at = j.at("ingested_at").get<Timestamp>();
    if (j.contains("cohort") && !j["cohort"].is_null()) doc.cohort = j["cohort"].get<std::string>();
    if (j.contains("provenance") && !j["provenance"].is_null()) {
      const auto& p = j["provenance"];
      doc.provenance = Provenance{p.at("submission_id").get<std::string>(),
                                  p.at("reviewer_id").get<std::string>(),
                                  p.at("approved_at").get<Timestamp>()};
    }
    if (j.contains("embedding") && !j["embedding"].is_null()) {
      doc.embedding = EmbeddingVector::from_unit(j["embedding"].get<std::vector<double>>());
    }
    validate_document(doc);
    return doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("malformed document record: ") + e.what());
  }
}

FrontMatter split_front_matter(std::string_view file_text) {
  FrontMatter out;
  // Strip a UTF-8 byte order mark.
  if (file_text.substr(0, 3) == "\xEF\xBB\xBF") file_text.remove_prefix(3);

  auto next_line = [](std::string_view& rest) {
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  std::string_view rest = file_text;
  if (next_line(rest) != "---") {
    out.body = std::string(file_text);
    return out;
  }
  while (true) {
    if (rest.empty()) throw Error(ErrorCode::InvalidInput, "front matter block is not terminated");
    const auto line = next_line(rest);
    if (line == "---") break;
    if (trim(line).empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::InvalidInput, "front matter line lacks ':': " + std::string(line));
    }
    out.fields[std::string(trim(line.substr(0, colon)))] = std::string(trim(line.substr(colon + 1)));
  }
  out.body = std::string(rest);
  return out;
}

CorpusStore::CorpusStore(std::filesystem::path path, Clock clock, std::shared_ptr<IdGenerator> ids)
    : path_(std::move(path)), clock_(std::move(clock)), ids_(std::move(ids)) {
  load();
}

void CorpusStore::load() {
  if (!std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(ErrorCode::StoreLoadFailure, "cannot open corpus store " + path_.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto doc = document_from_json(json::parse(line));
      digests_.insert(sha256_hex(doc.text));
      docs_.insert_or_assign(doc.id, std::move(doc));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::StoreLoadFailure,
                  path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void CorpusStore::put_locked(const Document& doc) {
  validate_document(doc);
  append_line(path_, document_to_json(doc).dump());
  digests_.insert(sha256_hex(doc.text));
  docs_.insert_or_assign(doc.id, doc);
}

Document CorpusStore::ingest_document(std::string_view raw_text, DocType doc_type,
                                      std::string source_name, std::optional<std::string> cohort) {
  const auto text = trim(raw_text);
  if (text.empty()) throw Error(ErrorCode::EmptyDocument, "document text is blank");
  if (doc_type == DocType::approved_feedback) {
    throw Error(ErrorCode::InvalidInput,
                "approved_feedback documents are created by the review workflow only");
  }
  Document doc;
  doc.doc_type = doc_type;
  doc.text = std::string(text);
  doc.source_name = std::move(source_name);
  doc.cohort = std::move(cohort);

  std::unique_lock lock(mutex_);
  do {
    doc.id = ids_->next("doc");
  } while (docs_.contains(doc.id));
  doc.ingested_at = clock_();
  put_locked(doc);
  return doc;
}

ScanResult CorpusStore::scan_inbox(const std::filesystem::path& directory,
                                   std::optional<DocType> default_type) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  std::filesystem::directory_iterator it(directory, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + directory.string() + ": " + ec.message());
  for (const auto& entry : it) {
    const auto name = entry.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    std::error_code dir_ec;
    if (entry.is_directory(dir_ec)) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  ScanResult result;
  for (const auto& file : files) {
    try {
      const auto raw = read_file(file);
      if (!is_valid_utf8(raw)) throw Error(ErrorCode::InvalidEncoding, "file is not valid UTF-8");
      auto fm = split_front_matter(raw);
      const auto body = trim(fm.body);
      if (body.empty()) throw Error(ErrorCode::EmptyDocument, "document text is blank");
      if (contains_digest(sha256_hex(body))) continue;

      std::optional<DocType> type = default_type;
      if (auto f = fm.fields.find("doc_type"); f != fm.fields.end()) type = parse_doc_type(f->second);
      if (!type) throw Error(ErrorCode::UnknownDocType, "no doc_type in front matter and no default");
      std::string source = file.filename().string();
      if (auto f = fm.fields.find("source_name"); f != fm.fields.end() && !f->second.empty()) {
        source = f->second;
      }
      std::optional<std::string> cohort;
      if (auto f = fm.fields.find("cohort"); f != fm.fields.end() && !f->second.empty()) {
        cohort = f->second;
      }
      result.documents.push_back(ingest_document(body, *type, std::move(source), std::move(cohort)));
    } catch (const Error& e) {
      result.errors.push_back({file, e.code(), e.what()});
    }
  }
  return result;
}

void CorpusStore::put(const Document& doc) {
  std::unique_lock lock(mutex_);
  put_locked(doc);
}

std::optional<Document> CorpusStore::find(std::string_view id) const {
  std::shared_lock lock(mutex_);
  if (auto it = docs_.find(id); it != docs_.end()) return it->second;
  return std::nullopt;
}

std::vector<Document> CorpusStore::documents() const {
  std::shared_lock lock(mutex_);
  std::vector<Document> out;
  out.reserve(docs_.size());
  for (const auto& [id, doc] : docs_) out.push_back(doc);
  return out;
}

std::size_t CorpusStore::size() const {
  std::shared_lock lock(mutex_);
  return docs_.size();
}

bool CorpusStore::contains_digest(std::string_view sha256) const {
  std::shared_lock lock(mutex_);
  return digests_.contains(std::string(sha256));
}

}  // namespace ragrade
