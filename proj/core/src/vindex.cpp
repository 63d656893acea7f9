#include "ragrade/vindex.hpp"

#include <algorithm>
#include <mutex>

#include "ragrade/error.hpp"
#include "ragrade/util.hpp"

namespace ragrade {

namespace {
constexpr std::string_view kDigestPrefix = "#sha256:";
}

bool ranks_before(double sim_a, std::string_view id_a, double sim_b, std::string_view id_b) noexcept {
  if (sim_a != sim_b) return sim_a > sim_b;
  return id_a < id_b;
}

VectorIndex::VectorIndex(std::size_t dims) : dims_(dims) {
  if (dims == 0) throw Error(ErrorCode::InvalidConfig, "index dims must be positive");
}

std::unique_ptr<VectorIndex> VectorIndex::load(const std::filesystem::path& path, std::size_t dims) {
  const std::string contents = read_file(path);

  // The digest line must be the last line and cover everything before it.
  std::string_view view = contents;
  if (!view.empty() && view.back() == '\n') view.remove_suffix(1);
  const auto last_nl = view.rfind('\n');
  const std::size_t digest_start = last_nl == std::string_view::npos ? 0 : last_nl + 1;
  const auto digest_line = view.substr(digest_start);
  if (digest_line.substr(0, kDigestPrefix.size()) != kDigestPrefix) {
    throw Error(ErrorCode::CorruptIndex, path.string() + ": missing digest line");
  }
  const auto payload = view.substr(0, digest_start);
  if (sha256_hex(payload) != digest_line.substr(kDigestPrefix.size())) {
    throw Error(ErrorCode::CorruptIndex, path.string() + ": digest mismatch");
  }

  auto index = std::make_unique<VectorIndex>(dims);
  std::string_view rest = payload;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const auto line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    if (trim(line).empty()) continue;
    Document doc;
    try {
      doc = document_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::CorruptIndex, path.string() + ": " + e.what());
    }
    index->upsert(doc);
  }
  return index;
}

std::unique_ptr<VectorIndex> VectorIndex::open(const std::filesystem::path& path, std::size_t dims) {
  auto index = std::filesystem::exists(path) ? load(path, dims) : std::make_unique<VectorIndex>(dims);
  index->backing_ = path;
  if (!std::filesystem::exists(path)) index->save(path);
  return index;
}

void VectorIndex::upsert(const Document& doc) {
  if (!doc.embedding || doc.embedding->empty()) {
    throw Error(ErrorCode::MissingEmbedding, "document " + doc.id + " has no embedding");
  }
  if (doc.embedding->dims() != dims_) {
    throw Error(ErrorCode::DimensionMismatch, "document " + doc.id + " has " +
                                                  std::to_string(doc.embedding->dims()) +
                                                  " dims, index has " + std::to_string(dims_));
  }
  validate_document(doc);
  std::unique_lock lock(mutex_);
  auto previous = entries_.find(doc.id);
  std::optional<Document> old;
  if (previous != entries_.end()) old = previous->second;
  entries_.insert_or_assign(doc.id, doc);
  try {
    persist_locked();
  } catch (...) {
    if (old) entries_.insert_or_assign(doc.id, *old);
    else entries_.erase(doc.id);
    throw;
  }
}

bool VectorIndex::remove(std::string_view doc_id) {
  std::unique_lock lock(mutex_);
  auto it = entries_.find(doc_id);
  if (it == entries_.end()) return false;
  Document old = it->second;
  entries_.erase(it);
  try {
    persist_locked();
  } catch (...) {
    entries_.insert_or_assign(old.id, std::move(old));
    throw;
  }
  return true;
}

std::vector<RetrievalResult> VectorIndex::query(const EmbeddingVector& query_vector, std::size_t k,
                                                const QueryFilter& filter) const {
  if (query_vector.dims() != dims_) {
    throw Error(ErrorCode::DimensionMismatch, "query has " + std::to_string(query_vector.dims()) +
                                                  " dims, index has " + std::to_string(dims_));
  }
  if (k == 0) throw Error(ErrorCode::InvalidInput, "k must be at least 1");

  std::shared_lock lock(mutex_);
  std::vector<RetrievalResult> scored;
  scored.reserve(entries_.size());
  for (const auto& [id, doc] : entries_) {
    if (!filter.admits(doc.doc_type)) continue;
    const double sim = std::clamp(dot(query_vector.values(), doc.embedding->values()), -1.0, 1.0);
    scored.push_back({id, doc.doc_type, sim, 0});
  }
  lock.unlock();

  const auto take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const RetrievalResult& a, const RetrievalResult& b) {
                      return ranks_before(a.similarity, a.doc_id, b.similarity, b.doc_id);
                    });
  scored.resize(take);
  for (std::size_t i = 0; i < scored.size(); ++i) scored[i].rank = i + 1;
  return scored;
}

std::string VectorIndex::serialize_locked() const {
  std::string payload;
  for (const auto& [id, doc] : entries_) {
    payload += document_to_json(doc).dump();
    payload += '\n';
  }
  const auto digest = sha256_hex(payload);
  payload += kDigestPrefix;
  payload += digest;
  payload += '\n';
  return payload;
}

void VectorIndex::persist_locked() const {
  if (backing_) write_file_atomic(*backing_, serialize_locked());
}

void VectorIndex::save(const std::filesystem::path& path) const {
  std::shared_lock lock(mutex_);
  write_file_atomic(path, serialize_locked());
}

std::optional<Document> VectorIndex::find(std::string_view doc_id) const {
  std::shared_lock lock(mutex_);
  if (auto it = entries_.find(doc_id); it != entries_.end()) return it->second;
  return std::nullopt;
}

std::vector<Document> VectorIndex::documents() const {
  std::shared_lock lock(mutex_);
  std::vector<Document> out;
  out.reserve(entries_.size());
  for (const auto& [id, doc] : entries_) out.push_back(doc);
  return out;
}

std::size_t VectorIndex::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::size_t VectorIndex::count(DocType type) const {
  std::shared_lock lock(mutex_);
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                [type](const auto& e) { return e.second.doc_type == type; }));
}

}  // namespace ragrade
