#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ragrade {

inline constexpr std::size_t kDefaultEmbeddingDims = 256;

// A unit-normalized, finite vector. Every instance satisfies |v| == 1 within
// 1e-6; the factories below are the only way to build a non-empty one.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  // Scales `raw` to unit length. Throws InvalidEmbedding on zero norm or
  // non-finite components.
  static EmbeddingVector normalized(std::vector<double> raw);

  // Accepts values that are already unit length (within 1e-6), as read back
  // from storage. Values are kept bit-exact.
  static EmbeddingVector from_unit(std::vector<double> values);

  std::size_t dims() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  bool empty() const noexcept { return values_.empty(); }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}
  std::vector<double> values_;
};

// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws DimensionMismatch.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Plain dot product over equal-length spans.
double dot(std::span<const double> a, std::span<const double> b) noexcept;

enum class EmbeddingProviderKind { reference, remote };

struct EmbeddingProviderConfig {
  EmbeddingProviderKind provider_kind = EmbeddingProviderKind::reference;
  std::size_t dims = kDefaultEmbeddingDims;
  std::optional<std::string> endpoint_url;
  std::optional<std::string> auth_token_env_var;
  std::chrono::milliseconds timeout{10'000};
  unsigned max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  unsigned max_in_flight = 8;

  // Throws InvalidConfig when the kind/endpoint pairing or dims are wrong.
  void validate() const;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  // Throws EmptyText for blank input.
  virtual EmbeddingVector embed(std::string_view text) = 0;
  virtual std::size_t dims() const noexcept = 0;
  virtual std::string label() const = 0;
};

// Lowercased, alphanumeric-split tokens. Bytes >= 0x80 count as token
// characters so UTF-8 words stay whole.
std::vector<std::string> reference_tokens(std::string_view text);

// 64-bit FNV-1a.
std::uint64_t stable_hash64(std::string_view token) noexcept;

// Signed feature hashing over the token bag: bucket = hash mod dims,
// sign from bit 63, then L2 normalization. Pure function of (text, dims).
class ReferenceEmbedder final : public EmbeddingProvider {
 public:
  explicit ReferenceEmbedder(std::size_t dims = kDefaultEmbeddingDims);

  EmbeddingVector embed(std::string_view text) override;
  std::size_t dims() const noexcept override { return dims_; }
  std::string label() const override;

 private:
  std::size_t dims_;
};

// POSTs {"input": text} and expects {"embedding": [...]}. Retries transport
// and server failures with exponential backoff; a wrong-length reply is a
// DimensionMismatch and is not retried.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(EmbeddingProviderConfig config);
  ~RemoteEmbedder() override;

  EmbeddingVector embed(std::string_view text) override;
  std::size_t dims() const noexcept override { return config_.dims; }
  std::string label() const override;

 private:
  struct InFlight;
  EmbeddingProviderConfig config_;
  std::unique_ptr<InFlight> in_flight_;
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& config);

// One-shot convenience over make_embedding_provider.
EmbeddingVector embed(std::string_view text, const EmbeddingProviderConfig& config);

}  // namespace ragrade
