#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <string_view>

namespace ragrade {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;
using Clock = std::function<Timestamp()>;

Timestamp system_clock_seconds();

// Source of unique identifiers. Seeded instances are reproducible, which the
// determinism fixtures rely on.
class IdGenerator {
 public:
  IdGenerator();
  explicit IdGenerator(std::uint64_t seed);

  std::string next(std::string_view prefix);

 private:
  std::mutex mutex_;
  std::mt19937_64 rng_;
};

std::string sha256_hex(std::string_view data);

// ASCII whitespace trim.
std::string_view trim(std::string_view s) noexcept;

// Number of maximal runs of non-whitespace bytes.
std::size_t whitespace_word_count(std::string_view text) noexcept;

bool is_valid_utf8(std::string_view s) noexcept;

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Appends and flushes; the file is created when absent.
void append_line(const std::filesystem::path& path, std::string_view line);

}  // namespace ragrade
