#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragrade/error.hpp"

namespace ragrade {

enum class BandLabel { Excellent, Good, Satisfactory, NeedsImprovement };

inline constexpr BandLabel kAllBandLabels[] = {BandLabel::Excellent, BandLabel::Good,
                                               BandLabel::Satisfactory, BandLabel::NeedsImprovement};

std::string_view to_string(BandLabel label) noexcept;
// Throws InvalidInput for anything but the four exact label names.
BandLabel parse_band_label(std::string_view name);

struct Band {
  BandLabel label = BandLabel::NeedsImprovement;
  double lo_percent = 0.0;
  double hi_percent = 0.0;
  std::string descriptor;

  bool operator==(const Band&) const = default;
};

struct Criterion {
  std::string id;
  std::string name;
  double weight_percent = 0.0;
  std::vector<Band> bands;

  bool operator==(const Criterion&) const = default;
};

struct Rubric {
  std::string id;
  std::string title;
  std::vector<Criterion> criteria;

  const Criterion* find(std::string_view criterion_id) const noexcept;

  bool operator==(const Rubric&) const = default;
};

struct CriterionScore {
  std::string criterion_id;
  BandLabel band = BandLabel::NeedsImprovement;
  double percent = 0.0;
  std::string comment;

  bool operator==(const CriterionScore&) const = default;
};

struct RubricViolation {
  ErrorCode code;
  std::string message;
};

// Carries every violation found; code() is the first one's.
class RubricError : public Error {
 public:
  explicit RubricError(std::vector<RubricViolation> violations);
  const std::vector<RubricViolation>& violations() const noexcept { return violations_; }

 private:
  std::vector<RubricViolation> violations_;
};

// Effective band intervals. Bands are ordered by lo_percent; each band covers
// [lo, next band's lo) and the top band covers [lo, 100]. A band's printed hi
// may equal the next lo or sit one below it (integer-printed ranges such as
// 65–79 followed by 80–100); anything higher is an overlap, anything lower a
// gap.
struct BandInterval {
  BandLabel label;
  double lo;
  double hi;
  bool closed_hi;  // true only for the top band

  bool contains(double percent) const noexcept {
    return percent >= lo && (closed_hi ? percent <= hi : percent < hi);
  }
};

std::vector<RubricViolation> band_violations(std::span<const Band> bands, std::string_view owner);
std::vector<RubricViolation> rubric_violations(const Rubric& rubric);
// Throws RubricError listing every violation.
void validate_rubric(const Rubric& rubric);

// Requires band_violations(bands) to be empty.
std::vector<BandInterval> band_intervals(std::span<const Band> bands);

// Throws PercentOutOfRange outside [0, 100].
BandLabel band_for_percent(std::span<const Band> bands, double percent);
BandLabel band_for_percent(const Criterion& criterion, double percent);

// Throws PercentOutOfRange or BandPercentMismatch.
void check_band_percent(const Criterion& criterion, BandLabel band, double percent);

// Sum of percent * weight / 100 over one score per criterion. Throws
// MissingCriterionScore, ExtraCriterionScore, PercentOutOfRange or
// BandPercentMismatch.
double weighted_total(const Rubric& rubric, std::span<const CriterionScore> scores);

// One decimal place, e.g. "72.0".
std::string display_percent(double percent);

// The five-criterion, four-band engineering-report rubric shipped as the
// default fixture (weights 20/25/25/15/15; bands 80–100, 65–79, 50–64, 0–49).
Rubric default_rubric();

nlohmann::json rubric_to_json(const Rubric& rubric);
// Parses and validates. Throws InvalidInput on malformed JSON shape.
Rubric rubric_from_json(const nlohmann::json& j);
Rubric load_rubric(const std::filesystem::path& path);

}  // namespace ragrade
