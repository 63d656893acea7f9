#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ragrade/error.hpp"
#include "ragrade/rubric.hpp"

namespace ragrade::stats {

// Two raters' percent scores for the same items. By convention rater_a is the
// human and rater_b the machine.
struct PairedScores {
  std::vector<std::string> labels;  // optional; empty or aligned
  std::vector<double> rater_a;
  std::vector<double> rater_b;

  // Throws LengthMismatch, InsufficientData (< 2 pairs) or PercentOutOfRange.
  void validate() const;
};

struct BlandAltman {
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double loa_lower = 0.0;
  double loa_upper = 0.0;
};

struct Descriptive {
  double mean = 0.0;
  double sd = 0.0;  // sample (n - 1)
  double min = 0.0;
  double max = 0.0;
};

struct ErrorSummary {
  double mae = 0.0;
  double rmse = 0.0;
};

struct ReliabilityReport {
  std::size_t n = 0;
  std::optional<double> kappa;
  std::optional<double> icc_2_1;
  std::optional<double> pearson_r;
  double mae = 0.0;
  double rmse = 0.0;
  BlandAltman bland_altman;
  std::optional<double> approval_rate;
  Descriptive descriptive_a;
  Descriptive descriptive_b;
};

inline constexpr double kLoaMultiplier = 1.96;

// Cohen's kappa over string categories. Throws LengthMismatch,
// InsufficientData or DegenerateMarginals (chance agreement of 1).
double cohens_kappa(std::span<const std::string> labels_a, std::span<const std::string> labels_b);

// ICC(2,1): two-way random effects, absolute agreement, single rater.
// `rows` is subjects x raters. Throws InsufficientData or ZeroVariance.
double icc_2_1(const std::vector<std::vector<double>>& rows);

// Throws LengthMismatch, InsufficientData or ZeroVariance.
double pearson_r(std::span<const double> x, std::span<const double> y);

// Throws LengthMismatch or EmptyInput.
ErrorSummary mae_rmse(std::span<const double> human, std::span<const double> machine);

// Differences are machine - human. Throws LengthMismatch or InsufficientData.
BlandAltman bland_altman(std::span<const double> human, std::span<const double> machine);

// mean_diff -/+ 1.96 sd_diff.
BlandAltman limits_of_agreement(double mean_diff, double sd_diff);

// Throws InsufficientData for fewer than two values.
Descriptive describe(std::span<const double> values);

// Maps each percent through band_for_percent. Throws PercentOutOfRange.
std::vector<BandLabel> bin_to_bands(std::span<const double> scores, std::span<const Band> bands);

// The four top-level bands used for kappa binning by default.
std::vector<Band> default_total_bands();

struct ApprovalTally {
  std::size_t approved = 0;  // including edited-and-approved
  std::size_t decided = 0;
};

// Every metric; ones whose preconditions fail are left empty.
ReliabilityReport reliability_report(const PairedScores& pairs, std::span<const Band> bands,
                                     std::optional<ApprovalTally> decided = std::nullopt);

// Fields at full precision plus a "display" block rounded to 2 decimals.
// Absent metrics are null.
nlohmann::json report_to_json(const ReliabilityReport& report);

// CSV with header `id,rater_a,rater_b`. With `require_rater_b` false a blank
// rater_b cell is accepted and stored as NaN (human-score uploads carry only
// the instructor column). Throws InvalidInput.
PairedScores parse_pairs_csv(std::string_view csv, bool require_rater_b = true);
PairedScores load_pairs_csv(const std::filesystem::path& path);

}  // namespace ragrade::stats
