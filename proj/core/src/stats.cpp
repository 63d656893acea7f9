#include "ragrade/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "ragrade/util.hpp"

namespace ragrade::stats {

using nlohmann::json;

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch, "length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v, double m) {
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

void PairedScores::validate() const {
  require_same_length(rater_a.size(), rater_b.size());
  if (!labels.empty()) require_same_length(labels.size(), rater_a.size());
  if (rater_a.size() < 2) throw Error(ErrorCode::InsufficientData, "need at least two pairs");
  for (const auto* v : {&rater_a, &rater_b}) {
    for (double x : *v) {
      if (!(x >= 0.0 && x <= 100.0)) {
        throw Error(ErrorCode::PercentOutOfRange, "score " + std::to_string(x) + " outside [0, 100]");
      }
    }
  }
}

double cohens_kappa(std::span<const std::string> labels_a, std::span<const std::string> labels_b) {
  require_same_length(labels_a.size(), labels_b.size());
  if (labels_a.size() < 2) throw Error(ErrorCode::InsufficientData, "kappa needs at least two items");
  const auto n = static_cast<double>(labels_a.size());

  std::map<std::string, std::pair<double, double>> marginals;
  double agree = 0.0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    if (labels_a[i] == labels_b[i]) agree += 1.0;
    marginals[labels_a[i]].first += 1.0;
    marginals[labels_b[i]].second += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [category, m] : marginals) p_e += (m.first / n) * (m.second / n);
  if (p_e >= 1.0) {
    throw Error(ErrorCode::DegenerateMarginals, "both raters used one identical category; kappa undefined");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

double icc_2_1(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  if (n < 2) throw Error(ErrorCode::InsufficientData, "ICC needs at least two subjects");
  const std::size_t k = rows.front().size();
  if (k < 2) throw Error(ErrorCode::InsufficientData, "ICC needs at least two raters");
  for (const auto& r : rows) {
    if (r.size() != k) throw Error(ErrorCode::InsufficientData, "ICC matrix has missing cells");
  }
  const auto dn = static_cast<double>(n);
  const auto dk = static_cast<double>(k);

  std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      row_mean[i] += rows[i][j];
      col_mean[j] += rows[i][j];
      grand += rows[i][j];
    }
  }
  for (auto& m : row_mean) m /= dk;
  for (auto& m : col_mean) m /= dn;
  grand /= dn * dk;

  double ss_rows = 0.0;
  for (double m : row_mean) ss_rows += (m - grand) * (m - grand);
  ss_rows *= dk;

  // When every subject got the same score from every rater, rater and
  // residual effects are identically zero.
  const bool rows_constant = std::all_of(rows.begin(), rows.end(), [](const std::vector<double>& r) {
    return std::all_of(r.begin(), r.end(), [&](double x) { return x == r.front(); });
  });
  double ss_cols = 0.0;
  double ss_err = 0.0;
  if (!rows_constant) {
    for (double m : col_mean) ss_cols += (m - grand) * (m - grand);
    ss_cols *= dn;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double r = rows[i][j] - row_mean[i] - col_mean[j] + grand;
        ss_err += r * r;
      }
    }
  }

  const double ms_r = ss_rows / (dn - 1.0);
  const double ms_c = ss_cols / (dk - 1.0);
  const double ms_e = ss_err / ((dn - 1.0) * (dk - 1.0));
  const double denom = ms_r + (dk - 1.0) * ms_e + (dk / dn) * (ms_c - ms_e);
  if (denom == 0.0) throw Error(ErrorCode::ZeroVariance, "ICC undefined: no variance in the matrix");
  return (ms_r - ms_e) / denom;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size());
  if (x.size() < 2) throw Error(ErrorCode::InsufficientData, "correlation needs at least two pairs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "correlation undefined for constant input");
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

ErrorSummary mae_rmse(std::span<const double> human, std::span<const double> machine) {
  require_same_length(human.size(), machine.size());
  if (human.empty()) throw Error(ErrorCode::EmptyInput, "no pairs");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < human.size(); ++i) {
    const double d = machine[i] - human[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const auto n = static_cast<double>(human.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

BlandAltman limits_of_agreement(double mean_diff, double sd_diff) {
  return {mean_diff, sd_diff, mean_diff - kLoaMultiplier * sd_diff, mean_diff + kLoaMultiplier * sd_diff};
}

BlandAltman bland_altman(std::span<const double> human, std::span<const double> machine) {
  require_same_length(human.size(), machine.size());
  if (human.size() < 2) throw Error(ErrorCode::InsufficientData, "Bland-Altman needs at least two pairs");
  std::vector<double> d(human.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = machine[i] - human[i];
  const double m = mean(d);
  return limits_of_agreement(m, sample_sd(d, m));
}

Descriptive describe(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorCode::InsufficientData, "need at least two values");
  const double m = mean(values);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {m, sample_sd(values, m), *lo, *hi};
}

std::vector<BandLabel> bin_to_bands(std::span<const double> scores, std::span<const Band> bands) {
  std::vector<BandLabel> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(band_for_percent(bands, s));
  return out;
}

std::vector<Band> default_total_bands() { return default_rubric().criteria.front().bands; }

ReliabilityReport reliability_report(const PairedScores& pairs, std::span<const Band> bands,
                                     std::optional<ApprovalTally> decided) {
  pairs.validate();
  const auto& a = pairs.rater_a;
  const auto& b = pairs.rater_b;

  ReliabilityReport r;
  r.n = a.size();

  auto to_names = [](const std::vector<BandLabel>& labels) {
    std::vector<std::string> out;
    for (auto l : labels) out.emplace_back(to_string(l));
    return out;
  };
  try {
    r.kappa = cohens_kappa(to_names(bin_to_bands(a, bands)), to_names(bin_to_bands(b, bands)));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateMarginals) throw;
  }
  std::vector<std::vector<double>> matrix(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) matrix[i] = {a[i], b[i]};
  try {
    r.icc_2_1 = icc_2_1(matrix);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance) throw;
  }
  try {
    r.pearson_r = pearson_r(a, b);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance) throw;
  }
  const auto err = mae_rmse(a, b);
  r.mae = err.mae;
  r.rmse = err.rmse;
  r.bland_altman = bland_altman(a, b);
  r.descriptive_a = describe(a);
  r.descriptive_b = describe(b);
  if (decided && decided->decided > 0) {
    r.approval_rate = static_cast<double>(decided->approved) / static_cast<double>(decided->decided);
  }
  return r;
}

json report_to_json(const ReliabilityReport& report) {
  auto opt = [](const std::optional<double>& v, auto&& f) { return v ? json(f(*v)) : json(nullptr); };
  auto build = [&](auto&& f) {
    auto desc = [&](const Descriptive& d) {
      return json{{"mean", f(d.mean)}, {"sd", f(d.sd)}, {"min", f(d.min)}, {"max", f(d.max)}};
    };
    return json{{"n", report.n},
                {"kappa", opt(report.kappa, f)},
                {"icc_2_1", opt(report.icc_2_1, f)},
                {"pearson_r", opt(report.pearson_r, f)},
                {"mae", f(report.mae)},
                {"rmse", f(report.rmse)},
                {"bland_altman",
                 {{"mean_diff", f(report.bland_altman.mean_diff)},
                  {"sd_diff", f(report.bland_altman.sd_diff)},
                  {"loa_lower", f(report.bland_altman.loa_lower)},
                  {"loa_upper", f(report.bland_altman.loa_upper)}}},
                {"approval_rate", opt(report.approval_rate, f)},
                {"descriptive_a", desc(report.descriptive_a)},
                {"descriptive_b", desc(report.descriptive_b)}};
  };
  json j = build([](double v) { return v; });
  json display = build([](double v) { return std::round(v * 100.0) / 100.0; });
  display.erase("n");
  j["display"] = std::move(display);
  return j;
}

PairedScores parse_pairs_csv(std::string_view csv, bool require_rater_b) {
  PairedScores out;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!csv.empty()) {
    const auto nl = csv.find('\n');
    auto line = trim(csv.substr(0, nl));
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;

    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!header_seen) {
      if (cells.size() != 3 || cells[0] != "id" || cells[1] != "rater_a" || cells[2] != "rater_b") {
        throw Error(ErrorCode::InvalidInput, "expected header id,rater_a,rater_b");
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != 3) {
      throw Error(ErrorCode::InvalidInput, "line " + std::to_string(line_no) + ": expected 3 fields");
    }
    auto number = [&](std::string_view cell) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
        throw Error(ErrorCode::InvalidInput,
                    "line " + std::to_string(line_no) + ": '" + std::string(cell) + "' is not a number");
      }
      return v;
    };
    out.labels.emplace_back(cells[0]);
    out.rater_a.push_back(number(cells[1]));
    if (!require_rater_b && cells[2].empty()) {
      out.rater_b.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      out.rater_b.push_back(number(cells[2]));
    }
  }
  if (!header_seen) throw Error(ErrorCode::InvalidInput, "empty CSV");
  return out;
}

PairedScores load_pairs_csv(const std::filesystem::path& path) { return parse_pairs_csv(read_file(path)); }

}  // namespace ragrade::stats
