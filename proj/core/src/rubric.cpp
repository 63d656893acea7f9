#include "ragrade/rubric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "ragrade/util.hpp"

namespace ragrade {

using nlohmann::json;

namespace {
constexpr double kEps = 1e-9;

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Ascending order of performance; bands sorted by lo_percent must follow it.
int band_rank(BandLabel label) {
  switch (label) {
    case BandLabel::NeedsImprovement: return 0;
    case BandLabel::Satisfactory: return 1;
    case BandLabel::Good: return 2;
    case BandLabel::Excellent: return 3;
  }
  return -1;
}
}  // namespace

std::string_view to_string(BandLabel label) noexcept {
  switch (label) {
    case BandLabel::Excellent: return "Excellent";
    case BandLabel::Good: return "Good";
    case BandLabel::Satisfactory: return "Satisfactory";
    case BandLabel::NeedsImprovement: return "NeedsImprovement";
  }
  return "Unknown";
}

BandLabel parse_band_label(std::string_view name) {
  for (auto label : kAllBandLabels) {
    if (to_string(label) == name) return label;
  }
  throw Error(ErrorCode::InvalidInput, "unknown band label '" + std::string(name) + "'");
}

const Criterion* Rubric::find(std::string_view criterion_id) const noexcept {
  for (const auto& c : criteria) {
    if (c.id == criterion_id) return &c;
  }
  return nullptr;
}

RubricError::RubricError(std::vector<RubricViolation> violations)
    : Error(violations.empty() ? ErrorCode::InvalidInput : violations.front().code,
            [&] {
              std::string msg = "invalid rubric:";
              for (const auto& v : violations) msg += " [" + std::string(to_string(v.code)) + "] " + v.message + ";";
              return msg;
            }()),
      violations_(std::move(violations)) {}

std::vector<RubricViolation> band_violations(std::span<const Band> bands, std::string_view owner) {
  std::vector<RubricViolation> out;
  const std::string who(owner);
  auto add = [&](std::string msg) { out.push_back({ErrorCode::BandCoverageInvalid, who + ": " + msg}); };

  std::set<BandLabel> seen;
  for (const auto& b : bands) {
    if (!seen.insert(b.label).second) add("band " + std::string(to_string(b.label)) + " appears more than once");
    if (!(b.lo_percent < b.hi_percent)) {
      add("band " + std::string(to_string(b.label)) + " has lo >= hi");
    }
    if (b.lo_percent < 0.0 || b.hi_percent > 100.0) {
      add("band " + std::string(to_string(b.label)) + " lies outside [0, 100]");
    }
  }
  if (bands.size() != 4 || seen.size() != 4) {
    add("expected the four bands Excellent, Good, Satisfactory, NeedsImprovement exactly once each");
  }
  if (bands.empty()) return out;

  std::vector<Band> sorted(bands.begin(), bands.end());
  std::sort(sorted.begin(), sorted.end(), [](const Band& a, const Band& b) { return a.lo_percent < b.lo_percent; });
  if (std::abs(sorted.front().lo_percent) > kEps) add("lowest band does not start at 0");
  if (std::abs(sorted.back().hi_percent - 100.0) > kEps) add("highest band does not end at 100");
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const auto& cur = sorted[i];
    const auto& nxt = sorted[i + 1];
    const std::string pair = std::string(to_string(cur.label)) + " and " + std::string(to_string(nxt.label));
    if (cur.hi_percent > nxt.lo_percent + kEps) {
      add("bands " + pair + " overlap");
    } else if (cur.hi_percent < nxt.lo_percent - 1.0 - kEps) {
      add("gap between bands " + pair);
    }
    if (band_rank(cur.label) > band_rank(nxt.label)) add("bands " + pair + " are out of performance order");
  }
  return out;
}

std::vector<RubricViolation> rubric_violations(const Rubric& rubric) {
  std::vector<RubricViolation> out;
  if (rubric.criteria.empty()) {
    out.push_back({ErrorCode::WeightSumInvalid, "rubric has no criteria"});
    return out;
  }
  std::set<std::string> ids;
  double sum = 0.0;
  for (const auto& c : rubric.criteria) {
    if (!ids.insert(c.id).second) {
      out.push_back({ErrorCode::DuplicateCriterion, "criterion id '" + c.id + "' appears more than once"});
    }
    if (!(c.weight_percent > 0.0 && c.weight_percent <= 100.0)) {
      out.push_back({ErrorCode::WeightSumInvalid,
                     "criterion '" + c.id + "' weight " + fmt_num(c.weight_percent) + " outside (0, 100]"});
    }
    sum += c.weight_percent;
    auto bv = band_violations(c.bands, "criterion '" + c.id + "'");
    out.insert(out.end(), bv.begin(), bv.end());
  }
  if (std::abs(sum - 100.0) > kEps) {
    out.push_back({ErrorCode::WeightSumInvalid, "weights sum to " + fmt_num(sum) + ", expected 100"});
  }
  return out;
}

void validate_rubric(const Rubric& rubric) {
  auto violations = rubric_violations(rubric);
  if (!violations.empty()) throw RubricError(std::move(violations));
}

std::vector<BandInterval> band_intervals(std::span<const Band> bands) {
  std::vector<Band> sorted(bands.begin(), bands.end());
  std::sort(sorted.begin(), sorted.end(), [](const Band& a, const Band& b) { return a.lo_percent < b.lo_percent; });
  std::vector<BandInterval> out;
  out.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const bool top = i + 1 == sorted.size();
    out.push_back({sorted[i].label, sorted[i].lo_percent, top ? 100.0 : sorted[i + 1].lo_percent, top});
  }
  return out;
}

BandLabel band_for_percent(std::span<const Band> bands, double percent) {
  if (!(percent >= 0.0 && percent <= 100.0)) {
    throw Error(ErrorCode::PercentOutOfRange, "percent " + fmt_num(percent) + " outside [0, 100]");
  }
  for (const auto& interval : band_intervals(bands)) {
    if (interval.contains(percent)) return interval.label;
  }
  throw Error(ErrorCode::BandCoverageInvalid, "no band covers percent " + fmt_num(percent));
}

BandLabel band_for_percent(const Criterion& criterion, double percent) {
  return band_for_percent(criterion.bands, percent);
}

void check_band_percent(const Criterion& criterion, BandLabel band, double percent) {
  if (!(percent >= 0.0 && percent <= 100.0)) {
    throw Error(ErrorCode::PercentOutOfRange,
                "criterion '" + criterion.id + "': percent " + fmt_num(percent) + " outside [0, 100]");
  }
  for (const auto& interval : band_intervals(criterion.bands)) {
    if (interval.label != band) continue;
    if (interval.contains(percent)) return;
    throw Error(ErrorCode::BandPercentMismatch,
                "criterion '" + criterion.id + "': percent " + fmt_num(percent) + " is outside the " +
                    std::string(to_string(band)) + " band [" + fmt_num(interval.lo) + ", " +
                    fmt_num(interval.hi) + (interval.closed_hi ? "]" : ")"));
  }
  throw Error(ErrorCode::BandPercentMismatch,
              "criterion '" + criterion.id + "' has no band " + std::string(to_string(band)));
}

double weighted_total(const Rubric& rubric, std::span<const CriterionScore> scores) {
  std::set<std::string> seen;
  for (const auto& s : scores) {
    if (rubric.find(s.criterion_id) == nullptr) {
      throw Error(ErrorCode::ExtraCriterionScore, "score for unknown criterion '" + s.criterion_id + "'");
    }
    if (!seen.insert(s.criterion_id).second) {
      throw Error(ErrorCode::ExtraCriterionScore, "more than one score for criterion '" + s.criterion_id + "'");
    }
  }
  double total = 0.0;
  for (const auto& c : rubric.criteria) {
    auto it = std::find_if(scores.begin(), scores.end(),
                           [&](const CriterionScore& s) { return s.criterion_id == c.id; });
    if (it == scores.end()) {
      throw Error(ErrorCode::MissingCriterionScore, "no score for criterion '" + c.id + "'");
    }
    check_band_percent(c, it->band, it->percent);
    total += it->percent * c.weight_percent / 100.0;
  }
  return total;
}

std::string display_percent(double percent) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", percent);
  return buf;
}

Rubric default_rubric() {
  auto bands = [](std::string excellent, std::string good, std::string satisfactory, std::string needs) {
    return std::vector<Band>{
        {BandLabel::Excellent, 80, 100, std::move(excellent)},
        {BandLabel::Good, 65, 79, std::move(good)},
        {BandLabel::Satisfactory, 50, 64, std::move(satisfactory)},
        {BandLabel::NeedsImprovement, 0, 49, std::move(needs)},
    };
  };
  Rubric r;
  r.id = "engineering-report-v1";
  r.title = "Engineering design report";
  r.criteria = {
      {"problem_definition", "Problem Definition and Understanding", 20,
       bands("Problem, parameters, constraints and objectives are stated fully and placed in context.",
             "Problem and objectives are clear; a few contextual details are missing.",
             "Problem is stated thinly; several parameters or constraints are absent.",
             "Problem is unclear or misread; little connection to the engineering context.")},
      {"engineering_principles", "Application of Engineering Principles", 25,
       bands("Relevant principles are applied correctly and tied to practical reasoning.",
             "Principles are understood with small errors; theory and practice are linked adequately.",
             "Basic grasp of principles; application is limited or partly mistaken.",
             "Core principles are missing or misapplied.")},
      {"design_methodology", "Design Approach and Methodology", 25,
       bands("Design process is logical and well structured; every choice is justified.",
             "Design process is structured; most choices are justified.",
             "A process is described but structure or justification is weak.",
             "Design approach is unclear or unjustified.")},
      {"critical_reflection", "Critical Reflection and Evaluation", 15,
       bands("Outcomes are evaluated with insight; limitations and realistic improvements are given.",
             "Outcomes and limitations are discussed with some useful suggestions.",
             "Evaluation is descriptive rather than analytical.",
             "Little or no reflection on outcomes or limitations.")},
      {"communication", "Communication and Presentation", 15,
       bands("Organized, concise and professional; accurate terminology; figures and references complete.",
             "Clear and coherent; minor organization or formatting issues.",
             "Ideas come across but clarity, formatting or language need work.",
             "Poorly structured or unclear; major errors in communication or referencing.")},
  };
  return r;
}

json rubric_to_json(const Rubric& rubric) {
  json criteria = json::array();
  for (const auto& c : rubric.criteria) {
    json bands = json::array();
    for (const auto& b : c.bands) {
      bands.push_back({{"label", std::string(to_string(b.label))},
                       {"lo_percent", b.lo_percent},
                       {"hi_percent", b.hi_percent},
                       {"descriptor", b.descriptor}});
    }
    criteria.push_back({{"id", c.id}, {"name", c.name}, {"weight_percent", c.weight_percent}, {"bands", bands}});
  }
  return {{"id", rubric.id}, {"title", rubric.title}, {"criteria", criteria}};
}

Rubric rubric_from_json(const json& j) {
  Rubric r;
  try {
    r.id = j.at("id").get<std::string>();
    r.title = j.at("title").get<std::string>();
    for (const auto& cj : j.at("criteria")) {
      Criterion c;
      c.id = cj.at("id").get<std::string>();
      c.name = cj.at("name").get<std::string>();
      c.weight_percent = cj.at("weight_percent").get<double>();
      for (const auto& bj : cj.at("bands")) {
        c.bands.push_back({parse_band_label(bj.at("label").get<std::string>()), bj.at("lo_percent").get<double>(),
                           bj.at("hi_percent").get<double>(), bj.value("descriptor", std::string{})});
      }
      r.criteria.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("malformed rubric definition: ") + e.what());
  }
  validate_rubric(r);
  return r;
}

Rubric load_rubric(const std::filesystem::path& path) {
  try {
    return rubric_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidInput, path.string() + ": " + e.what());
  }
}

}  // namespace ragrade
