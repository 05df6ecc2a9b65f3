#pragma once

// Benchmark metrics over step scores.
//
// First-error detection: the predicted first error is the smallest t with
// reward_t < tau. F1 is the harmonic mean of accuracy on erroneous cases
// (exact index match) and accuracy on all-correct cases.
//
// Step judgment: a step is predicted erroneous iff reward_t < tau. PRMScore
// is 100 x the arithmetic mean of the error-class F1 and the correct-class F1.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hprm/core.hpp"

namespace hprm::eval {

inline constexpr double kDefaultTau = 0.5;

/// 1-based first erroneous step; nullopt means all steps correct.
using FirstError = std::optional<std::size_t>;
inline constexpr std::nullopt_t kAllCorrect = std::nullopt;

struct FirstErrorCase {
  std::string id;
  ReasoningTrace trace;
  FirstError gold_first_error;
};

struct StepJudgmentCase {
  std::string id;
  ReasoningTrace trace;
  std::vector<int> gold_labels;  // 1 correct, 0 erroneous; one per step
  std::string category_tag;
};

/// Throws ValidationError if scores are empty or tau is outside (0, 1).
FirstError predict_first_error(std::span<const StepScore> scores, double tau = kDefaultTau);
std::vector<bool> predict_step_errors(std::span<const StepScore> scores, double tau = kDefaultTau);

struct ProcessBenchMetrics {
  double acc_error = 0.0;
  double acc_correct = 0.0;
  double f1 = 0.0;
  std::size_t n_error = 0;
  std::size_t n_correct = 0;
};

/// Throws MetricUndefinedError naming the side with no cases.
ProcessBenchMetrics processbench_f1(std::span<const FirstErrorCase> cases, std::span<const FirstError> predictions);

// Counts with the erroneous step as the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  Confusion& operator+=(const Confusion& o);
  bool operator==(const Confusion&) const = default;
};

/// OpenMP reduction over cases; predicted_errors[i][t] is true when step t of
/// case i is predicted erroneous.
Confusion confusion_counts(std::span<const StepJudgmentCase> cases, std::span<const std::vector<bool>> predicted_errors);
Confusion confusion_counts_serial(std::span<const StepJudgmentCase> cases,
                                  std::span<const std::vector<bool>> predicted_errors);

struct PrmScoreMetrics {
  std::optional<double> f1_error_class;    // undefined when gold has no erroneous step
  std::optional<double> f1_correct_class;  // undefined when gold has no correct step
  double prmscore = 0.0;
  bool degraded = false;  // only one F1 was defined
  Confusion confusion;
};

PrmScoreMetrics prmscore_from_confusion(const Confusion& c);
PrmScoreMetrics prmscore(std::span<const StepJudgmentCase> cases, std::span<const std::vector<bool>> predicted_errors);

struct CategoryAxis {
  std::string name;
  std::vector<std::string> tags;
};

/// Simplicity {NR, NCL}, Soundness {ES, SC, DC, CI}, Sensitivity {PS, DR, MS}.
std::vector<CategoryAxis> default_taxonomy();

struct CategoryReport {
  std::map<std::string, PrmScoreMetrics> per_tag;
  std::map<std::string, double> axis_average;  // mean of member-tag PRMScores
  PrmScoreMetrics overall;
  std::vector<std::string> warnings;
};

/// Mean PRMScore of each axis's present tags. Axes with no present tag are
/// omitted and a warning is appended.
std::map<std::string, double> axis_averages(const std::map<std::string, double>& per_tag,
                                            std::span<const CategoryAxis> taxonomy,
                                            std::vector<std::string>& warnings);

/// Throws ValidationError on a tag outside the taxonomy.
CategoryReport per_category_report(std::span<const StepJudgmentCase> cases,
                                   std::span<const std::vector<bool>> predicted_errors,
                                   std::span<const CategoryAxis> taxonomy = default_taxonomy());

// Benchmark records: {id?, question, steps[], gold_first_error | labels[], category_tag?}.
// gold_first_error is a 1-based index, or null / "ALL_CORRECT" when every step is correct.
std::vector<FirstErrorCase> first_error_cases_from_json(const std::vector<json>& lines);
std::vector<StepJudgmentCase> step_judgment_cases_from_json(const std::vector<json>& lines);
json to_json(const FirstErrorCase& c);
json to_json(const StepJudgmentCase& c);

json to_json(const ProcessBenchMetrics& m);
json to_json(const PrmScoreMetrics& m);
json to_json(const CategoryReport& r);

}  // namespace hprm::eval
