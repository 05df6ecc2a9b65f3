#include "hprm/evaluator.hpp"

#include <algorithm>
#include <set>

#include "hprm/errors.hpp"
#include "hprm/log.hpp"

namespace hprm::eval {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("threshold tau must lie in (0, 1)");
}

double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

void check_alignment(std::span<const StepJudgmentCase> cases, std::span<const std::vector<bool>> predicted) {
  if (cases.size() != predicted.size()) throw ValidationError("one prediction vector per case required");
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].gold_labels.size() != predicted[i].size())
      throw ValidationError("case " + cases[i].id + ": prediction length differs from gold label count");
  }
}

Confusion count_case(const StepJudgmentCase& c, const std::vector<bool>& pred) {
  Confusion k;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const bool gold_error = c.gold_labels[t] == 0;
    if (gold_error && pred[t]) ++k.tp;
    else if (!gold_error && pred[t]) ++k.fp;
    else if (gold_error) ++k.fn;
    else ++k.tn;
  }
  return k;
}

FirstError parse_gold_first_error(const json& v, std::size_t steps, const std::string& id) {
  if (v.is_null()) return kAllCorrect;
  if (v.is_string()) {
    if (v.get<std::string>() == "ALL_CORRECT") return kAllCorrect;
    throw ParseError("case " + id + ": gold_first_error string must be \"ALL_CORRECT\"");
  }
  if (!v.is_number_integer()) throw ParseError("case " + id + ": gold_first_error must be an integer");
  const auto t = v.get<long long>();
  if (t < 1 || static_cast<std::size_t>(t) > steps)
    throw ValidationError("case " + id + ": gold_first_error outside 1.." + std::to_string(steps));
  return static_cast<std::size_t>(t);
}

ReasoningTrace trace_from(const json& j, const std::string& id) {
  auto t = j.get<ReasoningTrace>();
  t.source_id = id;
  validate_trace(t);
  return t;
}

std::string case_id(const json& j, std::size_t i) {
  if (j.contains("id")) return j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  return std::to_string(i + 1);
}

}  // namespace

FirstError predict_first_error(std::span<const StepScore> scores, double tau) {
  check_tau(tau);
  if (scores.empty()) throw ValidationError("no step scores");
  for (std::size_t t = 0; t < scores.size(); ++t)
    if (scores[t].reward < tau) return t + 1;
  return kAllCorrect;
}

std::vector<bool> predict_step_errors(std::span<const StepScore> scores, double tau) {
  check_tau(tau);
  std::vector<bool> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(s.reward < tau);
  return out;
}

ProcessBenchMetrics processbench_f1(std::span<const FirstErrorCase> cases, std::span<const FirstError> predictions) {
  if (cases.size() != predictions.size()) throw ValidationError("one prediction per case required");
  ProcessBenchMetrics m;
  std::size_t hit_error = 0, hit_correct = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].gold_first_error) {
      ++m.n_error;
      hit_error += predictions[i] == cases[i].gold_first_error;
    } else {
      ++m.n_correct;
      hit_correct += !predictions[i].has_value();
    }
  }
  if (m.n_error == 0) throw MetricUndefinedError("first-error F1 undefined: no erroneous cases");
  if (m.n_correct == 0) throw MetricUndefinedError("first-error F1 undefined: no all-correct cases");
  m.acc_error = static_cast<double>(hit_error) / static_cast<double>(m.n_error);
  m.acc_correct = static_cast<double>(hit_correct) / static_cast<double>(m.n_correct);
  const double sum = m.acc_error + m.acc_correct;
  m.f1 = (m.acc_error == 0.0 || m.acc_correct == 0.0) ? 0.0 : 2.0 * m.acc_error * m.acc_correct / sum;
  return m;
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

Confusion confusion_counts(std::span<const StepJudgmentCase> cases, std::span<const std::vector<bool>> predicted) {
  check_alignment(cases, predicted);
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  const auto n = static_cast<std::ptrdiff_t>(cases.size());
#pragma omp parallel for reduction(+ : tp, fp, fn, tn) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = count_case(cases[i], predicted[i]);
    tp += k.tp;
    fp += k.fp;
    fn += k.fn;
    tn += k.tn;
  }
  return {tp, fp, fn, tn};
}

Confusion confusion_counts_serial(std::span<const StepJudgmentCase> cases,
                                  std::span<const std::vector<bool>> predicted) {
  check_alignment(cases, predicted);
  Confusion total;
  for (std::size_t i = 0; i < cases.size(); ++i) total += count_case(cases[i], predicted[i]);
  return total;
}

PrmScoreMetrics prmscore_from_confusion(const Confusion& c) {
  PrmScoreMetrics m;
  m.confusion = c;
  const std::size_t gold_errors = c.tp + c.fn;
  const std::size_t gold_correct = c.tn + c.fp;
  if (gold_errors == 0 && gold_correct == 0) throw MetricUndefinedError("PRMScore undefined: no steps");
  // Correct-class view swaps roles: TP' = TN, FP' = FN, FN' = FP.
  if (gold_errors > 0) m.f1_error_class = f1_of(c.tp, c.fp, c.fn);
  if (gold_correct > 0) m.f1_correct_class = f1_of(c.tn, c.fn, c.fp);
  if (m.f1_error_class && m.f1_correct_class) {
    m.prmscore = 100.0 * (*m.f1_error_class + *m.f1_correct_class) / 2.0;
  } else {
    m.degraded = true;
    m.prmscore = 100.0 * (m.f1_error_class ? *m.f1_error_class : *m.f1_correct_class);
  }
  return m;
}

PrmScoreMetrics prmscore(std::span<const StepJudgmentCase> cases, std::span<const std::vector<bool>> predicted) {
  auto m = prmscore_from_confusion(confusion_counts(cases, predicted));
  if (m.degraded)
    log::warn(std::string("PRMScore degraded: gold has no ") + (m.f1_error_class ? "correct" : "erroneous") +
              " steps, reporting the single defined F1");
  return m;
}

std::vector<CategoryAxis> default_taxonomy() {
  return {{"Simplicity", {"NR", "NCL"}}, {"Soundness", {"ES", "SC", "DC", "CI"}}, {"Sensitivity", {"PS", "DR", "MS"}}};
}

std::map<std::string, double> axis_averages(const std::map<std::string, double>& per_tag,
                                            std::span<const CategoryAxis> taxonomy,
                                            std::vector<std::string>& warnings) {
  std::map<std::string, double> out;
  for (const auto& axis : taxonomy) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& tag : axis.tags) {
      if (const auto it = per_tag.find(tag); it != per_tag.end()) {
        sum += it->second;
        ++n;
      }
    }
    if (n == 0) {
      warnings.push_back("axis " + axis.name + " has no cases; omitted");
      continue;
    }
    out[axis.name] = sum / static_cast<double>(n);
  }
  return out;
}

CategoryReport per_category_report(std::span<const StepJudgmentCase> cases,
                                   std::span<const std::vector<bool>> predicted,
                                   std::span<const CategoryAxis> taxonomy) {
  check_alignment(cases, predicted);
  std::set<std::string> known;
  for (const auto& axis : taxonomy) known.insert(axis.tags.begin(), axis.tags.end());

  std::map<std::string, Confusion> by_tag;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& tag = cases[i].category_tag;
    if (!known.count(tag)) throw ValidationError("case " + cases[i].id + ": unknown category tag \"" + tag + "\"");
    by_tag[tag] += count_case(cases[i], predicted[i]);
  }

  CategoryReport r;
  std::map<std::string, double> scores;
  for (const auto& [tag, conf] : by_tag) {
    auto m = prmscore_from_confusion(conf);
    if (m.degraded) r.warnings.push_back("tag " + tag + ": only one class present in gold; PRMScore degraded");
    scores[tag] = m.prmscore;
    r.per_tag.emplace(tag, m);
  }
  r.axis_average = axis_averages(scores, taxonomy, r.warnings);
  r.overall = prmscore_from_confusion(confusion_counts(cases, predicted));
  for (const auto& w : r.warnings) log::warn(w);
  return r;
}

std::vector<FirstErrorCase> first_error_cases_from_json(const std::vector<json>& lines) {
  std::vector<FirstErrorCase> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    FirstErrorCase c;
    c.id = case_id(j, i);
    try {
      c.trace = trace_from(j, c.id);
      if (!j.contains("gold_first_error")) throw ParseError("case " + c.id + ": missing gold_first_error");
      c.gold_first_error = parse_gold_first_error(j.at("gold_first_error"), c.trace.size(), c.id);
    } catch (const json::exception& e) {
      throw ParseError("case " + c.id + ": " + e.what());
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<StepJudgmentCase> step_judgment_cases_from_json(const std::vector<json>& lines) {
  std::vector<StepJudgmentCase> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    StepJudgmentCase c;
    c.id = case_id(j, i);
    try {
      c.trace = trace_from(j, c.id);
      c.gold_labels = j.at("labels").get<std::vector<int>>();
      c.category_tag = j.value("category_tag", std::string{});
    } catch (const json::exception& e) {
      throw ParseError("case " + c.id + ": " + e.what());
    }
    if (c.gold_labels.size() != c.trace.size())
      throw ValidationError("case " + c.id + ": labels length differs from step count");
    if (std::any_of(c.gold_labels.begin(), c.gold_labels.end(), [](int v) { return v != 0 && v != 1; }))
      throw ValidationError("case " + c.id + ": labels must be 0 or 1");
    out.push_back(std::move(c));
  }
  return out;
}

json to_json(const FirstErrorCase& c) {
  return {{"id", c.id},
          {"question", c.trace.question},
          {"steps", c.trace.steps},
          {"gold_first_error", c.gold_first_error ? json(*c.gold_first_error) : json(nullptr)}};
}

json to_json(const StepJudgmentCase& c) {
  return {{"id", c.id},
          {"question", c.trace.question},
          {"steps", c.trace.steps},
          {"labels", c.gold_labels},
          {"category_tag", c.category_tag}};
}

json to_json(const ProcessBenchMetrics& m) {
  return {{"acc_error", m.acc_error}, {"acc_correct", m.acc_correct}, {"f1", m.f1},
          {"n_error", m.n_error},     {"n_correct", m.n_correct}};
}

json to_json(const PrmScoreMetrics& m) {
  return {{"f1_error_class", m.f1_error_class ? json(*m.f1_error_class) : json(nullptr)},
          {"f1_correct_class", m.f1_correct_class ? json(*m.f1_correct_class) : json(nullptr)},
          {"prmscore", m.prmscore},
          {"degraded", m.degraded},
          {"confusion", {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"fn", m.confusion.fn}, {"tn", m.confusion.tn}}}};
}

json to_json(const CategoryReport& r) {
  json tags = json::object();
  for (const auto& [tag, m] : r.per_tag) tags[tag] = to_json(m);
  return {{"per_tag", tags}, {"axis_average", r.axis_average}, {"overall", to_json(r.overall)}, {"warnings", r.warnings}};
}

}  // namespace hprm::eval
