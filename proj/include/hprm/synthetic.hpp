#pragma once

// Synthetic fixtures with planted, known answers: marked benchmark traces for
// the mock oracle, arithmetic problems with a mock policy, and raw corpus
// inputs with judge responses.

#include <cstdint>
#include <string>
#include <vector>

#include "hprm/core.hpp"
#include "hprm/dataset.hpp"
#include "hprm/evaluator.hpp"
#include "hprm/search.hpp"

namespace hprm::synthetic {

inline constexpr const char* kMarkers[] = {"[ERRMATH]", "[ERRCONS]", "[SUBOPT]"};

struct MarkedTrace {
  ReasoningTrace trace;
  std::vector<std::string> markers;  // per step, "" when clean
  eval::FirstError first_error;
  std::vector<int> gold_labels;  // 0 where a marker is planted
  std::string category_tag;
};

struct BenchmarkSpec {
  std::size_t traces = 200;
  std::uint64_t seed = 0;
  std::size_t min_steps = 3;
  std::size_t max_steps = 6;
  double erroneous_fraction = 0.5;
  double later_marker_rate = 0.3;  // markers after the first error
};

std::vector<MarkedTrace> make_benchmark(const BenchmarkSpec& spec);
std::vector<eval::FirstErrorCase> first_error_cases(const std::vector<MarkedTrace>& traces);
std::vector<eval::StepJudgmentCase> step_judgment_cases(const std::vector<MarkedTrace>& traces);

struct ProblemSpec {
  std::size_t problems = 200;
  std::uint64_t seed = 0;
  std::size_t min_terms = 3;
  std::size_t max_terms = 5;
};

/// "Compute a + b + ... ." with the sum as gold answer.
std::vector<search::Problem> make_problems(const ProblemSpec& spec);

/// Mock policy for the arithmetic problems. Each candidate adds the next
/// term to the running total; with probability error_rate it gets the sum
/// wrong and carries "[ERRMATH]". When n >= 2 at least one candidate is
/// clean. The step adding the last term states "\boxed{total}".
class ArithmeticPolicy : public search::PolicyBackend {
 public:
  ArithmeticPolicy(double error_rate, std::uint64_t seed);

  std::vector<std::string> propose(const search::ProposeRequest& request) override;
  std::string id() const override { return "arithmetic-mock"; }
  json config() const override;

  std::size_t calls() const { return calls_; }

 private:
  double error_rate_;
  std::uint64_t seed_;
  std::size_t calls_ = 0;
};

struct CorpusFixtureSpec {
  std::size_t prm800k_traces = 1000;
  std::size_t mistral_traces = 1000;
  std::size_t steps_per_trace = 5;
  std::uint64_t seed = 0;
  double missing_verdict_rate = 0.02;
};

struct CorpusFixture {
  std::vector<dataset::RawTrace> prm800k;
  std::vector<dataset::RawTrace> mistral;
  std::vector<json> verdict_lines;  // {prompt_id, response}
};

CorpusFixture make_corpus_fixture(const CorpusFixtureSpec& spec);

/// A judge response in the annotation format.
std::string judge_response(int a, int b, int c, const std::string& reasoning = "Checked each criterion.");

}  // namespace hprm::synthetic
