#pragma once

// Reward-guided step search and the k-sample baselines it is compared to.
//
// Greedy (prm@k): at each expansion the policy proposes k next steps, each is
// scored as step t under the current prefix with the full two-pass reward,
// and the highest-reward candidate is appended (first index on ties).
// FirstCandidate: the unguided policy, one sample per step.
// BestOfN: k unguided full solutions reranked by their minimum step reward.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hprm/answer.hpp"
#include "hprm/core.hpp"
#include "hprm/errors.hpp"
#include "hprm/scorer.hpp"

namespace hprm::search {

struct ProposeRequest {
  std::string question;
  std::vector<std::string> steps_so_far;
  std::size_t n = 1;
  std::string stop;  // answer marker that ends a solution
  std::uint64_t seed = 0;
};

class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;
  /// Up to n candidate next steps; fewer is a declared shortfall.
  virtual std::vector<std::string> propose(const ProposeRequest& request) = 0;
  virtual std::string id() const = 0;
  /// Sampling settings, recorded verbatim in transcripts.
  virtual json config() const { return json::object(); }
};

enum class SearchMode { Greedy, FirstCandidate, BestOfN };

const char* to_string(SearchMode m);
SearchMode search_mode_from_string(const std::string& s);

struct SearchConfig {
  std::size_t k = 8;
  std::size_t max_steps = 16;
  std::string answer_marker = "\\boxed{";
  std::uint64_t seed = 0;
  SearchMode mode = SearchMode::Greedy;
  bool parallel_scoring = true;
  scorer::DecodeOptions decode;

  void validate() const;
};

struct Expansion {
  std::size_t step_index = 1;
  std::vector<std::string> candidates;
  std::vector<StepScore> scores;  // empty in FirstCandidate mode
  std::size_t chosen = 0;
  bool shortfall = false;
};

struct SolutionSample {
  std::vector<std::string> steps;
  std::vector<StepScore> scores;
  double aggregate_reward = 0.0;  // min over step rewards
  std::optional<std::string> final_answer;
  bool complete = false;
};

struct SearchTranscript {
  std::string question;
  SearchMode mode = SearchMode::Greedy;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<Expansion> expansions;
  std::vector<SolutionSample> samples;  // BestOfN only
  std::optional<std::size_t> chosen_sample;
  std::vector<std::string> steps;
  std::optional<std::string> final_answer;
  bool complete = false;  // ended on the answer marker within max_steps
  std::string policy_id;
  std::string scorer_id;
  json policy_config = json::object();
};

class SearchError : public Error {
 public:
  explicit SearchError(const std::string& what) : Error(ErrorCategory::Backend, what) {}
};

/// Scorer failed mid-search; carries everything recorded up to that point.
class SearchAborted : public Error {
 public:
  SearchAborted(const Error& cause, SearchTranscript partial)
      : Error(cause.category(), std::string("search aborted: ") + cause.what()), partial_(std::move(partial)) {}
  const SearchTranscript& partial() const { return partial_; }

 private:
  SearchTranscript partial_;
};

/// Index of the largest value; the first one wins ties.
std::size_t argmax_first(std::span<const double> values);

SearchTranscript guided_greedy_search(PolicyBackend& policy, scorer::ScorerBackend& scorer,
                                      const std::string& question, const SearchConfig& config);
SearchTranscript first_candidate_search(PolicyBackend& policy, const std::string& question,
                                        const SearchConfig& config);
SearchTranscript best_of_n_search(PolicyBackend& policy, scorer::ScorerBackend& scorer, const std::string& question,
                                  const SearchConfig& config);
/// Dispatches on config.mode.
SearchTranscript run_search(PolicyBackend& policy, scorer::ScorerBackend& scorer, const std::string& question,
                            const SearchConfig& config);

struct Problem {
  std::string id;
  std::string question;
  std::string gold_answer;
};

struct ProblemOutcome {
  std::string id;
  SearchTranscript transcript;
  bool search_correct = false;
  std::vector<std::string> sample_answers;  // k unguided samples ("" when incomplete)
  bool pass1_correct = false;
  bool major_correct = false;
  bool passk_correct = false;
};

struct SearchSummary {
  std::size_t problems = 0;
  double search_accuracy = 0.0;  // prm@k in Greedy mode
  double pass_at_1 = 0.0;
  double major_at_k = 0.0;
  double pass_at_k = 0.0;
};

struct SearchBenchmark {
  std::vector<ProblemOutcome> outcomes;
  SearchSummary summary;
};

/// Runs the configured search plus k unguided samples per problem.
SearchBenchmark run_search_benchmark(std::span<const Problem> problems, PolicyBackend& policy,
                                     scorer::ScorerBackend& scorer, const SearchConfig& config,
                                     const answer::Equivalence& eq = answer::default_equivalence());

json to_json(const SearchTranscript& t);
/// Line-delimited records: one per expansion (or sample), then a final record.
std::vector<json> transcript_records(const std::string& problem_id, const SearchTranscript& t);
json to_json(const SearchSummary& s);
std::vector<Problem> problems_from_json(const std::vector<json>& lines);

}  // namespace hprm::search
