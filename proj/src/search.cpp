#include "hprm/search.hpp"

#include <algorithm>

#include "hprm/hashing.hpp"
#include "hprm/parallel.hpp"

namespace hprm::search {

const char* to_string(SearchMode m) {
  switch (m) {
    case SearchMode::Greedy: return "greedy";
    case SearchMode::FirstCandidate: return "first-candidate";
    case SearchMode::BestOfN: return "best-of-n";
  }
  return "?";
}

SearchMode search_mode_from_string(const std::string& s) {
  if (s == "greedy") return SearchMode::Greedy;
  if (s == "first-candidate") return SearchMode::FirstCandidate;
  if (s == "best-of-n") return SearchMode::BestOfN;
  throw ValidationError("unknown search mode \"" + s + "\" (greedy | first-candidate | best-of-n)");
}

void SearchConfig::validate() const {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (max_steps < 1) throw ValidationError("max_steps must be >= 1");
  if (answer_marker.empty()) throw ValidationError("answer marker must be non-empty");
}

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

namespace {

SearchTranscript start_transcript(PolicyBackend& policy, const scorer::ScorerBackend* scorer,
                                  const std::string& question, const SearchConfig& config) {
  config.validate();
  SearchTranscript t;
  t.question = question;
  t.mode = config.mode;
  t.k = config.k;
  t.seed = config.seed;
  t.policy_id = policy.id();
  t.scorer_id = scorer ? scorer->id() : "";
  t.policy_config = policy.config();
  return t;
}

std::vector<std::string> propose_checked(PolicyBackend& policy, const ProposeRequest& req) {
  auto candidates = policy.propose(req);
  if (candidates.empty())
    throw SearchError("policy returned no candidates for step " + std::to_string(req.steps_so_far.size() + 1));
  if (candidates.size() > req.n) candidates.resize(req.n);
  return candidates;
}

void finish_step(SearchTranscript& t, const std::string& chosen, const SearchConfig& config) {
  t.steps.push_back(chosen);
  if (chosen.find(config.answer_marker) != std::string::npos) {
    t.complete = true;
    t.final_answer = answer::extract_answer_span(chosen);
  }
}

std::vector<StepScore> score_candidates(scorer::ScorerBackend& scorer, const std::string& question,
                                        const std::vector<std::string>& prefix,
                                        const std::vector<std::string>& candidates, const SearchConfig& config) {
  std::vector<StepScore> scores(candidates.size());
  const bool parallel = config.parallel_scoring && scorer.capabilities().max_in_flight > 1;
  parallel_for(candidates.size(), parallel, [&](std::size_t j) {
    scores[j] = scorer::score_step(scorer, question, prefix, candidates[j], config.decode);
  });
  return scores;
}

std::uint64_t sample_seed(std::uint64_t seed, std::size_t sample) { return splitmix64(seed ^ (0x5bd1e995ULL * (sample + 1))); }

}  // namespace

SearchTranscript guided_greedy_search(PolicyBackend& policy, scorer::ScorerBackend& scorer,
                                      const std::string& question, const SearchConfig& config) {
  auto t = start_transcript(policy, &scorer, question, config);
  while (!t.complete && t.steps.size() < config.max_steps) {
    Expansion e;
    e.step_index = t.steps.size() + 1;
    e.candidates = propose_checked(policy, {question, t.steps, config.k, config.answer_marker, config.seed});
    e.shortfall = e.candidates.size() < config.k;
    try {
      e.scores = score_candidates(scorer, question, t.steps, e.candidates, config);
    } catch (const Error& err) {
      t.expansions.push_back(std::move(e));
      throw SearchAborted(err, std::move(t));
    }
    std::vector<double> rewards;
    rewards.reserve(e.scores.size());
    for (const auto& s : e.scores) rewards.push_back(s.reward);
    e.chosen = argmax_first(rewards);
    const std::string chosen = e.candidates[e.chosen];
    t.expansions.push_back(std::move(e));
    finish_step(t, chosen, config);
  }
  return t;
}

SearchTranscript first_candidate_search(PolicyBackend& policy, const std::string& question,
                                        const SearchConfig& config) {
  auto t = start_transcript(policy, nullptr, question, config);
  while (!t.complete && t.steps.size() < config.max_steps) {
    Expansion e;
    e.step_index = t.steps.size() + 1;
    e.candidates = propose_checked(policy, {question, t.steps, 1, config.answer_marker, config.seed});
    e.chosen = 0;
    const std::string chosen = e.candidates.front();
    t.expansions.push_back(std::move(e));
    finish_step(t, chosen, config);
  }
  return t;
}

SearchTranscript best_of_n_search(PolicyBackend& policy, scorer::ScorerBackend& scorer, const std::string& question,
                                  const SearchConfig& config) {
  auto t = start_transcript(policy, &scorer, question, config);
  std::vector<double> aggregates;
  for (std::size_t i = 0; i < config.k; ++i) {
    SearchConfig rollout = config;
    rollout.seed = sample_seed(config.seed, i);
    const auto r = first_candidate_search(policy, question, rollout);
    SolutionSample s{r.steps, {}, 0.0, r.final_answer, r.complete};
    try {
      ReasoningTrace trace{question, s.steps, s.final_answer, ""};
      s.scores = scorer::score_trace(scorer, trace, config.decode);
    } catch (const Error& err) {
      t.samples.push_back(std::move(s));
      throw SearchAborted(err, std::move(t));
    }
    s.aggregate_reward = 1.0;
    for (const auto& sc : s.scores) s.aggregate_reward = std::min(s.aggregate_reward, sc.reward);
    aggregates.push_back(s.aggregate_reward);
    t.samples.push_back(std::move(s));
  }
  const std::size_t best = argmax_first(aggregates);
  t.chosen_sample = best;
  t.steps = t.samples[best].steps;
  t.final_answer = t.samples[best].final_answer;
  t.complete = t.samples[best].complete;
  return t;
}

SearchTranscript run_search(PolicyBackend& policy, scorer::ScorerBackend& scorer, const std::string& question,
                            const SearchConfig& config) {
  switch (config.mode) {
    case SearchMode::Greedy: return guided_greedy_search(policy, scorer, question, config);
    case SearchMode::FirstCandidate: return first_candidate_search(policy, question, config);
    case SearchMode::BestOfN: return best_of_n_search(policy, scorer, question, config);
  }
  throw UsageError("unknown search mode");
}

SearchBenchmark run_search_benchmark(std::span<const Problem> problems, PolicyBackend& policy,
                                     scorer::ScorerBackend& scorer, const SearchConfig& config,
                                     const answer::Equivalence& eq) {
  config.validate();
  SearchBenchmark out;
  std::vector<std::vector<std::string>> answer_sets;
  std::vector<std::string> golds;
  std::size_t search_hits = 0, pass1_hits = 0, major_hits = 0;
  for (const auto& p : problems) {
    ProblemOutcome o;
    o.id = p.id;
    o.transcript = run_search(policy, scorer, p.question, config);
    o.search_correct = o.transcript.final_answer && eq(*o.transcript.final_answer, p.gold_answer);
    for (std::size_t i = 0; i < config.k; ++i) {
      SearchConfig rollout = config;
      rollout.seed = sample_seed(config.seed, i);
      const auto r = first_candidate_search(policy, p.question, rollout);
      o.sample_answers.push_back(r.final_answer.value_or(""));
    }
    o.pass1_correct = eq(o.sample_answers.front(), p.gold_answer);
    o.major_correct = eq(answer::majority_vote(o.sample_answers, eq), p.gold_answer);
    o.passk_correct = std::any_of(o.sample_answers.begin(), o.sample_answers.end(),
                                  [&](const std::string& a) { return eq(a, p.gold_answer); });
    search_hits += o.search_correct;
    pass1_hits += o.pass1_correct;
    major_hits += o.major_correct;
    answer_sets.push_back(o.sample_answers);
    golds.push_back(p.gold_answer);
    out.outcomes.push_back(std::move(o));
  }
  auto& s = out.summary;
  s.problems = problems.size();
  if (!problems.empty()) {
    const double n = static_cast<double>(problems.size());
    s.search_accuracy = static_cast<double>(search_hits) / n;
    s.pass_at_1 = static_cast<double>(pass1_hits) / n;
    s.major_at_k = static_cast<double>(major_hits) / n;
    s.pass_at_k = answer::pass_at_k(answer_sets, golds, eq);
  }
  return out;
}

namespace {

json expansion_json(const Expansion& e) {
  json scores = json::array();
  for (const auto& s : e.scores) scores.push_back(s);
  json rewards = json::array();
  for (const auto& s : e.scores) rewards.push_back(s.reward);
  return {{"step_index", e.step_index}, {"candidates", e.candidates}, {"rewards", rewards},
          {"scores", scores},           {"chosen", e.chosen},         {"shortfall", e.shortfall}};
}

json sample_json(const SolutionSample& s) {
  json scores = json::array();
  for (const auto& sc : s.scores) scores.push_back(sc);
  return {{"steps", s.steps},
          {"scores", scores},
          {"aggregate_reward", s.aggregate_reward},
          {"final_answer", s.final_answer ? json(*s.final_answer) : json(nullptr)},
          {"complete", s.complete}};
}

json final_json(const SearchTranscript& t) {
  json j{{"question", t.question},
         {"mode", to_string(t.mode)},
         {"k", t.k},
         {"seed", t.seed},
         {"steps", t.steps},
         {"final_answer", t.final_answer ? json(*t.final_answer) : json(nullptr)},
         {"complete", t.complete},
         {"policy", t.policy_id},
         {"scorer", t.scorer_id},
         {"policy_config", t.policy_config}};
  if (t.chosen_sample) j["chosen_sample"] = *t.chosen_sample;
  return j;
}

}  // namespace

json to_json(const SearchTranscript& t) {
  json j = final_json(t);
  j["expansions"] = json::array();
  for (const auto& e : t.expansions) j["expansions"].push_back(expansion_json(e));
  if (!t.samples.empty()) {
    j["samples"] = json::array();
    for (const auto& s : t.samples) j["samples"].push_back(sample_json(s));
  }
  return j;
}

std::vector<json> transcript_records(const std::string& problem_id, const SearchTranscript& t) {
  std::vector<json> out;
  for (const auto& e : t.expansions) {
    json r = expansion_json(e);
    r["problem_id"] = problem_id;
    r["record"] = "expansion";
    out.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    json r = sample_json(t.samples[i]);
    r["problem_id"] = problem_id;
    r["record"] = "sample";
    r["sample_index"] = i;
    out.push_back(std::move(r));
  }
  json f = final_json(t);
  f["problem_id"] = problem_id;
  f["record"] = "final";
  out.push_back(std::move(f));
  return out;
}

json to_json(const SearchSummary& s) {
  return {{"problems", s.problems},
          {"search_accuracy", s.search_accuracy},
          {"pass_at_1", s.pass_at_1},
          {"major_at_k", s.major_at_k},
          {"pass_at_k", s.pass_at_k}};
}

std::vector<Problem> problems_from_json(const std::vector<json>& lines) {
  std::vector<Problem> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    if (!j.contains("question") || !j.contains("gold_answer"))
      throw ParseError("problem record " + std::to_string(i + 1) + " needs 'question' and 'gold_answer'");
    Problem p;
    p.id = j.value("id", "p" + std::to_string(i + 1));
    p.question = j.at("question").get<std::string>();
    const auto& g = j.at("gold_answer");
    p.gold_answer = g.is_string() ? g.get<std::string>() : g.dump();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace hprm::search
