#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <sstream>

#include "cli.hpp"
#include "hprm/dataset.hpp"
#include "hprm/errors.hpp"
#include "hprm/evaluator.hpp"
#include "hprm/hashing.hpp"
#include "hprm/jsonl.hpp"
#include "hprm/log.hpp"
#include "hprm/mock_backend.hpp"
#include "hprm/remote.hpp"
#include "hprm/scorer.hpp"
#include "hprm/search.hpp"
#include "hprm/synthetic.hpp"

namespace hprm::cli {

namespace fs = std::filesystem;

namespace {

// All config problems found before any work starts.
class ConfigErrors : public ValidationError {
 public:
  explicit ConfigErrors(std::vector<std::string> problems)
      : ValidationError(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = std::to_string(p.size()) + " configuration problem(s): ";
    for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "; " : "") + p[i];
    return s;
  }
  std::vector<std::string> problems_;
};

class Checks {
 public:
  void require(bool ok, const std::string& message) {
    if (!ok) problems_.push_back(message);
  }
  void input_file(const std::string& flag, const std::string& path) {
    if (path.empty()) return;
    if (!fs::is_regular_file(path)) problems_.push_back(flag + ": no such file: " + path);
  }
  void raise() const {
    if (!problems_.empty()) throw ConfigErrors(problems_);
  }

 private:
  std::vector<std::string> problems_;
};

std::string fixed(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::vector<json> strip_meta(std::vector<json> lines) {
  std::erase_if(lines, [](const json& j) { return j.is_object() && j.size() == 1 && j.contains("meta"); });
  return lines;
}

json make_meta(const std::string& command, const json& config, const json& seeds) {
  const auto& tpl = scorer::default_template();
  return {{"tool", "hprm"},
          {"tool_version", HPRM_VERSION},
          {"command", command},
          {"config_hash", to_hex(fnv1a64(config.dump()))},
          {"template_version", tpl.version},
          {"template_hash", tpl.hash()},
          {"seeds", seeds},
          {"config", config}};
}

void write_jsonl(const std::string& path, const json& meta, const std::vector<json>& records) {
  std::vector<json> lines;
  lines.reserve(records.size() + 1);
  lines.push_back({{"meta", meta}});
  lines.insert(lines.end(), records.begin(), records.end());
  io::write_jsonl(path, lines);
}

void write_json(const std::string& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

std::string sibling(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

scorer::TieBreak tie_from_string(const std::string& s) {
  return s == "neg" ? scorer::TieBreak::Neg : scorer::TieBreak::Pos;
}

// ---------------------------------------------------------------------------
// Backends

struct BackendOpts {
  std::string target;
  double mock_noise = 0.0;
  std::uint64_t mock_noise_seed = 0;
  std::string auth_env;
  std::size_t max_in_flight = 4;
  long timeout_ms = 30000;
  int retries = 3;
  std::size_t batch_size = 16;
  std::string math_tie = "pos";
  std::string consistency_tie = "pos";
};

void add_backend_options(CLI::App* sub, BackendOpts& o, const std::string& flag) {
  sub->add_option(flag, o.target, "Scorer backend: mock or http://host:port[/path]")->required();
  sub->add_option("--mock-noise", o.mock_noise, "Mock: probability of flipping the correctness slot");
  sub->add_option("--mock-noise-seed", o.mock_noise_seed, "Mock: seed for the flip draws");
  sub->add_option("--auth-env", o.auth_env, "Environment variable holding a bearer token");
  sub->add_option("--max-in-flight", o.max_in_flight, "Concurrent backend requests");
  sub->add_option("--timeout-ms", o.timeout_ms, "Per-request timeout");
  sub->add_option("--retries", o.retries, "Retries on transient failures");
  sub->add_option("--batch-size", o.batch_size, "Queries per remote envelope");
  sub->add_option("--math-tie", o.math_tie, "Tie-break for the math slot (pos|neg)");
  sub->add_option("--consistency-tie", o.consistency_tie, "Tie-break for the consistency slot (pos|neg)");
}

void check_backend(Checks& c, const BackendOpts& o, const std::string& flag) {
  const bool mock = o.target == "mock";
  c.require(mock || o.target.rfind("http://", 0) == 0, flag + ": expected mock or an http:// URL, got \"" + o.target + "\"");
  c.require(o.mock_noise >= 0.0 && o.mock_noise <= 1.0, "--mock-noise must lie in [0, 1]");
  c.require(o.max_in_flight >= 1, "--max-in-flight must be >= 1");
  c.require(o.timeout_ms > 0, "--timeout-ms must be > 0");
  c.require(o.retries >= 0, "--retries must be >= 0");
  c.require(o.batch_size >= 1, "--batch-size must be >= 1");
  c.require(o.math_tie == "pos" || o.math_tie == "neg", "--math-tie must be pos or neg");
  c.require(o.consistency_tie == "pos" || o.consistency_tie == "neg", "--consistency-tie must be pos or neg");
  if (!mock && !o.auth_env.empty()) {
    const char* v = std::getenv(o.auth_env.c_str());
    c.require(v != nullptr && *v != '\0', "--auth-env: environment variable " + o.auth_env + " is not set");
  }
}

json backend_config(const BackendOpts& o) {
  json j{{"target", o.target}, {"math_tie", o.math_tie}, {"consistency_tie", o.consistency_tie}};
  if (o.target == "mock") {
    j["mock_noise"] = o.mock_noise;
    j["mock_noise_seed"] = o.mock_noise_seed;
  } else {
    j["auth_env"] = o.auth_env;
    j["max_in_flight"] = o.max_in_flight;
    j["timeout_ms"] = o.timeout_ms;
    j["retries"] = o.retries;
    j["batch_size"] = o.batch_size;
  }
  return j;
}

remote::HttpLimits limits_of(const BackendOpts& o) {
  remote::HttpLimits l;
  l.max_in_flight = o.max_in_flight;
  l.timeout = std::chrono::milliseconds(o.timeout_ms);
  l.max_retries = o.retries;
  l.batch_size = o.batch_size;
  return l;
}

std::unique_ptr<scorer::ScorerBackend> make_scorer(const BackendOpts& o) {
  if (o.target == "mock") {
    scorer::MockConfig cfg;
    cfg.noise_rate = o.mock_noise;
    cfg.noise_seed = o.mock_noise_seed;
    cfg.max_in_flight = o.max_in_flight;
    return std::make_unique<scorer::MockOracleBackend>(cfg);
  }
  return std::make_unique<remote::RemoteScorerBackend>(o.target, remote::HttpAuth::from_env(o.auth_env),
                                                      limits_of(o));
}

scorer::DecodeOptions decode_of(const BackendOpts& o) {
  return {tie_from_string(o.math_tie), tie_from_string(o.consistency_tie)};
}

std::vector<ReasoningTrace> load_traces(const std::string& path) {
  const auto lines = strip_meta(io::read_jsonl(path));
  std::vector<ReasoningTrace> traces;
  traces.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      traces.push_back(lines[i].get<ReasoningTrace>());
      validate_trace(traces.back());
    } catch (const json::exception& e) {
      throw ParseError(path + ": trace " + std::to_string(i + 1) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": trace " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return traces;
}

json scores_json(const std::vector<StepScore>& scores) {
  json out = json::array();
  for (std::size_t t = 0; t < scores.size(); ++t) {
    json s = scores[t];
    s["step_index"] = t + 1;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// build-dataset / emit-prompts

struct CorpusArgs {
  std::string prm800k;
  std::string mistral;
  std::string verdicts;
  std::string out;
  std::string rejects;
  std::string stats;
  double sample_rate = 1.0;
  std::uint64_t seed = 0;
  bool truncate = false;
};

void add_corpus_inputs(CLI::App* sub, CorpusArgs& a) {
  sub->add_option("--prm800k", a.prm800k, "PRM800K-style step records (JSONL)");
  sub->add_option("--mistral", a.mistral, "Monte Carlo labeled step records (JSONL)");
  sub->add_option("--sample-rate", a.sample_rate, "Fraction of MC steps sent to the judge");
  sub->add_option("--seed", a.seed, "Sampling seed");
  sub->add_flag("--truncate-after-first-error", a.truncate, "Drop steps after a trace's first negative step");
}

void check_corpus_inputs(Checks& c, const CorpusArgs& a) {
  c.require(!a.prm800k.empty() || !a.mistral.empty(), "at least one of --prm800k / --mistral is required");
  c.input_file("--prm800k", a.prm800k);
  c.input_file("--mistral", a.mistral);
  c.require(a.sample_rate >= 0.0 && a.sample_rate <= 1.0, "--sample-rate must lie in [0, 1]");
}

json corpus_config(const CorpusArgs& a) {
  return {{"prm800k", a.prm800k},        {"mistral", a.mistral}, {"verdicts", a.verdicts},
          {"sample_rate", a.sample_rate}, {"seed", a.seed},       {"truncate_after_first_error", a.truncate}};
}

dataset::BuildOptions build_options(const CorpusArgs& a) { return {a.sample_rate, a.seed, a.truncate}; }

std::vector<dataset::RawTrace> load_optional(const std::string& path) {
  return path.empty() ? std::vector<dataset::RawTrace>{} : dataset::load_raw_traces(path);
}

void cmd_build_dataset(const CorpusArgs& a, std::ostream& out) {
  Checks c;
  check_corpus_inputs(c, a);
  c.input_file("--verdicts", a.verdicts);
  c.raise();

  const auto prm = load_optional(a.prm800k);
  const auto mc = load_optional(a.mistral);
  const auto verdicts = a.verdicts.empty() ? dataset::VerdictStore{} : dataset::VerdictStore::load(a.verdicts);
  const auto result = dataset::build_corpus(prm, mc, verdicts, build_options(a));
  if (const auto bad = dataset::count_label_violations(result.records))
    throw ValidationError(std::to_string(bad) + " built records violate their gold label");

  const json config = corpus_config(a);
  const json meta = make_meta("build-dataset", config, {{"seed", a.seed}});
  std::vector<json> records, audit;
  for (const auto& r : result.records) records.push_back(dataset::to_json_record(r));
  for (const auto& r : result.audit) audit.push_back(dataset::to_json_record(r));
  write_jsonl(a.out, meta, records);
  write_jsonl(a.rejects.empty() ? sibling(a.out, ".rejects.jsonl") : a.rejects, meta, audit);
  write_json(a.stats.empty() ? sibling(a.out, ".stats.json") : a.stats,
             {{"meta", meta}, {"stats", dataset::to_json(result.stats)}, {"records", result.records.size()}});

  const auto& s = result.stats;
  out << "kept " << result.records.size() << " of " << (s.prm800k.total + s.mistral.total) << " steps ("
      << s.prm800k.rejected() + s.mistral.rejected() << " rejected, " << s.prm800k.unresolved + s.mistral.unresolved
      << " unresolved)\n";
}

void cmd_emit_prompts(const CorpusArgs& a, std::ostream& out) {
  Checks c;
  check_corpus_inputs(c, a);
  c.raise();
  const auto requests = dataset::judge_requests(load_optional(a.prm800k), load_optional(a.mistral), build_options(a));
  json config = corpus_config(a);
  config.erase("verdicts");
  std::vector<json> records;
  for (const auto& r : requests) records.push_back(dataset::to_json_record(r));
  write_jsonl(a.out, make_meta("emit-prompts", config, {{"seed", a.seed}}), records);
  out << "wrote " << records.size() << " judge prompts\n";
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  BackendOpts backend;
  std::string traces;
  std::string out;
};

void cmd_score(const ScoreArgs& a, std::ostream& out) {
  Checks c;
  check_backend(c, a.backend, "--backend");
  c.input_file("--traces", a.traces);
  c.raise();

  const auto traces = load_traces(a.traces);
  auto backend = make_scorer(a.backend);
  const auto scores = scorer::score_traces(*backend, traces, decode_of(a.backend));

  const json config{{"backend", backend_config(a.backend)}, {"traces", a.traces}};
  std::vector<json> records;
  for (std::size_t i = 0; i < traces.size(); ++i)
    records.push_back({{"source_id", traces[i].source_id}, {"scores", scores_json(scores[i])}});
  write_jsonl(a.out, make_meta("score", config, {{"mock_noise_seed", a.backend.mock_noise_seed}}), records);
  out << "scored " << traces.size() << " traces with " << backend->id() << "\n";
}

// ---------------------------------------------------------------------------
// eval-processbench / eval-prmbench

struct EvalArgs {
  BackendOpts backend;
  std::string bench;
  std::string out;
  std::string table;
  std::string label;
  std::size_t data_size = 0;
  double tau = eval::kDefaultTau;
};

void add_eval_options(CLI::App* sub, EvalArgs& a) {
  add_backend_options(sub, a.backend, "--backend");
  sub->add_option("--bench", a.bench, "Benchmark records (JSONL)")->required();
  sub->add_option("--out", a.out, "Report JSON")->required();
  sub->add_option("--table", a.table, "Human-readable table (default: <out stem>.txt)");
  sub->add_option("--tau", a.tau, "Reward threshold below which a step is erroneous");
  sub->add_option("--label", a.label, "Run label used by report");
  sub->add_option("--data-size", a.data_size, "Training-set size for score-vs-size charts");
}

void check_eval(const EvalArgs& a) {
  Checks c;
  check_backend(c, a.backend, "--backend");
  c.input_file("--bench", a.bench);
  c.require(a.tau > 0.0 && a.tau < 1.0, "--tau must lie in (0, 1)");
  c.raise();
}

json eval_config(const EvalArgs& a) {
  return {{"backend", backend_config(a.backend)},
          {"bench", a.bench},
          {"tau", a.tau},
          {"label", a.label},
          {"data_size", a.data_size}};
}

std::string meta_banner(const json& meta) {
  return "hprm " + meta["tool_version"].get<std::string>() + "  " + meta["command"].get<std::string>() +
         "  config_hash " + meta["config_hash"].get<std::string>() + "  template " +
         meta["template_version"].get<std::string>() + " " + meta["template_hash"].get<std::string>() + "\n";
}

std::string rewards_text(const std::vector<StepScore>& scores) {
  std::string s;
  for (std::size_t i = 0; i < scores.size(); ++i) s += (i ? " " : "") + fixed(scores[i].reward, 3);
  return s;
}

void cmd_eval_processbench(const EvalArgs& a, std::ostream& out) {
  check_eval(a);
  const auto cases = eval::first_error_cases_from_json(strip_meta(io::read_jsonl(a.bench)));
  std::vector<ReasoningTrace> traces;
  for (const auto& c : cases) traces.push_back(c.trace);
  auto backend = make_scorer(a.backend);
  const auto scores = scorer::score_traces(*backend, traces, decode_of(a.backend));
  std::vector<eval::FirstError> predicted;
  for (const auto& s : scores) predicted.push_back(eval::predict_first_error(s, a.tau));
  const auto metrics = eval::processbench_f1(cases, predicted);

  const json meta = make_meta("eval-processbench", eval_config(a), {{"mock_noise_seed", a.backend.mock_noise_seed}});
  auto index = [](const eval::FirstError& e) { return e ? json(*e) : json(nullptr); };
  json case_rows = json::array();
  std::ostringstream rows;
  rows << pad("id", 24) << pad("gold", 8) << pad("pred", 8) << pad("ok", 4) << "rewards\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const bool ok = predicted[i] == cases[i].gold_first_error;
    case_rows.push_back({{"id", cases[i].id},
                         {"gold_first_error", index(cases[i].gold_first_error)},
                         {"predicted_first_error", index(predicted[i])},
                         {"correct", ok},
                         {"scores", scores_json(scores[i])}});
    auto show = [](const eval::FirstError& e) { return e ? std::to_string(*e) : std::string("-"); };
    rows << pad(cases[i].id, 24) << pad(show(cases[i].gold_first_error), 8) << pad(show(predicted[i]), 8)
         << pad(ok ? "y" : "n", 4) << rewards_text(scores[i]) << "\n";
  }
  write_json(a.out, {{"meta", meta}, {"metrics", eval::to_json(metrics)}, {"cases", case_rows}});

  std::ostringstream table;
  table << meta_banner(meta) << "tau " << fixed(a.tau, 3) << "\n\n"
        << pad("metric", 14) << "value\n"
        << pad("acc_error", 14) << fixed(metrics.acc_error) << "\n"
        << pad("acc_correct", 14) << fixed(metrics.acc_correct) << "\n"
        << pad("f1", 14) << fixed(metrics.f1) << "\n"
        << pad("n_error", 14) << metrics.n_error << "\n"
        << pad("n_correct", 14) << metrics.n_correct << "\n\n"
        << rows.str();
  io::write_text(a.table.empty() ? sibling(a.out, ".txt") : a.table, table.str());
  out << "f1 " << fixed(metrics.f1) << " (acc_error " << fixed(metrics.acc_error) << ", acc_correct "
      << fixed(metrics.acc_correct) << ")\n";
}

void cmd_eval_prmbench(const EvalArgs& a, std::ostream& out) {
  check_eval(a);
  const auto cases = eval::step_judgment_cases_from_json(strip_meta(io::read_jsonl(a.bench)));
  std::vector<ReasoningTrace> traces;
  for (const auto& c : cases) traces.push_back(c.trace);
  auto backend = make_scorer(a.backend);
  const auto scores = scorer::score_traces(*backend, traces, decode_of(a.backend));
  std::vector<std::vector<bool>> predicted;
  for (const auto& s : scores) predicted.push_back(eval::predict_step_errors(s, a.tau));
  const auto report = eval::per_category_report(cases, predicted);
  for (const auto& w : report.warnings) log::warn(w);

  const json meta = make_meta("eval-prmbench", eval_config(a), {{"mock_noise_seed", a.backend.mock_noise_seed}});
  json case_rows = json::array();
  std::ostringstream rows;
  rows << pad("id", 24) << pad("tag", 6) << pad("gold", 12) << pad("pred", 12) << "rewards\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    std::string gold, pred;
    for (int g : cases[i].gold_labels) gold += g ? '1' : '0';
    for (bool p : predicted[i]) pred += p ? '0' : '1';
    case_rows.push_back({{"id", cases[i].id},
                         {"category_tag", cases[i].category_tag},
                         {"gold_labels", cases[i].gold_labels},
                         {"predicted_errors", predicted[i]},
                         {"scores", scores_json(scores[i])}});
    rows << pad(cases[i].id, 24) << pad(cases[i].category_tag, 6) << pad(gold, 12) << pad(pred, 12)
         << rewards_text(scores[i]) << "\n";
  }
  write_json(a.out, {{"meta", meta}, {"metrics", eval::to_json(report)}, {"cases", case_rows}});

  std::ostringstream table;
  table << meta_banner(meta) << "tau " << fixed(a.tau, 3) << "\n\n" << pad("scope", 14) << pad("prmscore", 10)
        << "degraded\n";
  table << pad("overall", 14) << pad(fixed(report.overall.prmscore, 2), 10) << (report.overall.degraded ? "yes" : "no")
        << "\n";
  for (const auto& [tag, m] : report.per_tag)
    table << pad(tag, 14) << pad(fixed(m.prmscore, 2), 10) << (m.degraded ? "yes" : "no") << "\n";
  for (const auto& [axis, v] : report.axis_average) table << pad(axis + " avg", 14) << fixed(v, 2) << "\n";
  for (const auto& w : report.warnings) table << "warning: " << w << "\n";
  table << "\n" << rows.str();
  io::write_text(a.table.empty() ? sibling(a.out, ".txt") : a.table, table.str());
  out << "prmscore " << fixed(report.overall.prmscore, 2) << "\n";
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
  std::string policy = "mock";
  double policy_error_rate = 0.5;
  std::string policy_auth_env;
  BackendOpts scorer;
  std::string problems;
  std::string out;
  std::string summary;
  std::string label;
  std::size_t data_size = 0;
  std::size_t k = 8;
  std::size_t max_steps = 16;
  std::uint64_t seed = 0;
  std::string mode = "greedy";
  std::string answer_marker = "\\boxed{";
};

void cmd_search(const SearchArgs& a, std::ostream& out) {
  Checks c;
  c.require(a.policy == "mock" || a.policy.rfind("http://", 0) == 0,
            "--policy: expected mock or an http:// URL, got \"" + a.policy + "\"");
  c.require(a.policy_error_rate >= 0.0 && a.policy_error_rate <= 1.0, "--policy-error-rate must lie in [0, 1]");
  if (a.policy != "mock" && !a.policy_auth_env.empty()) {
    const char* v = std::getenv(a.policy_auth_env.c_str());
    c.require(v != nullptr && *v != '\0', "--policy-auth-env: environment variable " + a.policy_auth_env + " is not set");
  }
  check_backend(c, a.scorer, "--scorer");
  c.input_file("--problems", a.problems);
  c.require(a.k >= 1, "--k must be >= 1");
  c.require(a.max_steps >= 1, "--max-steps must be >= 1");
  c.require(a.mode == "greedy" || a.mode == "first-candidate" || a.mode == "best-of-n",
            "--mode must be greedy, first-candidate or best-of-n");
  c.require(!a.answer_marker.empty(), "--answer-marker must be non-empty");
  c.raise();

  const auto problems = search::problems_from_json(strip_meta(io::read_jsonl(a.problems)));
  std::unique_ptr<search::PolicyBackend> policy;
  if (a.policy == "mock")
    policy = std::make_unique<synthetic::ArithmeticPolicy>(a.policy_error_rate, a.seed);
  else
    policy = std::make_unique<remote::RemotePolicyBackend>(a.policy, remote::HttpAuth::from_env(a.policy_auth_env),
                                                          limits_of(a.scorer));
  auto backend = make_scorer(a.scorer);

  search::SearchConfig cfg;
  cfg.k = a.k;
  cfg.max_steps = a.max_steps;
  cfg.seed = a.seed;
  cfg.mode = search::search_mode_from_string(a.mode);
  cfg.answer_marker = a.answer_marker;
  cfg.decode = decode_of(a.scorer);

  json policy_cfg{{"target", a.policy}};
  if (a.policy == "mock")
    policy_cfg["error_rate"] = a.policy_error_rate;
  else
    policy_cfg["auth_env"] = a.policy_auth_env;
  const json config{{"policy", policy_cfg},     {"scorer", backend_config(a.scorer)},
                    {"problems", a.problems},   {"k", a.k},
                    {"max_steps", a.max_steps}, {"seed", a.seed},
                    {"mode", a.mode},           {"answer_marker", a.answer_marker},
                    {"label", a.label},         {"data_size", a.data_size}};
  const json meta = make_meta("search", config, {{"seed", a.seed}, {"mock_noise_seed", a.scorer.mock_noise_seed}});

  std::vector<json> records;
  search::SearchBenchmark bench;
  try {
    bench = search::run_search_benchmark(problems, *policy, *backend, cfg);
  } catch (const search::SearchAborted& e) {
    for (auto& r : search::transcript_records("(aborted)", e.partial())) records.push_back(std::move(r));
    write_jsonl(a.out, meta, records);
    throw;
  }

  json per_problem = json::array();
  for (std::size_t i = 0; i < bench.outcomes.size(); ++i) {
    const auto& o = bench.outcomes[i];
    for (auto& r : search::transcript_records(o.id, o.transcript)) records.push_back(std::move(r));
    per_problem.push_back({{"id", o.id},
                           {"gold_answer", problems[i].gold_answer},
                           {"final_answer", o.transcript.final_answer ? json(*o.transcript.final_answer) : json(nullptr)},
                           {"search_correct", o.search_correct},
                           {"sample_answers", o.sample_answers},
                           {"pass1_correct", o.pass1_correct},
                           {"major_correct", o.major_correct},
                           {"passk_correct", o.passk_correct}});
  }
  write_jsonl(a.out, meta, records);
  write_json(a.summary.empty() ? sibling(a.out, ".summary.json") : a.summary,
             {{"meta", meta}, {"summary", search::to_json(bench.summary)}, {"problems", per_problem}});
  const auto& s = bench.summary;
  out << a.mode << "@" << a.k << " " << fixed(s.search_accuracy) << "  pass@1 " << fixed(s.pass_at_1) << "  major@"
      << a.k << " " << fixed(s.major_at_k) << "  pass@" << a.k << " " << fixed(s.pass_at_k) << "\n";
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out_dir;
};

struct ReportRow {
  std::string kind;  // processbench | prmbench | search
  std::string label;
  std::size_t data_size = 0;
  std::string config_hash;
  std::vector<std::pair<std::string, double>> metrics;  // percentages

  double metric(const std::string& name) const {
    for (const auto& [k, v] : metrics)
      if (k == name) return v;
    return 0.0;
  }
};

const std::map<std::string, std::string>& primary_metric() {
  static const std::map<std::string, std::string> m{
      {"processbench", "f1"}, {"prmbench", "prmscore"}, {"search", "search_accuracy"}};
  return m;
}

ReportRow read_report(const std::string& path) {
  json doc;
  try {
    doc = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!doc.contains("meta")) throw ValidationError(path + ": no run metadata");
  const auto& meta = doc["meta"];
  const std::string command = meta.value("command", "");
  ReportRow row;
  const auto& config = meta.at("config");
  row.label = config.value("label", "");
  if (row.label.empty()) row.label = fs::path(path).stem().string();
  row.data_size = config.value("data_size", std::size_t{0});
  row.config_hash = meta.value("config_hash", "");
  if (command == "eval-processbench") {
    row.kind = "processbench";
    const auto& m = doc.at("metrics");
    for (const char* k : {"acc_error", "acc_correct", "f1"}) row.metrics.emplace_back(k, 100.0 * m.at(k).get<double>());
  } else if (command == "eval-prmbench") {
    row.kind = "prmbench";
    const auto& m = doc.at("metrics");
    row.metrics.emplace_back("prmscore", m.at("overall").at("prmscore").get<double>());
    for (const auto& axis : eval::default_taxonomy()) {
      for (const auto& tag : axis.tags)
        if (m.at("per_tag").contains(tag))
          row.metrics.emplace_back(tag, m["per_tag"][tag].at("prmscore").get<double>());
      if (m.at("axis_average").contains(axis.name))
        row.metrics.emplace_back(axis.name, m["axis_average"][axis.name].get<double>());
    }
  } else if (command == "search") {
    row.kind = "search";
    const auto& s = doc.at("summary");
    for (const char* k : {"pass_at_1", "major_at_k", "search_accuracy", "pass_at_k"})
      row.metrics.emplace_back(k, 100.0 * s.at(k).get<double>());
  } else {
    throw ValidationError(path + ": not an eval or search summary (command \"" + command + "\")");
  }
  return row;
}

std::string markdown_table(const std::string& kind, const std::vector<ReportRow>& rows) {
  std::vector<std::string> columns;
  for (const auto& r : rows)
    if (r.kind == kind)
      for (const auto& [k, v] : r.metrics)
        if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
  if (columns.empty()) return "";
  std::string s = "## " + kind + "\n\n| run |";
  for (const auto& c : columns) s += " " + c + " |";
  s += "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) s += "---:|";
  s += "\n";
  for (const auto& r : rows) {
    if (r.kind != kind) continue;
    s += "| " + r.label + " |";
    for (const auto& c : columns) {
      const auto it = std::find_if(r.metrics.begin(), r.metrics.end(), [&](const auto& m) { return m.first == c; });
      s += " " + (it == r.metrics.end() ? std::string("-") : fixed(it->second, 1)) + " |";
    }
    s += "\n";
  }
  return s + "\n";
}

std::string svg_chart(const std::vector<ReportRow>& rows, const json& meta) {
  constexpr double W = 640, H = 400, L = 60, R = 140, T = 30, B = 50;
  std::size_t max_size = 0;
  for (const auto& r : rows) max_size = std::max(max_size, r.data_size);
  auto x = [&](std::size_t n) { return L + (W - L - R) * (max_size ? static_cast<double>(n) / max_size : 0.0); };
  auto y = [&](double v) { return H - B - (H - T - B) * std::clamp(v, 0.0, 100.0) / 100.0; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<!-- meta " << meta.dump() << " -->\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int v = 0; v <= 100; v += 25)
    svg << "<text x=\"" << L - 8 << "\" y=\"" << fixed(y(v), 1) << "\" font-size=\"11\" text-anchor=\"end\">" << v
        << "</text>\n";
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << "training data size (max " << max_size << ")</text>\n";

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
  int series = 0;
  for (const auto& [kind, metric] : primary_metric()) {
    std::vector<const ReportRow*> pts;
    for (const auto& r : rows)
      if (r.kind == kind && r.data_size > 0) pts.push_back(&r);
    if (pts.empty()) continue;
    std::stable_sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->data_size < b->data_size; });
    const char* color = colors[series % 3];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto* p : pts) svg << fixed(x(p->data_size), 1) << "," << fixed(y(p->metric(metric)), 1) << " ";
    svg << "\"/>\n";
    for (const auto* p : pts)
      svg << "<circle cx=\"" << fixed(x(p->data_size), 1) << "\" cy=\"" << fixed(y(p->metric(metric)), 1)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * series << "\" font-size=\"12\" fill=\"" << color
        << "\">" << kind << " " << metric << "</text>\n";
    ++series;
  }
  svg << "</svg>\n";
  return svg.str();
}

void cmd_report(const ReportArgs& a, std::ostream& out) {
  Checks c;
  c.require(!a.inputs.empty(), "--inputs needs at least one report");
  for (const auto& p : a.inputs) c.input_file("--inputs", p);
  c.raise();

  std::vector<ReportRow> rows;
  for (const auto& p : a.inputs) rows.push_back(read_report(p));
  const json config{{"inputs", a.inputs}};
  const json meta = make_meta("report", config, json::object());
  const fs::path dir(a.out_dir);

  std::string md = "<!-- meta " + meta.dump() + " -->\n# Run comparison\n\n";
  for (const char* kind : {"prmbench", "processbench", "search"}) md += markdown_table(kind, rows);
  io::write_text((dir / "report.md").string(), md);

  std::string csv = "# meta " + meta.dump() + "\nkind,run,data_size,metric,value\n";
  std::string chart = "# meta " + meta.dump() + "\nkind,metric,run,data_size,value\n";
  json rows_json = json::array();
  for (const auto& r : rows) {
    json metrics = json::object();
    for (const auto& [k, v] : r.metrics) {
      csv += r.kind + "," + r.label + "," + std::to_string(r.data_size) + "," + k + "," + fixed(v, 4) + "\n";
      metrics[k] = v;
    }
    if (r.data_size > 0) {
      const auto& m = primary_metric().at(r.kind);
      chart += r.kind + "," + m + "," + r.label + "," + std::to_string(r.data_size) + "," + fixed(r.metric(m), 4) + "\n";
    }
    rows_json.push_back({{"kind", r.kind},
                         {"run", r.label},
                         {"data_size", r.data_size},
                         {"config_hash", r.config_hash},
                         {"metrics", metrics}});
  }
  io::write_text((dir / "report.csv").string(), csv);
  io::write_text((dir / "chart.csv").string(), chart);
  io::write_text((dir / "chart.svg").string(), svg_chart(rows, meta));
  write_json((dir / "report.json").string(), {{"meta", meta}, {"rows", rows_json}});
  out << "report over " << rows.size() << " runs written to " << a.out_dir << "\n";
}

void print_error(std::ostream& err, const std::string& category, const std::string& message,
                 const std::vector<std::string>& problems = {}) {
  json j{{"error", category}, {"message", message}};
  if (!problems.empty()) j["problems"] = problems;
  err << j.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical error-aware process reward toolkit", "hprm"};
  app.set_version_flag("--version", std::string(HPRM_VERSION));
  app.set_config("--config", "", "TOML configuration file; flags override its values");
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "debug | info | warn | error | off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  CorpusArgs build_args;
  auto* build = app.add_subcommand("build-dataset", "Map, filter and audit labeled steps into a training corpus");
  add_corpus_inputs(build, build_args);
  build->add_option("--verdicts", build_args.verdicts, "Judge responses {prompt_id, response} (JSONL)");
  build->add_option("--out", build_args.out, "Corpus output (JSONL)")->required();
  build->add_option("--rejects", build_args.rejects, "Rejected/unresolved audit (default: <out stem>.rejects.jsonl)");
  build->add_option("--stats", build_args.stats, "Build statistics (default: <out stem>.stats.json)");

  CorpusArgs prompt_args;
  auto* prompts = app.add_subcommand("emit-prompts", "Write judge prompts for steps that need a verdict");
  add_corpus_inputs(prompts, prompt_args);
  prompts->add_option("--out", prompt_args.out, "Prompt records (JSONL)")->required();

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score", "Two-pass step rewards for reasoning traces");
  add_backend_options(score, score_args.backend, "--backend");
  score->add_option("--traces", score_args.traces, "Traces {source_id, question, steps} (JSONL)")->required();
  score->add_option("--out", score_args.out, "Per-step scores (JSONL)")->required();

  EvalArgs pb_args;
  auto* pb = app.add_subcommand("eval-processbench", "First-error detection F1");
  add_eval_options(pb, pb_args);

  EvalArgs prm_args;
  auto* prm = app.add_subcommand("eval-prmbench", "Step-level PRMScore with per-category breakdown");
  add_eval_options(prm, prm_args);

  SearchArgs search_args;
  auto* srch = app.add_subcommand("search", "Reward-guided step search against sampling baselines");
  srch->add_option("--policy", search_args.policy, "Policy backend: mock or http://host:port[/path]");
  srch->add_option("--policy-error-rate", search_args.policy_error_rate, "Mock policy: per-candidate error rate");
  srch->add_option("--policy-auth-env", search_args.policy_auth_env, "Environment variable holding the policy token");
  add_backend_options(srch, search_args.scorer, "--scorer");
  srch->add_option("--problems", search_args.problems, "Problems {id?, question, gold_answer} (JSONL)")->required();
  srch->add_option("--out", search_args.out, "Transcript records (JSONL)")->required();
  srch->add_option("--summary", search_args.summary, "Summary JSON (default: <out stem>.summary.json)");
  srch->add_option("--k", search_args.k, "Candidates per expansion and baseline samples");
  srch->add_option("--max-steps", search_args.max_steps, "Step budget per solution");
  srch->add_option("--seed", search_args.seed, "Policy seed");
  srch->add_option("--mode", search_args.mode, "greedy | first-candidate | best-of-n");
  srch->add_option("--answer-marker", search_args.answer_marker, "Text that ends a solution");
  srch->add_option("--label", search_args.label, "Run label used by report");
  srch->add_option("--data-size", search_args.data_size, "Training-set size for score-vs-size charts");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Comparison tables and score-vs-size charts across runs");
  report->add_option("--inputs", report_args.inputs, "Eval reports and search summaries")->required();
  report->add_option("--out-dir", report_args.out_dir, "Output directory")->required();

  std::vector<std::string> storage{"hprm"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << HPRM_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, category_name(ErrorCategory::Usage), e.what());
    return static_cast<int>(ErrorCategory::Usage);
  }

  static const std::map<std::string, log::Level> levels{{"debug", log::Level::Debug},
                                                        {"info", log::Level::Info},
                                                        {"warn", log::Level::Warn},
                                                        {"error", log::Level::Error},
                                                        {"off", log::Level::Off}};
  log::set_level(levels.at(log_level));

  try {
    if (build->parsed()) cmd_build_dataset(build_args, out);
    else if (prompts->parsed()) cmd_emit_prompts(prompt_args, out);
    else if (score->parsed()) cmd_score(score_args, out);
    else if (pb->parsed()) cmd_eval_processbench(pb_args, out);
    else if (prm->parsed()) cmd_eval_prmbench(prm_args, out);
    else if (srch->parsed()) cmd_search(search_args, out);
    else if (report->parsed()) cmd_report(report_args, out);
    return 0;
  } catch (const ConfigErrors& e) {
    print_error(err, category_name(e.category()), e.what(), e.problems());
    return static_cast<int>(e.category());
  } catch (const Error& e) {
    print_error(err, category_name(e.category()), e.what());
    return static_cast<int>(e.category());
  } catch (const json::exception& e) {
    print_error(err, category_name(ErrorCategory::Validation), e.what());
    return static_cast<int>(ErrorCategory::Validation);
  } catch (const fs::filesystem_error& e) {
    print_error(err, category_name(ErrorCategory::Validation), e.what());
    return static_cast<int>(ErrorCategory::Validation);
  }
}

}  // namespace hprm::cli
