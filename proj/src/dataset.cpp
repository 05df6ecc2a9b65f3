#include "hprm/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <tuple>

#include "hprm/errors.hpp"
#include "hprm/hashing.hpp"
#include "hprm/jsonl.hpp"

namespace hprm::dataset {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::HumanMapped: return "HumanMapped";
    case Provenance::JudgeLabeled: return "JudgeLabeled";
    case Provenance::MCFiltered: return "MCFiltered";
  }
  return "?";
}

namespace {

Provenance provenance_from_string(const std::string& s) {
  if (s == "HumanMapped") return Provenance::HumanMapped;
  if (s == "JudgeLabeled") return Provenance::JudgeLabeled;
  if (s == "MCFiltered") return Provenance::MCFiltered;
  throw ParseError("unknown provenance \"" + s + "\"");
}

void require_binary_verdict(const JudgeVerdict& v) {
  if (!v.labels().is_binary()) throw ValidationError("judge verdict scores must be 0 or 1");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Value following the last "Score X:" header in `body`: the first non-blank
// line after the colon (same line or a following one).
int parse_score(std::string_view body, char letter, const char* field) {
  const std::string header = std::string("Score ") + letter + ":";
  const auto pos = body.rfind(header);
  if (pos == std::string_view::npos) throw ParseError(std::string("missing ") + field + " (\"" + header + "\" block)");
  std::string_view rest = body.substr(pos + header.size());
  std::size_t i = 0;
  while (i < rest.size() && std::isspace(static_cast<unsigned char>(rest[i]))) ++i;
  rest.remove_prefix(i);
  const auto eol = rest.find('\n');
  const std::string_view value = trim(rest.substr(0, eol));
  if (value == "0") return 0;
  if (value == "1") return 1;
  throw ParseError(std::string(field) + " out of domain: \"" + std::string(value) + "\" (expected 0 or 1)");
}

void bump(SourceStats& s, const Decision& d) {
  if (std::holds_alternative<LabeledStepRecord>(d)) {
    ++s.kept;
    return;
  }
  const auto& a = std::get<AuditRecord>(d);
  if (a.status == AuditStatus::Unresolved)
    ++s.unresolved;
  else
    ++s.rejected_by_rule[a.rule];
}

std::tuple<int, const std::string&, std::size_t> order_key(GoldKind source, const std::string& trace_ref,
                                                          std::size_t step_index) {
  return {static_cast<int>(source), trace_ref, step_index};
}

}  // namespace

ReasoningTrace RawTrace::as_reasoning_trace() const {
  ReasoningTrace t;
  t.question = question;
  t.source_id = trace_ref;
  t.steps.reserve(steps.size());
  for (const auto& s : steps) t.steps.push_back(s.step_text);
  return t;
}

MapResult map_prm800k(int l) {
  switch (l) {
    case 1: return StepLabelVector{1, 1, 1};
    case 0: return StepLabelVector{1, 1, 0};
    case -1: return NeedsJudge{};
    default: throw ValidationError("PRM800K label must be -1, 0 or 1, got " + std::to_string(l));
  }
}

FilterResult filter_judged_prm800k(int l, const JudgeVerdict& v) {
  if (l != -1) throw UsageError("filter_judged_prm800k applies only to l = -1 steps, got l = " + std::to_string(l));
  require_binary_verdict(v);
  if (v.labels().all_ones()) return Rejected{std::string(kRulePrm800kJudgedAllOnes)};
  return v.labels();
}

FilterResult filter_mc(McLabel mc, const JudgeVerdict& v) {
  require_binary_verdict(v);
  const auto labels = v.labels();
  if (mc == McLabel::Plus) {
    if (!labels.all_ones()) return Rejected{std::string(kRuleMcPlusNotAllOnes)};
  } else if (labels.all_ones()) {
    return Rejected{std::string(kRuleMcMinusAllOnes)};
  }
  return labels;
}

JudgeVerdict parse_judge_response(std::string_view text) {
  constexpr std::string_view kFinal = "Final answers:";
  std::string_view body = text;
  std::string_view reasoning = text;
  if (const auto fa = text.rfind(kFinal); fa != std::string_view::npos) {
    body = text.substr(fa);
    reasoning = text.substr(0, fa);
  } else if (const auto sa = text.rfind("Score A:"); sa != std::string_view::npos) {
    reasoning = text.substr(0, sa);
  }

  JudgeVerdict v;
  v.score_a = parse_score(body, 'A', "score_a");
  v.score_b = parse_score(body, 'B', "score_b");
  v.score_c = parse_score(body, 'C', "score_c");

  reasoning = trim(reasoning);
  if (const auto r = reasoning.rfind("Reasoning:"); r != std::string_view::npos)
    reasoning = trim(reasoning.substr(r + std::string_view("Reasoning:").size()));
  v.reasoning = std::string(reasoning);
  return v;
}

std::string prompt_id(GoldKind source, std::string_view trace_ref, std::size_t step_index) {
  return std::string(to_string(source)) + "/" + std::string(trace_ref) + "/" + std::to_string(step_index);
}

void VerdictStore::add_response(const std::string& id, std::string_view response) {
  Entry e;
  try {
    e.verdict = parse_judge_response(response);
  } catch (const ParseError& err) {
    e.parse_error = err.what();
  }
  entries_[id] = std::move(e);
}

void VerdictStore::add_verdict(const std::string& id, JudgeVerdict verdict) {
  entries_[id] = Entry{std::move(verdict), {}};
}

const VerdictStore::Entry* VerdictStore::find(const std::string& id) const {
  const auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

VerdictStore VerdictStore::load(const std::filesystem::path& path) {
  VerdictStore store;
  for (const auto& j : io::read_jsonl(path)) {
    if (!j.contains("prompt_id") || !j.contains("response"))
      throw ParseError(path.string() + ": verdict records need 'prompt_id' and 'response'");
    store.add_response(j.at("prompt_id").get<std::string>(), j.at("response").get<std::string>());
  }
  return store;
}

bool mc_step_sampled(const BuildOptions& opts, std::string_view trace_ref, std::size_t step_index) {
  if (opts.sample_rate >= 1.0) return true;
  if (opts.sample_rate <= 0.0) return false;
  const std::string key = std::string(trace_ref) + "#" + std::to_string(step_index);
  return keyed_uniform(opts.seed, key) < opts.sample_rate;
}

std::size_t SourceStats::rejected() const {
  std::size_t n = 0;
  for (const auto& [rule, count] : rejected_by_rule) n += count;
  return n;
}

Decision decide(const PendingStep& step, const VerdictStore& store, const BuildOptions& opts) {
  const auto& r = step.record;
  AuditRecord audit{r.gold.kind, r.trace_ref, r.step_index, AuditStatus::Rejected, {}, std::nullopt};
  if (step.truncated) {
    audit.rule = std::string(kRuleTruncated);
    return audit;
  }

  auto keep = [&](StepLabelVector labels, Provenance p) -> Decision {
    return LabeledStepRecord{r.trace_ref, step.trace ? step.trace->question : std::string{},
                             r.step_index, r.step_text, r.gold, labels, p};
  };

  if (r.gold.kind == GoldKind::Prm800k) {
    const auto mapped = map_prm800k(*r.gold.prm800k_label);
    if (const auto* labels = std::get_if<StepLabelVector>(&mapped)) return keep(*labels, Provenance::HumanMapped);
  } else if (!mc_step_sampled(opts, r.trace_ref, r.step_index)) {
    audit.rule = std::string(kRuleMcNotSampled);
    return audit;
  }

  const auto id = prompt_id(r.gold.kind, r.trace_ref, r.step_index);
  const auto* entry = store.find(id);
  if (entry == nullptr || !entry->verdict) {
    audit.status = AuditStatus::Unresolved;
    audit.rule = entry == nullptr ? "no verdict for " + id : "unparseable verdict: " + entry->parse_error;
    return audit;
  }

  const auto filtered = r.gold.kind == GoldKind::Prm800k ? filter_judged_prm800k(-1, *entry->verdict)
                                                         : filter_mc(*r.gold.mc_label, *entry->verdict);
  if (const auto* rej = std::get_if<Rejected>(&filtered)) {
    audit.rule = rej->rule;
    audit.labels = entry->verdict->labels();
    return audit;
  }
  return keep(std::get<StepLabelVector>(filtered),
              r.gold.kind == GoldKind::Prm800k ? Provenance::JudgeLabeled : Provenance::MCFiltered);
}

std::vector<Decision> decide_all(std::span<const PendingStep> steps, const VerdictStore& store,
                                 const BuildOptions& opts) {
  std::vector<Decision> out(steps.size());
  const auto n = static_cast<std::ptrdiff_t>(steps.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = decide(steps[i], store, opts);
  return out;
}

std::vector<Decision> decide_all_serial(std::span<const PendingStep> steps, const VerdictStore& store,
                                        const BuildOptions& opts) {
  std::vector<Decision> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(decide(s, store, opts));
  return out;
}

std::vector<PendingStep> flatten(std::span<const RawTrace> traces, GoldKind expected, const BuildOptions& opts) {
  std::vector<PendingStep> out;
  for (const auto& trace : traces) {
    bool seen_error = false;
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
      const auto& s = trace.steps[i];
      if (s.step_index != i + 1)
        throw ValidationError("trace '" + trace.trace_ref + "': step_index values must be contiguous from 1");
      if (s.gold.kind != expected)
        throw ValidationError("trace '" + trace.trace_ref + "': expected gold.kind " + to_string(expected));
      if (!s.gold.is_well_formed()) throw ValidationError("trace '" + trace.trace_ref + "': malformed gold label");
      out.push_back({s, &trace, opts.truncate_after_first_error && seen_error});
      const bool negative = s.gold.kind == GoldKind::Prm800k ? *s.gold.prm800k_label == -1
                                                             : *s.gold.mc_label == McLabel::Minus;
      seen_error = seen_error || negative;
    }
  }
  return out;
}

CorpusResult build_corpus(std::span<const RawTrace> prm800k, std::span<const RawTrace> mistral,
                          const VerdictStore& verdicts, const BuildOptions& opts) {
  if (!(opts.sample_rate >= 0.0 && opts.sample_rate <= 1.0))
    throw ValidationError("sample rate must lie in [0, 1]");

  auto pending = flatten(prm800k, GoldKind::Prm800k, opts);
  auto mc = flatten(mistral, GoldKind::MistralMc, opts);
  pending.insert(pending.end(), mc.begin(), mc.end());

  const auto decisions = decide_all(pending, verdicts, opts);

  CorpusResult result;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const auto& d = decisions[i];
    const GoldKind source = pending[i].record.gold.kind;
    bump(source == GoldKind::Prm800k ? result.stats.prm800k : result.stats.mistral, d);
    ++(source == GoldKind::Prm800k ? result.stats.prm800k : result.stats.mistral).total;
    if (const auto* kept = std::get_if<LabeledStepRecord>(&d)) {
      result.records.push_back(*kept);
    } else {
      const auto& a = std::get<AuditRecord>(d);
      if (a.status == AuditStatus::Unresolved) result.stats.unresolved.push_back(prompt_id(a.source, a.trace_ref, a.step_index));
      result.audit.push_back(a);
    }
  }

  std::sort(result.records.begin(), result.records.end(), [](const auto& a, const auto& b) {
    return order_key(a.gold.kind, a.trace_ref, a.step_index) < order_key(b.gold.kind, b.trace_ref, b.step_index);
  });
  std::sort(result.audit.begin(), result.audit.end(), [](const auto& a, const auto& b) {
    return order_key(a.source, a.trace_ref, a.step_index) < order_key(b.source, b.trace_ref, b.step_index);
  });
  std::sort(result.stats.unresolved.begin(), result.stats.unresolved.end());
  return result;
}

std::size_t count_label_violations(std::span<const LabeledStepRecord> records) {
  std::size_t bad = 0;
  for (const auto& r : records) {
    const bool provenance_ok = r.provenance == Provenance::HumanMapped
                                   ? r.gold.kind == GoldKind::Prm800k && *r.gold.prm800k_label != -1
                               : r.provenance == Provenance::JudgeLabeled
                                   ? r.gold.kind == GoldKind::Prm800k && *r.gold.prm800k_label == -1
                                   : r.gold.kind == GoldKind::MistralMc;
    if (!provenance_ok || !validate_label_vector(r.labels, r.gold)) ++bad;
  }
  return bad;
}

std::vector<JudgeRequest> judge_requests(std::span<const RawTrace> prm800k, std::span<const RawTrace> mistral,
                                         const BuildOptions& opts) {
  auto pending = flatten(prm800k, GoldKind::Prm800k, opts);
  auto mc = flatten(mistral, GoldKind::MistralMc, opts);
  pending.insert(pending.end(), mc.begin(), mc.end());

  std::vector<JudgeRequest> out;
  for (const auto& p : pending) {
    const auto& r = p.record;
    if (p.truncated) continue;
    const bool needs = r.gold.kind == GoldKind::Prm800k ? *r.gold.prm800k_label == -1
                                                        : mc_step_sampled(opts, r.trace_ref, r.step_index);
    if (!needs) continue;
    out.push_back({prompt_id(r.gold.kind, r.trace_ref, r.step_index), r.gold.kind, r.trace_ref, r.step_index,
                   emit_judge_prompt(p.trace->as_reasoning_trace(), r.step_index)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return order_key(a.source, a.trace_ref, a.step_index) < order_key(b.source, b.trace_ref, b.step_index);
  });
  return out;
}

std::vector<RawTrace> raw_traces_from_json(const std::vector<json>& lines) {
  // Accepts whole-trace lines ({trace_ref, question, steps:[...]}) and
  // per-step lines ({trace_ref, question, step_index, step_text, gold}).
  std::vector<RawTrace> traces;
  std::map<std::string, std::size_t> by_ref;
  auto read_step = [](const json& s, const std::string& ref) {
    RawStepRecord r;
    r.trace_ref = ref;
    r.step_index = s.at("step_index").get<std::size_t>();
    r.step_text = s.at("step_text").get<std::string>();
    r.gold = s.at("gold").get<GoldSourceLabel>();
    return r;
  };
  for (const auto& j : lines) {
    try {
      const auto ref = j.at("trace_ref").get<std::string>();
      auto [it, inserted] = by_ref.try_emplace(ref, traces.size());
      if (inserted) traces.push_back(RawTrace{ref, j.value("question", std::string{}), {}});
      auto& trace = traces[it->second];
      if (j.contains("steps")) {
        if (!inserted) throw ValidationError("trace '" + ref + "' appears twice");
        for (const auto& s : j.at("steps")) trace.steps.push_back(read_step(s, ref));
      } else {
        trace.steps.push_back(read_step(j, ref));
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("raw trace record: ") + e.what());
    }
  }
  for (auto& t : traces)
    std::stable_sort(t.steps.begin(), t.steps.end(),
                     [](const auto& a, const auto& b) { return a.step_index < b.step_index; });
  return traces;
}

std::vector<RawTrace> load_raw_traces(const std::filesystem::path& path) {
  return raw_traces_from_json(io::read_jsonl(path));
}

json to_json_record(const RawTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps)
    steps.push_back({{"step_index", s.step_index}, {"step_text", s.step_text}, {"gold", s.gold}});
  return {{"trace_ref", trace.trace_ref}, {"question", trace.question}, {"steps", steps}};
}

json to_json_record(const LabeledStepRecord& r) {
  return {{"trace_ref", r.trace_ref}, {"question", r.question}, {"step_index", r.step_index},
          {"step_text", r.step_text}, {"gold", r.gold},          {"labels", r.labels},
          {"provenance", to_string(r.provenance)}};
}

LabeledStepRecord labeled_record_from_json(const json& j) {
  try {
    LabeledStepRecord r;
    r.trace_ref = j.at("trace_ref").get<std::string>();
    r.question = j.value("question", std::string{});
    r.step_index = j.at("step_index").get<std::size_t>();
    r.step_text = j.at("step_text").get<std::string>();
    r.gold = j.at("gold").get<GoldSourceLabel>();
    r.labels = j.at("labels").get<StepLabelVector>();
    r.provenance = provenance_from_string(j.at("provenance").get<std::string>());
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("labeled record: ") + e.what());
  }
}

json to_json_record(const AuditRecord& r) {
  json j{{"source", to_string(r.source)},
         {"trace_ref", r.trace_ref},
         {"step_index", r.step_index},
         {"status", r.status == AuditStatus::Rejected ? "rejected" : "unresolved"},
         {"rule", r.rule}};
  if (r.labels) j["labels"] = *r.labels;
  return j;
}

json to_json_record(const JudgeRequest& r) {
  return {{"prompt_id", r.prompt_id}, {"source", to_string(r.source)}, {"trace_ref", r.trace_ref},
          {"step_index", r.step_index}, {"prompt", r.prompt}};
}

json to_json(const BuildStats& s) {
  auto source = [](const SourceStats& x) {
    return json{{"total", x.total},       {"kept", x.kept},
                {"rejected", x.rejected()}, {"unresolved", x.unresolved},
                {"rejected_by_rule", x.rejected_by_rule}};
  };
  return {{"PRM800K", source(s.prm800k)}, {"MistralMC", source(s.mistral)}, {"unresolved", s.unresolved}};
}

}  // namespace hprm::dataset
