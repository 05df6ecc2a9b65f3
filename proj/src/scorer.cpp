#include "hprm/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "hprm/hashing.hpp"
#include "hprm/parallel.hpp"

namespace hprm::scorer {

const char* to_string(Slot s) {
  switch (s) {
    case Slot::Math: return "MATH";
    case Slot::Consistency: return "CONSISTENCY";
    case Slot::Correctness: return "CORRECTNESS";
  }
  return "?";
}

Slot slot_from_string(std::string_view s) {
  if (s == "MATH") return Slot::Math;
  if (s == "CONSISTENCY") return Slot::Consistency;
  if (s == "CORRECTNESS") return Slot::Correctness;
  throw ProtocolError("unknown slot \"" + std::string(s) + "\"");
}

void MaskedQuery::validate() const {
  if (segments.size() < 2) throw ValidationError("query needs a question and a current step");
  if (mask_slots.empty()) throw ValidationError("query has no masked slot");
  for (std::size_t i = 0; i < mask_slots.size(); ++i) {
    const Slot s = mask_slots[i];
    if (filled.count(s)) throw ValidationError(std::string("slot ") + to_string(s) + " is both masked and filled");
    if (std::count(mask_slots.begin(), mask_slots.end(), s) > 1)
      throw ValidationError(std::string("slot ") + to_string(s) + " masked twice");
  }
  const bool correctness_masked =
      std::find(mask_slots.begin(), mask_slots.end(), Slot::Correctness) != mask_slots.end();
  if (correctness_masked && (!filled.count(Slot::Math) || !filled.count(Slot::Consistency)))
    throw ValidationError("CORRECTNESS may be masked only once MATH and CONSISTENCY are filled");
  if (filled.count(Slot::Correctness)) throw ValidationError("CORRECTNESS is never supplied as a filled label");
}

bool MaskedQuery::is_pass1() const {
  return filled.empty() && mask_slots == std::vector<Slot>{Slot::Math, Slot::Consistency};
}

const SlotProbs& MaskDistribution::at(Slot s) const {
  const auto it = slots.find(s);
  if (it == slots.end()) throw ProtocolError(std::string("distribution lacks slot ") + to_string(s));
  return it->second;
}

void MaskDistribution::check_against(const MaskedQuery& q) const {
  for (const Slot s : q.mask_slots) {
    const auto& p = at(s);
    const bool finite = std::isfinite(p.p_pos) && std::isfinite(p.p_neg);
    if (!finite || p.p_pos < 0.0 || p.p_neg < 0.0 || p.p_pos > 1.0 || p.p_neg > 1.0)
      throw ProtocolError(std::string("slot ") + to_string(s) + ": probabilities outside [0,1]");
    if (std::abs(p.p_pos + p.p_neg - 1.0) > kDistributionTolerance)
      throw ProtocolError(std::string("slot ") + to_string(s) + ": p_pos + p_neg != 1");
  }
}

std::vector<MaskDistribution> ScorerBackend::evaluate_batch(std::span<const MaskedQuery> queries) {
  std::vector<MaskDistribution> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(evaluate(q));
  return out;
}

json PromptTemplate::to_json() const {
  return {{"version", version},
          {"question_prefix", question_prefix},
          {"step_prefix", step_prefix},
          {"step_suffix", step_suffix},
          {"segment_separator", segment_separator},
          {"slot_separator", slot_separator},
          {"mask_token", mask_token},
          {"pos_token", pos_token},
          {"neg_token", neg_token},
          {"slot_markers", {{"MATH", "Math: "}, {"CONSISTENCY", "Consistency: "}, {"CORRECTNESS", "Correctness: "}}}};
}

std::string PromptTemplate::hash() const { return to_hex(fnv1a64(to_json().dump())); }

std::string PromptTemplate::render(const MaskedQuery& q) const {
  static constexpr std::pair<Slot, const char*> kMarkers[] = {
      {Slot::Math, "Math: "}, {Slot::Consistency, "Consistency: "}, {Slot::Correctness, "Correctness: "}};
  std::string out = question_prefix + q.question();
  for (std::size_t i = 1; i < q.segments.size(); ++i)
    out += segment_separator + step_prefix + std::to_string(i) + step_suffix + q.segments[i];
  out += segment_separator;
  bool first = true;
  for (const auto& [slot, marker] : kMarkers) {
    std::string value;
    if (const auto it = q.filled.find(slot); it != q.filled.end())
      value = it->second == LabelToken::Pos ? pos_token : neg_token;
    else if (std::find(q.mask_slots.begin(), q.mask_slots.end(), slot) != q.mask_slots.end())
      value = mask_token;
    else
      continue;
    if (!first) out += slot_separator;
    out += marker + value;
    first = false;
  }
  return out;
}

const PromptTemplate& default_template() {
  static const PromptTemplate t{"hprm-two-pass-v1", "Question: ", "Step ", ": ", "\n", ", ", "<mask>", "<+>", "<->"};
  return t;
}

MaskedQuery build_pass1_query(std::string_view question, std::span<const std::string> prefix, std::string_view step) {
  if (step.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw ValidationError("current step is empty");
  MaskedQuery q;
  q.segments.reserve(prefix.size() + 2);
  q.segments.emplace_back(question);
  q.segments.insert(q.segments.end(), prefix.begin(), prefix.end());
  q.segments.emplace_back(step);
  q.mask_slots = {Slot::Math, Slot::Consistency};
  return q;
}

MaskedQuery build_pass2_query(const MaskedQuery& pass1, std::optional<LabelToken> math_label,
                              std::optional<LabelToken> consistency_label) {
  if (!math_label || !consistency_label) throw UsageError("pass-2 query needs both pass-1 labels resolved");
  MaskedQuery q;
  q.segments = pass1.segments;
  q.filled = {{Slot::Math, *math_label}, {Slot::Consistency, *consistency_label}};
  q.mask_slots = {Slot::Correctness};
  return q;
}

LabelToken decode_label(const SlotProbs& p, TieBreak tie) {
  if (p.p_pos > p.p_neg) return LabelToken::Pos;
  if (p.p_pos < p.p_neg) return LabelToken::Neg;
  return tie == TieBreak::Pos ? LabelToken::Pos : LabelToken::Neg;
}

StepScoringError::StepScoringError(const Error& cause, std::size_t step_index)
    : Error(cause.category(), "step " + std::to_string(step_index) + ": " + cause.what()), step_index_(step_index) {}

StepScore score_step(ScorerBackend& backend, std::string_view question, std::span<const std::string> prefix,
                     std::string_view step, const DecodeOptions& opts) {
  const auto pass1 = build_pass1_query(question, prefix, step);
  const auto d1 = backend.evaluate(pass1);
  d1.check_against(pass1);

  StepScore score;
  score.math_label = decode_label(d1.at(Slot::Math), opts.math_tie);
  score.consistency_label = decode_label(d1.at(Slot::Consistency), opts.consistency_tie);

  const auto pass2 = build_pass2_query(pass1, score.math_label, score.consistency_label);
  const auto d2 = backend.evaluate(pass2);
  d2.check_against(pass2);
  score.reward = d2.at(Slot::Correctness).p_pos;
  return score;
}

namespace {

StepScore score_step_at(ScorerBackend& backend, const ReasoningTrace& trace, std::size_t t,
                        const DecodeOptions& opts) {
  try {
    const std::span<const std::string> before(trace.steps.data(), t - 1);
    return score_step(backend, trace.question, before, trace.steps[t - 1], opts);
  } catch (const Error& e) {
    throw StepScoringError(e, t);
  }
}

}  // namespace

std::vector<StepScore> score_trace(ScorerBackend& backend, const ReasoningTrace& trace, const DecodeOptions& opts) {
  validate_trace(trace);
  std::vector<StepScore> out(trace.size());
  parallel_for(trace.size(), backend.capabilities().max_in_flight > 1,
                       [&](std::size_t i) { out[i] = score_step_at(backend, trace, i + 1, opts); });
  return out;
}

std::vector<StepScore> score_trace_serial(ScorerBackend& backend, const ReasoningTrace& trace,
                                          const DecodeOptions& opts) {
  validate_trace(trace);
  std::vector<StepScore> out;
  out.reserve(trace.size());
  for (std::size_t t = 1; t <= trace.size(); ++t) out.push_back(score_step_at(backend, trace, t, opts));
  return out;
}

std::vector<std::vector<StepScore>> score_traces(ScorerBackend& backend, std::span<const ReasoningTrace> traces,
                                                 const DecodeOptions& opts) {
  std::vector<std::pair<std::size_t, std::size_t>> work;
  std::vector<std::vector<StepScore>> out(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    try {
      validate_trace(traces[i]);
    } catch (const ValidationError& e) {
      throw ValidationError("trace " + std::to_string(i + 1) + ": " + e.what());
    }
    out[i].resize(traces[i].size());
    for (std::size_t t = 1; t <= traces[i].size(); ++t) work.emplace_back(i, t);
  }
  parallel_for(work.size(), backend.capabilities().max_in_flight > 1, [&](std::size_t w) {
    const auto [i, t] = work[w];
    out[i][t - 1] = score_step_at(backend, traces[i], t, opts);
  });
  return out;
}

std::vector<std::vector<StepScore>> score_traces_serial(ScorerBackend& backend,
                                                        std::span<const ReasoningTrace> traces,
                                                        const DecodeOptions& opts) {
  std::vector<std::vector<StepScore>> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(score_trace_serial(backend, t, opts));
  return out;
}

MaskDistribution CountingBackend::evaluate(const MaskedQuery& query) {
  ++(query.is_pass1() ? pass1_ : pass2_);
  return inner_.evaluate(query);
}

json to_json(const MaskedQuery& q) {
  json slots = json::array();
  for (const Slot s : q.mask_slots) slots.push_back(to_string(s));
  json filled = json::object();
  for (const auto& [slot, label] : q.filled) filled[to_string(slot)] = hprm::to_string(label);
  const auto& tmpl = default_template();
  return {{"template_version", tmpl.version},
          {"template_hash", tmpl.hash()},
          {"segments", q.segments},
          {"mask_slots", slots},
          {"filled", filled}};
}

MaskedQuery masked_query_from_json(const json& j) {
  try {
    MaskedQuery q;
    q.segments = j.at("segments").get<std::vector<std::string>>();
    for (const auto& s : j.at("mask_slots")) q.mask_slots.push_back(slot_from_string(s.get<std::string>()));
    const json filled = j.value("filled", json::object());
    for (const auto& [k, v] : filled.items()) {
      const auto label = v.get<std::string>();
      if (label != "POS" && label != "NEG") throw ProtocolError("filled label must be POS or NEG");
      q.filled[slot_from_string(k)] = label == "POS" ? LabelToken::Pos : LabelToken::Neg;
    }
    return q;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed query: ") + e.what());
  }
}

json to_json(const MaskDistribution& d) {
  json j = json::object();
  for (const auto& [slot, p] : d.slots) j[to_string(slot)] = {{"p_pos", p.p_pos}, {"p_neg", p.p_neg}};
  return j;
}

MaskDistribution mask_distribution_from_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("distribution must be an object");
  MaskDistribution d;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_object() || !v.contains("p_pos") || !v.contains("p_neg") || !v.at("p_pos").is_number() ||
        !v.at("p_neg").is_number())
      throw ProtocolError("slot " + k + ": expected {p_pos, p_neg} numbers");
    d.slots[slot_from_string(k)] = {v.at("p_pos").get<double>(), v.at("p_neg").get<double>()};
  }
  return d;
}

}  // namespace hprm::scorer
