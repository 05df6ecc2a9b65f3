#include "hprm/core.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "hprm/errors.hpp"
#include "hprm/hashing.hpp"

namespace hprm {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const char* to_string(LabelToken t) { return t == LabelToken::Pos ? "POS" : "NEG"; }

const char* to_string(GoldKind k) { return k == GoldKind::Prm800k ? "PRM800K" : "MistralMC"; }

const char* to_string(McLabel m) { return m == McLabel::Plus ? "+" : "-"; }

namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

int read_binary(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw ParseError(std::string("label field '") + key + "' missing or not an integer");
  const int v = j.at(key).get<int>();
  if (v != 0 && v != 1) throw ParseError(std::string("label field '") + key + "' must be 0 or 1");
  return v;
}

}  // namespace

void validate_trace(const ReasoningTrace& trace) {
  if (trace.steps.empty()) throw ValidationError("trace '" + trace.source_id + "' has no steps");
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    if (blank(trace.steps[i]))
      throw ValidationError("trace '" + trace.source_id + "' step " + std::to_string(i + 1) + " is empty");
  }
}

std::vector<std::string> prefix(const ReasoningTrace& trace, std::size_t t) {
  if (t < 1 || t > trace.steps.size())
    throw BoundsError("step index " + std::to_string(t) + " outside 1.." + std::to_string(trace.steps.size()));
  return {trace.steps.begin(), trace.steps.begin() + static_cast<std::ptrdiff_t>(t - 1)};
}

bool StepLabelVector::is_binary() const {
  auto bit = [](int v) { return v == 0 || v == 1; };
  return bit(math) && bit(consistency) && bit(correctness);
}

GoldSourceLabel GoldSourceLabel::prm800k(int l) {
  GoldSourceLabel g;
  g.kind = GoldKind::Prm800k;
  g.prm800k_label = l;
  return g;
}

GoldSourceLabel GoldSourceLabel::mistral_mc(McLabel m) {
  GoldSourceLabel g;
  g.kind = GoldKind::MistralMc;
  g.mc_label = m;
  return g;
}

bool GoldSourceLabel::is_well_formed() const {
  if (kind == GoldKind::Prm800k)
    return prm800k_label && !mc_label && *prm800k_label >= -1 && *prm800k_label <= 1;
  return mc_label && !prm800k_label;
}

bool validate_label_vector(const StepLabelVector& c, const GoldSourceLabel& g) {
  if (!c.is_binary() || !g.is_well_formed()) return false;
  if (g.kind == GoldKind::Prm800k) {
    switch (*g.prm800k_label) {
      case 1: return c == StepLabelVector{1, 1, 1};
      case 0: return c == StepLabelVector{1, 1, 0};
      default: return !c.all_ones();
    }
  }
  return *g.mc_label == McLabel::Plus ? c.all_ones() : !c.all_ones();
}

void to_json(json& j, const StepLabelVector& v) {
  j = json{{"math", v.math}, {"consistency", v.consistency}, {"correctness", v.correctness}};
}

void from_json(const json& j, StepLabelVector& v) {
  v.math = read_binary(j, "math");
  v.consistency = read_binary(j, "consistency");
  v.correctness = read_binary(j, "correctness");
}

void to_json(json& j, const GoldSourceLabel& g) {
  j = json{{"kind", to_string(g.kind)}};
  if (g.kind == GoldKind::Prm800k)
    j["value"] = g.prm800k_label.value_or(0);
  else
    j["value"] = to_string(g.mc_label.value_or(McLabel::Minus));
}

void from_json(const json& j, GoldSourceLabel& g) {
  const auto kind = j.at("kind").get<std::string>();
  const auto& value = j.at("value");
  if (kind == "PRM800K") {
    if (!value.is_number_integer()) throw ParseError("PRM800K gold.value must be an integer");
    g = GoldSourceLabel::prm800k(value.get<int>());
  } else if (kind == "MistralMC") {
    if (!value.is_string()) throw ParseError("MistralMC gold.value must be \"+\" or \"-\"");
    const auto s = value.get<std::string>();
    if (s == "+")
      g = GoldSourceLabel::mistral_mc(McLabel::Plus);
    else if (s == "-" || s == "−")
      g = GoldSourceLabel::mistral_mc(McLabel::Minus);
    else
      throw ParseError("MistralMC gold.value must be \"+\" or \"-\", got \"" + s + "\"");
  } else {
    throw ParseError("unknown gold.kind \"" + kind + "\"");
  }
  if (!g.is_well_formed()) throw ValidationError("gold label out of domain");
}

void to_json(json& j, const StepScore& s) {
  j = json{{"math", to_int(s.math_label)}, {"consistency", to_int(s.consistency_label)}, {"reward", s.reward}};
}

void from_json(const json& j, StepScore& s) {
  s.math_label = label_from_int(read_binary(j, "math"));
  s.consistency_label = label_from_int(read_binary(j, "consistency"));
  s.reward = j.at("reward").get<double>();
  if (!(s.reward >= 0.0 && s.reward <= 1.0)) throw ParseError("reward outside [0,1]");
}

void to_json(json& j, const ReasoningTrace& t) {
  j = json{{"source_id", t.source_id}, {"question", t.question}, {"steps", t.steps}};
  if (t.final_answer) j["final_answer"] = *t.final_answer;
}

void from_json(const json& j, ReasoningTrace& t) {
  if (!j.contains("question") || !j.contains("steps")) throw ParseError("trace record needs 'question' and 'steps'");
  t.question = j.at("question").get<std::string>();
  t.steps = j.at("steps").get<std::vector<std::string>>();
  t.source_id = j.value("source_id", j.value("id", std::string{}));
  if (j.contains("final_answer") && j.at("final_answer").is_string())
    t.final_answer = j.at("final_answer").get<std::string>();
  else
    t.final_answer.reset();
}

}  // namespace hprm
