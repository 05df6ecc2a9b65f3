#include "hprm/mock_backend.hpp"

#include <algorithm>

#include "hprm/hashing.hpp"
#include "hprm/log.hpp"

namespace hprm::scorer {

std::vector<MockRule> default_mock_rules() {
  return {
      {"[ERRMATH]", 0.1, 0.95, 1.0},
      {"[ERRCONS]", 0.95, 0.1, 1.0},
      {"[SUBOPT]", 0.95, 0.95, 0.3 / 0.95},
  };
}

MockOracleBackend::MockOracleBackend(MockConfig config) : config_(std::move(config)) {
  if (!(config_.noise_rate >= 0.0 && config_.noise_rate <= 1.0))
    throw ValidationError("mock noise rate must lie in [0, 1]");
}

std::string MockOracleBackend::id() const {
  std::string id = "mock-oracle";
  if (config_.noise_rate > 0.0)
    id += "(noise=" + std::to_string(config_.noise_rate) + ",seed=" + std::to_string(config_.noise_seed) + ")";
  return id;
}

const MockRule* MockOracleBackend::match(const std::string& step) const {
  const MockRule* hit = nullptr;
  for (const auto& rule : config_.rules) {
    if (step.find(rule.marker) == std::string::npos) continue;
    if (hit == nullptr) {
      hit = &rule;
    } else {
      ++conflicts_;
      log::warn("mock oracle: step carries markers " + hit->marker + " and " + rule.marker + "; using " +
                hit->marker);
      break;
    }
  }
  return hit;
}

bool MockOracleBackend::flipped(const MaskedQuery& query) const {
  if (config_.noise_rate <= 0.0) return false;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : query.segments) h = fnv1a64(s, fnv1a64("\x1f", h));
  return keyed_uniform(config_.noise_seed, to_hex(h)) < config_.noise_rate;
}

MaskDistribution MockOracleBackend::evaluate(const MaskedQuery& query) {
  query.validate();
  const MockRule* rule = match(query.current_step());
  const double p_math = rule ? rule->math_p_pos : config_.default_p_pos;
  const double p_cons = rule ? rule->consistency_p_pos : config_.default_p_pos;
  const double optimality = rule ? rule->optimality : 1.0;

  MaskDistribution d;
  for (const Slot s : query.mask_slots) {
    double p = 0.0;
    switch (s) {
      case Slot::Math: p = p_math; break;
      case Slot::Consistency: p = p_cons; break;
      case Slot::Correctness:
        p = std::clamp(optimality * std::min(p_math, p_cons), 0.0, 1.0);
        if (flipped(query)) p = 1.0 - p;
        break;
    }
    d.slots[s] = {p, 1.0 - p};
  }
  return d;
}

}  // namespace hprm::scorer
