#pragma once

// Deterministic scorer test double. A step's behaviour is selected by text
// markers in the current step (first matching rule wins):
//
//   [ERRMATH]  MATH p_pos 0.1
//   [ERRCONS]  CONSISTENCY p_pos 0.1
//   [SUBOPT]   both pass-1 slots 0.95, CORRECTNESS p_pos 0.3
//   (none)     every slot 0.95
//
// CORRECTNESS p_pos = optimality * min(MATH p_pos, CONSISTENCY p_pos).

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "hprm/scorer.hpp"

namespace hprm::scorer {

struct MockRule {
  std::string marker;
  double math_p_pos = 0.95;
  double consistency_p_pos = 0.95;
  double optimality = 1.0;
};

std::vector<MockRule> default_mock_rules();

struct MockConfig {
  std::vector<MockRule> rules = default_mock_rules();
  double default_p_pos = 0.95;
  // Probability that the CORRECTNESS distribution is flipped (p_pos <-> p_neg),
  // decided per query by a keyed hash so repeated runs agree.
  double noise_rate = 0.0;
  std::uint64_t noise_seed = 0;
  std::size_t max_in_flight = 8;
};

class MockOracleBackend : public ScorerBackend {
 public:
  explicit MockOracleBackend(MockConfig config = {});

  MaskDistribution evaluate(const MaskedQuery& query) override;
  BackendCapabilities capabilities() const override { return {config_.max_in_flight, 1}; }
  std::string id() const override;

  /// Rule selected for a step, or nullptr for the default behaviour.
  const MockRule* match(const std::string& step) const;
  /// Whether the noise draw flips this query's CORRECTNESS slot.
  bool flipped(const MaskedQuery& query) const;
  std::size_t marker_conflicts() const { return conflicts_; }
  const MockConfig& config() const { return config_; }

 private:
  MockConfig config_;
  mutable std::atomic<std::size_t> conflicts_{0};
};

}  // namespace hprm::scorer
