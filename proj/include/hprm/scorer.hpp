#pragma once

// Two-forward-pass hierarchical step scoring over an abstract masked-label
// backend.
//
//   pass 1:  [question, s_1..s_{t-1}, s_t]  Math: <mask>, Consistency: <mask>
//            -> M_t, C_t decoded by argmax (ties -> POS)
//   pass 2:  same segments, Math: M_t, Consistency: C_t, Correctness: <mask>
//            -> reward R_t = p_pos at the Correctness slot
//
// Both pass-1 labels come from one backend evaluation in which neither is
// filled, so neither can influence the other. The reward is taken verbatim
// from pass 2 with no recalibration.

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hprm/core.hpp"
#include "hprm/errors.hpp"

namespace hprm::scorer {

enum class Slot { Math, Consistency, Correctness };

const char* to_string(Slot s);
Slot slot_from_string(std::string_view s);

struct MaskedQuery {
  std::vector<std::string> segments;  // [question, s_1, ..., s_t]
  std::vector<Slot> mask_slots;
  std::map<Slot, LabelToken> filled;

  /// Throws ValidationError on a broken slot layout.
  void validate() const;
  bool is_pass1() const;
  const std::string& question() const { return segments.front(); }
  const std::string& current_step() const { return segments.back(); }
  bool operator==(const MaskedQuery&) const = default;
};

struct SlotProbs {
  double p_pos = 0.0;
  double p_neg = 0.0;
  bool operator==(const SlotProbs&) const = default;
};

inline constexpr double kDistributionTolerance = 1e-6;

struct MaskDistribution {
  std::map<Slot, SlotProbs> slots;

  const SlotProbs& at(Slot s) const;
  /// Throws ProtocolError unless every masked slot of `q` is present with
  /// p_pos, p_neg >= 0 and |p_pos + p_neg - 1| <= 1e-6.
  void check_against(const MaskedQuery& q) const;
  bool operator==(const MaskDistribution&) const = default;
};

struct BackendCapabilities {
  std::size_t max_in_flight = 1;
  std::size_t batch_size = 1;
};

class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;

  virtual MaskDistribution evaluate(const MaskedQuery& query) = 0;
  /// Default loops over evaluate(); remote backends send one envelope.
  virtual std::vector<MaskDistribution> evaluate_batch(std::span<const MaskedQuery> queries);
  virtual BackendCapabilities capabilities() const { return {}; }
  virtual std::string id() const = 0;
};

/// Fixed rendering layout shared by harness and backend. The hash travels
/// with every request so a backend rendering a different layout fails fast.
struct PromptTemplate {
  std::string version;
  std::string question_prefix;
  std::string step_prefix;
  std::string step_suffix;
  std::string segment_separator;
  std::string slot_separator;
  std::string mask_token;
  std::string pos_token;
  std::string neg_token;

  json to_json() const;
  std::string hash() const;
  /// Text the backend feeds its model for this query.
  std::string render(const MaskedQuery& q) const;
};

const PromptTemplate& default_template();

MaskedQuery build_pass1_query(std::string_view question, std::span<const std::string> prefix, std::string_view step);

/// Throws UsageError if either pass-1 label is unresolved.
MaskedQuery build_pass2_query(const MaskedQuery& pass1, std::optional<LabelToken> math_label,
                              std::optional<LabelToken> consistency_label);

enum class TieBreak { Pos, Neg };

struct DecodeOptions {
  TieBreak math_tie = TieBreak::Pos;
  TieBreak consistency_tie = TieBreak::Pos;
};

LabelToken decode_label(const SlotProbs& p, TieBreak tie);

/// Step-scoring failure; keeps the original category so the CLI exit code
/// is unchanged.
class StepScoringError : public Error {
 public:
  StepScoringError(const Error& cause, std::size_t step_index);
  std::size_t step_index() const noexcept { return step_index_; }

 private:
  std::size_t step_index_;
};

/// Exactly two backend calls.
StepScore score_step(ScorerBackend& backend, std::string_view question, std::span<const std::string> prefix,
                     std::string_view step, const DecodeOptions& opts = {});

/// One score per step. Step t sees exactly s_1..s_{t-1}; no label feedback
/// across steps. Steps run concurrently when the backend allows more than
/// one request in flight.
std::vector<StepScore> score_trace(ScorerBackend& backend, const ReasoningTrace& trace,
                                   const DecodeOptions& opts = {});
std::vector<StepScore> score_trace_serial(ScorerBackend& backend, const ReasoningTrace& trace,
                                          const DecodeOptions& opts = {});

/// Batch scoring across traces, OpenMP-parallel over (trace, step) pairs.
std::vector<std::vector<StepScore>> score_traces(ScorerBackend& backend, std::span<const ReasoningTrace> traces,
                                                 const DecodeOptions& opts = {});
std::vector<std::vector<StepScore>> score_traces_serial(ScorerBackend& backend,
                                                        std::span<const ReasoningTrace> traces,
                                                        const DecodeOptions& opts = {});

/// Decorator that counts evaluate() calls, split by pass.
class CountingBackend : public ScorerBackend {
 public:
  explicit CountingBackend(ScorerBackend& inner) : inner_(inner) {}

  MaskDistribution evaluate(const MaskedQuery& query) override;
  BackendCapabilities capabilities() const override { return inner_.capabilities(); }
  std::string id() const override { return inner_.id(); }

  std::size_t calls() const { return pass1_ + pass2_; }
  std::size_t pass1_calls() const { return pass1_; }
  std::size_t pass2_calls() const { return pass2_; }

 private:
  ScorerBackend& inner_;
  std::atomic<std::size_t> pass1_{0};
  std::atomic<std::size_t> pass2_{0};
};

json to_json(const MaskedQuery& q);
MaskedQuery masked_query_from_json(const json& j);
json to_json(const MaskDistribution& d);
/// Throws ProtocolError on malformed wire data.
MaskDistribution mask_distribution_from_json(const json& j);

}  // namespace hprm::scorer
