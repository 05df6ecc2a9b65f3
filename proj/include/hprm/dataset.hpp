#pragma once

// Corpus construction: maps human PRM800K labels and Monte Carlo '+'/'-'
// labels onto three-dimensional step label vectors, filters judge verdicts
// that contradict the gold source, and emits/parses judge prompts.
//
// The builder never calls a model. Judge prompts go out as files, responses
// come back as a verdict store keyed by prompt id.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hprm/core.hpp"

namespace hprm::dataset {

struct RawStepRecord {
  std::string trace_ref;
  std::size_t step_index = 1;  // 1-based
  std::string step_text;
  GoldSourceLabel gold;
};

struct RawTrace {
  std::string trace_ref;
  std::string question;
  std::vector<RawStepRecord> steps;  // step_index contiguous from 1

  ReasoningTrace as_reasoning_trace() const;
};

struct JudgeVerdict {
  int score_a = 0;  // mathematical logic
  int score_b = 0;  // consistency
  int score_c = 0;  // simplicity and optimality
  std::string reasoning;

  StepLabelVector labels() const { return {score_a, score_b, score_c}; }
};

enum class Provenance { HumanMapped, JudgeLabeled, MCFiltered };
const char* to_string(Provenance p);

struct LabeledStepRecord {
  std::string trace_ref;
  std::string question;
  std::size_t step_index = 1;
  std::string step_text;
  GoldSourceLabel gold;
  StepLabelVector labels;
  Provenance provenance = Provenance::HumanMapped;

  bool operator==(const LabeledStepRecord&) const = default;
};

struct NeedsJudge {
  bool operator==(const NeedsJudge&) const = default;
};

struct Rejected {
  std::string rule;
  bool operator==(const Rejected&) const = default;
};

using MapResult = std::variant<StepLabelVector, NeedsJudge>;
using FilterResult = std::variant<StepLabelVector, Rejected>;

// Rule names written to the rejects sidecar.
inline constexpr std::string_view kRulePrm800kJudgedAllOnes = "prm800k-negative-judged-all-correct";
inline constexpr std::string_view kRuleMcPlusNotAllOnes = "mc-plus-requires-all-correct";
inline constexpr std::string_view kRuleMcMinusAllOnes = "mc-minus-judged-all-correct";
inline constexpr std::string_view kRuleMcNotSampled = "mc-not-sampled";
inline constexpr std::string_view kRuleTruncated = "truncated-after-first-error";

/// l=1 -> (1,1,1); l=0 -> (1,1,0); l=-1 -> NeedsJudge. Throws
/// ValidationError for any other l.
MapResult map_prm800k(int l);

/// Judge labels for a PRM800K l=-1 step. Rejects (1,1,1). Throws UsageError
/// when l != -1 and ValidationError for non-binary scores.
FilterResult filter_judged_prm800k(int l, const JudgeVerdict& v);

/// '+' keeps only (1,1,1); '-' keeps only vectors with at least one 0.
FilterResult filter_mc(McLabel mc, const JudgeVerdict& v);

/// The annotation prompt with its {context} slot filled by the question,
/// steps s_1..s_{t-1} and the current step s_t. Throws BoundsError on t.
std::string emit_judge_prompt(const ReasoningTrace& trace, std::size_t t);

/// Parses the last "Score A/B/C:" blocks (after the last "Final answers:"
/// marker when present). Throws ParseError naming the missing or
/// out-of-domain block.
JudgeVerdict parse_judge_response(std::string_view text);

std::string prompt_id(GoldKind source, std::string_view trace_ref, std::size_t step_index);

class VerdictStore {
 public:
  struct Entry {
    std::optional<JudgeVerdict> verdict;
    std::string parse_error;  // set when the stored response did not parse
  };

  void add_response(const std::string& id, std::string_view response);
  void add_verdict(const std::string& id, JudgeVerdict verdict);
  const Entry* find(const std::string& id) const;
  std::size_t size() const { return entries_.size(); }

  /// Line-delimited {prompt_id, response} records.
  static VerdictStore load(const std::filesystem::path& path);

 private:
  std::map<std::string, Entry, std::less<>> entries_;
};

struct BuildOptions {
  double sample_rate = 1.0;  // fraction of MC steps sent to the judge
  std::uint64_t seed = 0;
  bool truncate_after_first_error = false;
};

/// Deterministic, order-independent sampling decision for an MC step.
bool mc_step_sampled(const BuildOptions& opts, std::string_view trace_ref, std::size_t step_index);

enum class AuditStatus { Rejected, Unresolved };

struct AuditRecord {
  GoldKind source = GoldKind::Prm800k;
  std::string trace_ref;
  std::size_t step_index = 1;
  AuditStatus status = AuditStatus::Rejected;
  std::string rule;  // violated rule, or the reason a verdict is unavailable
  std::optional<StepLabelVector> labels;

  bool operator==(const AuditRecord&) const = default;
};

struct SourceStats {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t unresolved = 0;
  std::map<std::string, std::size_t> rejected_by_rule;

  std::size_t rejected() const;
  bool operator==(const SourceStats&) const = default;
};

struct BuildStats {
  SourceStats prm800k;
  SourceStats mistral;
  std::vector<std::string> unresolved;  // prompt ids lacking a usable verdict

  bool operator==(const BuildStats&) const = default;
};

struct CorpusResult {
  std::vector<LabeledStepRecord> records;
  std::vector<AuditRecord> audit;
  BuildStats stats;
};

/// One flattened step plus the context the per-record decision needs.
struct PendingStep {
  RawStepRecord record;
  const RawTrace* trace = nullptr;
  bool truncated = false;
};

using Decision = std::variant<LabeledStepRecord, AuditRecord>;

Decision decide(const PendingStep& step, const VerdictStore& store, const BuildOptions& opts);

/// Per-record decisions, OpenMP-parallel. Output order matches input order.
std::vector<Decision> decide_all(std::span<const PendingStep> steps, const VerdictStore& store,
                                 const BuildOptions& opts);
/// Serial reference for decide_all.
std::vector<Decision> decide_all_serial(std::span<const PendingStep> steps, const VerdictStore& store,
                                        const BuildOptions& opts);

/// Flattens traces into pending steps (validating contiguity and source kind).
std::vector<PendingStep> flatten(std::span<const RawTrace> traces, GoldKind expected, const BuildOptions& opts);

CorpusResult build_corpus(std::span<const RawTrace> prm800k, std::span<const RawTrace> mistral,
                          const VerdictStore& verdicts, const BuildOptions& opts = {});

/// Records that violate validate_label_vector against their own gold label.
std::size_t count_label_violations(std::span<const LabeledStepRecord> records);

struct JudgeRequest {
  std::string prompt_id;
  GoldKind source = GoldKind::Prm800k;
  std::string trace_ref;
  std::size_t step_index = 1;
  std::string prompt;
};

/// Prompts for every step that needs a judge: PRM800K l=-1 steps and
/// sampled MC steps. Same sampling and truncation rules as build_corpus.
std::vector<JudgeRequest> judge_requests(std::span<const RawTrace> prm800k, std::span<const RawTrace> mistral,
                                         const BuildOptions& opts = {});

// File formats.
std::vector<RawTrace> load_raw_traces(const std::filesystem::path& path);
std::vector<RawTrace> raw_traces_from_json(const std::vector<json>& lines);
json to_json_record(const RawTrace& trace);
json to_json_record(const LabeledStepRecord& r);
LabeledStepRecord labeled_record_from_json(const json& j);
json to_json_record(const AuditRecord& r);
json to_json_record(const JudgeRequest& r);
json to_json(const BuildStats& s);

}  // namespace hprm::dataset
