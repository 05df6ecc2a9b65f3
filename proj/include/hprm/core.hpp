#pragma once

// Domain types shared by every module. All of them are plain immutable
// values; nothing here performs I/O.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hprm {

using json = nlohmann::json;

// Two-symbol label alphabet. Backends map these onto their own special tokens.
enum class LabelToken : std::uint8_t { Neg = 0, Pos = 1 };

inline int to_int(LabelToken t) { return t == LabelToken::Pos ? 1 : 0; }
inline LabelToken label_from_int(int v) { return v ? LabelToken::Pos : LabelToken::Neg; }
const char* to_string(LabelToken t);

struct ReasoningTrace {
  std::string question;
  std::vector<std::string> steps;
  std::optional<std::string> final_answer;
  std::string source_id;

  std::size_t size() const { return steps.size(); }
};

/// Throws ValidationError unless steps is non-empty and every step has
/// non-whitespace content.
void validate_trace(const ReasoningTrace& trace);

/// Steps s_1..s_{t-1} for the 1-based step index t. Throws BoundsError
/// unless 1 <= t <= T.
std::vector<std::string> prefix(const ReasoningTrace& trace, std::size_t t);

// Components are stored as integers 0/1 to keep file formats unambiguous.
struct StepLabelVector {
  int math = 0;
  int consistency = 0;
  int correctness = 0;

  bool is_binary() const;
  bool all_ones() const { return math == 1 && consistency == 1 && correctness == 1; }
  bool operator==(const StepLabelVector&) const = default;
};

struct StepScore {
  LabelToken math_label = LabelToken::Pos;
  LabelToken consistency_label = LabelToken::Pos;
  double reward = 0.0;

  bool operator==(const StepScore&) const = default;
};

enum class GoldKind { Prm800k, MistralMc };
enum class McLabel { Plus, Minus };

const char* to_string(GoldKind k);
const char* to_string(McLabel m);

struct GoldSourceLabel {
  GoldKind kind = GoldKind::Prm800k;
  std::optional<int> prm800k_label;
  std::optional<McLabel> mc_label;

  static GoldSourceLabel prm800k(int l);
  static GoldSourceLabel mistral_mc(McLabel m);

  /// Exactly one label present, matching kind, and within its domain.
  bool is_well_formed() const;
  bool operator==(const GoldSourceLabel&) const = default;
};

/// True iff c is admissible under the gold label:
///   PRM800K l=1  -> c == (1,1,1)
///   PRM800K l=0  -> c == (1,1,0)
///   PRM800K l=-1 -> c != (1,1,1)
///   MC '+'       -> c == (1,1,1)
///   MC '-'       -> c != (1,1,1)
/// Non-binary vectors and malformed gold labels are never admissible.
bool validate_label_vector(const StepLabelVector& c, const GoldSourceLabel& g);

void to_json(json& j, const StepLabelVector& v);
void from_json(const json& j, StepLabelVector& v);
void to_json(json& j, const GoldSourceLabel& g);
void from_json(const json& j, GoldSourceLabel& g);
void to_json(json& j, const StepScore& s);
void from_json(const json& j, StepScore& s);
void to_json(json& j, const ReasoningTrace& t);
void from_json(const json& j, ReasoningTrace& t);

}  // namespace hprm
