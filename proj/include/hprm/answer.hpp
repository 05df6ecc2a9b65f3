#pragma once

// Final-answer extraction and equivalence for accuracy metrics. No symbolic
// algebra: answers compare as exact rationals when both parse, otherwise as
// normalized strings.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hprm::answer {

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;  // > 0, gcd(num, den) == 1
  bool operator==(const Rational&) const = default;
};

/// Content of the last \boxed{...}; else the last standalone number; else
/// the trimmed text.
std::string extract_answer_span(std::string_view text);

/// Strips TeX spacing/delimiters, rewrites \frac{a}{b} as a/b, drops
/// whitespace, thousands separators and a trailing period.
std::string normalize(std::string_view span);

/// Integers, finite decimals and a/b fractions; nullopt otherwise or on
/// int64 overflow.
std::optional<Rational> parse_rational(std::string_view normalized);

bool answers_equivalent(std::string_view a, std::string_view b);

using Equivalence = std::function<bool(const std::string&, const std::string&)>;

inline Equivalence default_equivalence() {
  return [](const std::string& a, const std::string& b) { return answers_equivalent(a, b); };
}

/// First occurrence of the largest equivalence class; ties go to the class
/// seen first. Throws ValidationError on an empty list.
std::string majority_vote(std::span<const std::string> answers, const Equivalence& eq = default_equivalence());

/// Fraction of problems where any sampled answer matches gold.
double pass_at_k(std::span<const std::vector<std::string>> answer_sets, std::span<const std::string> gold,
                 const Equivalence& eq = default_equivalence());

}  // namespace hprm::answer
