#include "hprm/answer.hpp"

#include <cctype>
#include <numeric>
#include <regex>

#include "hprm/errors.hpp"

namespace hprm::answer {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
}

// Index one past the '}' matching the '{' at `open`, or npos.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

// \frac{a}{b} -> (a)/(b) when both groups are brace-balanced.
std::string rewrite_fracs(std::string s) {
  for (std::size_t pos; (pos = s.find("\\frac{")) != std::string::npos;) {
    const std::size_t a_open = pos + 5;
    const std::size_t a_end = match_brace(s, a_open);
    if (a_end == std::string::npos || a_end >= s.size() || s[a_end] != '{') break;
    const std::size_t b_end = match_brace(s, a_end);
    if (b_end == std::string::npos) break;
    const std::string a = s.substr(a_open + 1, a_end - a_open - 2);
    const std::string b = s.substr(a_end + 1, b_end - a_end - 2);
    s.replace(pos, b_end - pos, a + "/" + b);
  }
  return s;
}

bool checked_mul(std::int64_t a, std::int64_t b, std::int64_t& out) { return !__builtin_mul_overflow(a, b, &out); }
bool checked_add(std::int64_t a, std::int64_t b, std::int64_t& out) { return !__builtin_add_overflow(a, b, &out); }

std::optional<std::int64_t> parse_digits(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    if (!checked_mul(v, 10, v) || !checked_add(v, c - '0', v)) return std::nullopt;
  }
  return v;
}

Rational reduced(std::int64_t num, std::int64_t den) {
  const std::int64_t g = std::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (den < 0) {
    num = -num;
    den = -den;
  }
  return {num, den};
}

}  // namespace

std::string extract_answer_span(std::string_view text) {
  constexpr std::string_view kBoxed = "\\boxed{";
  if (const auto pos = text.rfind(kBoxed); pos != std::string_view::npos) {
    const std::size_t open = pos + kBoxed.size() - 1;
    const std::size_t close = match_brace(text, open);
    if (close != std::string_view::npos) return trim(text.substr(open + 1, close - open - 2));
  }
  // A number counts as standalone when it is not glued to an expression.
  static const std::regex kNumber(R"((?:^|[\s=:$(])([-+]?\d+(?:,\d{3})*(?:\.\d+)?(?:/\d+)?)(?=$|[\s.,;:!?)$]))");
  const std::string s(text);
  std::string last;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kNumber); it != std::sregex_iterator(); ++it)
    last = (*it)[1].str();
  if (!last.empty()) return last;
  return trim(text);
}

std::string normalize(std::string_view span) {
  std::string s = trim(span);
  for (std::string_view tok : {"\\left", "\\right", "\\!", "\\,", "\\;","\\ ", "$"}) replace_all(s, tok, "");
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  s = rewrite_fracs(s);
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  while (!out.empty() && out.back() == '.') out.pop_back();
  static const std::regex kThousands(R"([-+]?\d{1,3}(,\d{3})+(\.\d+)?)");
  if (std::regex_match(out, kThousands)) replace_all(out, ",", "");
  return out;
}

std::optional<Rational> parse_rational(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool negative = false;
  if (s.front() == '-' || s.front() == '+') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);

  std::optional<Rational> r;
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    auto num = parse_digits(s.substr(0, slash));
    auto den = parse_digits(s.substr(slash + 1));
    if (!num || !den || *den == 0) return std::nullopt;
    r = reduced(*num, *den);
  } else if (const auto dot = s.find('.'); dot != std::string_view::npos) {
    const auto int_part = s.substr(0, dot);
    const auto frac_part = s.substr(dot + 1);
    if (frac_part.empty() || (int_part.empty() && frac_part.empty())) return std::nullopt;
    auto whole = int_part.empty() ? std::optional<std::int64_t>(0) : parse_digits(int_part);
    auto frac = parse_digits(frac_part);
    if (!whole || !frac) return std::nullopt;
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac_part.size(); ++i)
      if (!checked_mul(den, 10, den)) return std::nullopt;
    std::int64_t num = 0;
    if (!checked_mul(*whole, den, num) || !checked_add(num, *frac, num)) return std::nullopt;
    r = reduced(num, den);
  } else {
    auto v = parse_digits(s);
    if (!v) return std::nullopt;
    r = Rational{*v, 1};
  }
  if (negative) r->num = -r->num;
  return r;
}

bool answers_equivalent(std::string_view a, std::string_view b) {
  const auto na = normalize(extract_answer_span(a));
  const auto nb = normalize(extract_answer_span(b));
  const auto ra = parse_rational(na);
  const auto rb = parse_rational(nb);
  if (ra && rb) return *ra == *rb;
  return na == nb;
}

std::string majority_vote(std::span<const std::string> answers, const Equivalence& eq) {
  if (answers.empty()) throw ValidationError("majority vote over an empty answer list");
  std::vector<std::size_t> reps;  // index of each class's first member
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    std::size_t c = 0;
    while (c < reps.size() && !eq(answers[reps[c]], answers[i])) ++c;
    if (c == reps.size()) {
      reps.push_back(i);
      counts.push_back(0);
    }
    ++counts[c];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[best]) best = c;
  return answers[reps[best]];
}

double pass_at_k(std::span<const std::vector<std::string>> answer_sets, std::span<const std::string> gold,
                 const Equivalence& eq) {
  if (answer_sets.size() != gold.size()) throw ValidationError("pass@k: one gold answer per problem required");
  if (answer_sets.empty()) throw ValidationError("pass@k over zero problems");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < answer_sets.size(); ++i) {
    if (answer_sets[i].empty()) throw ValidationError("pass@k: problem " + std::to_string(i + 1) + " has no samples");
    for (const auto& a : answer_sets[i]) {
      if (eq(a, gold[i])) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(answer_sets.size());
}

}  // namespace hprm::answer
