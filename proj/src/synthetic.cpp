#include "hprm/synthetic.hpp"

#include <regex>

#include "hprm/errors.hpp"
#include "hprm/hashing.hpp"

namespace hprm::synthetic {

namespace {

// Small deterministic stream over keyed_uniform.
class Draw {
 public:
  Draw(std::uint64_t seed, std::string scope) : seed_(seed), scope_(std::move(scope)) {}
  double uniform() { return keyed_uniform(seed_, scope_ + "#" + std::to_string(counter_++)); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }

 private:
  std::uint64_t seed_;
  std::string scope_;
  std::uint64_t counter_ = 0;
};

const std::vector<std::string>& category_tags() {
  static const std::vector<std::string> tags{"NR", "NCL", "ES", "SC", "DC", "CI", "PS", "DR", "MS"};
  return tags;
}

std::string join_terms(const std::vector<long long>& terms) {
  std::string s;
  for (std::size_t i = 0; i < terms.size(); ++i) s += (i ? " + " : "") + std::to_string(terms[i]);
  return s;
}

}  // namespace

std::vector<MarkedTrace> make_benchmark(const BenchmarkSpec& spec) {
  if (spec.min_steps < 1 || spec.max_steps < spec.min_steps) throw ValidationError("bad step range");
  std::vector<MarkedTrace> out;
  out.reserve(spec.traces);
  for (std::size_t i = 0; i < spec.traces; ++i) {
    Draw d(spec.seed, "bench/" + std::to_string(i));
    const std::size_t steps = d.between(spec.min_steps, spec.max_steps);
    std::vector<long long> terms;
    for (std::size_t k = 0; k <= steps; ++k) terms.push_back(static_cast<long long>(d.between(1, 99)));

    MarkedTrace m;
    m.trace.source_id = "synthetic-" + std::to_string(i + 1);
    m.trace.question = "Problem " + std::to_string(i + 1) + ": compute " + join_terms(terms) + ".";
    m.markers.assign(steps, "");
    if (d.uniform() < spec.erroneous_fraction) {
      const std::size_t first = d.between(1, steps);
      m.first_error = first;
      m.markers[first - 1] = kMarkers[d.below(3)];
      for (std::size_t t = first + 1; t <= steps; ++t)
        if (d.uniform() < spec.later_marker_rate) m.markers[t - 1] = kMarkers[d.below(3)];
    }
    long long total = terms[0];
    for (std::size_t t = 1; t <= steps; ++t) {
      const long long next = total + terms[t];
      std::string text = "Add " + std::to_string(terms[t]) + ": " + std::to_string(total) + " + " +
                         std::to_string(terms[t]) + " = " + std::to_string(next) + ".";
      if (!m.markers[t - 1].empty()) text += " " + m.markers[t - 1];
      m.trace.steps.push_back(std::move(text));
      m.gold_labels.push_back(m.markers[t - 1].empty() ? 1 : 0);
      total = next;
    }
    m.category_tag = category_tags()[d.below(category_tags().size())];
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<eval::FirstErrorCase> first_error_cases(const std::vector<MarkedTrace>& traces) {
  std::vector<eval::FirstErrorCase> out;
  for (const auto& m : traces) out.push_back({m.trace.source_id, m.trace, m.first_error});
  return out;
}

std::vector<eval::StepJudgmentCase> step_judgment_cases(const std::vector<MarkedTrace>& traces) {
  std::vector<eval::StepJudgmentCase> out;
  for (const auto& m : traces) out.push_back({m.trace.source_id, m.trace, m.gold_labels, m.category_tag});
  return out;
}

std::vector<search::Problem> make_problems(const ProblemSpec& spec) {
  if (spec.min_terms < 2 || spec.max_terms < spec.min_terms) throw ValidationError("bad term range");
  std::vector<search::Problem> out;
  for (std::size_t i = 0; i < spec.problems; ++i) {
    Draw d(spec.seed, "problem/" + std::to_string(i));
    std::vector<long long> terms(d.between(spec.min_terms, spec.max_terms));
    long long sum = 0;
    for (auto& t : terms) sum += (t = static_cast<long long>(d.between(1, 99)));
    out.push_back({"p" + std::to_string(i + 1), "Compute " + join_terms(terms) + ".", std::to_string(sum)});
  }
  return out;
}

ArithmeticPolicy::ArithmeticPolicy(double error_rate, std::uint64_t seed) : error_rate_(error_rate), seed_(seed) {
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) throw ValidationError("policy error rate must lie in [0, 1]");
}

json ArithmeticPolicy::config() const {
  return {{"kind", "arithmetic-mock"}, {"error_rate", error_rate_}, {"seed", seed_}, {"temperature", nullptr}};
}

std::vector<std::string> ArithmeticPolicy::propose(const search::ProposeRequest& request) {
  ++calls_;
  static const std::regex kNumber(R"(-?\d+)");
  static const std::regex kRunning(R"(= (-?\d+))");

  std::vector<long long> terms;
  const auto body = request.question.substr(request.question.find("ompute") == std::string::npos
                                                ? 0
                                                : request.question.find("ompute"));
  for (auto it = std::sregex_iterator(body.begin(), body.end(), kNumber); it != std::sregex_iterator(); ++it)
    terms.push_back(std::stoll(it->str()));
  if (terms.size() < 2) throw search::SearchError("arithmetic policy cannot parse question: " + request.question);

  long long total = terms.front();
  if (!request.steps_so_far.empty()) {
    const auto& last = request.steps_so_far.back();
    std::smatch m;
    std::string tail = last;
    long long found = total;
    bool any = false;
    while (std::regex_search(tail, m, kRunning)) {
      found = std::stoll(m[1].str());
      any = true;
      tail = m.suffix();
    }
    if (any) total = found;
  }
  const std::size_t next = request.steps_so_far.size() + 1;
  if (next >= terms.size()) {
    return std::vector<std::string>(request.n, "The answer is \\boxed{" + std::to_string(total) + "}.");
  }

  std::string context = request.question;
  for (const auto& s : request.steps_so_far) context += "\n" + s;
  const std::string key_base = to_hex(fnv1a64(context)) + "#" + std::to_string(request.seed);

  const long long term = terms[next];
  const bool terminal = next + 1 == terms.size();
  std::vector<bool> wrong(request.n);
  for (std::size_t j = 0; j < request.n; ++j)
    wrong[j] = keyed_uniform(seed_, key_base + "#" + std::to_string(j)) < error_rate_;
  if (request.n >= 2 && std::all_of(wrong.begin(), wrong.end(), [](bool w) { return w; })) wrong.back() = false;

  std::vector<std::string> out;
  out.reserve(request.n);
  for (std::size_t j = 0; j < request.n; ++j) {
    const long long delta =
        wrong[j] ? 1 + static_cast<long long>(keyed_uniform(seed_, key_base + "#d" + std::to_string(j)) * 3) : 0;
    const long long sum = total + term + delta;
    const std::string a = std::to_string(total), b = std::to_string(term), s = std::to_string(sum);
    std::string text;
    switch (j % 3) {
      case 0: text = "Add " + b + ": " + a + " + " + b + " = " + s + "."; break;
      case 1: text = "Next, " + a + " + " + b + " = " + s + "."; break;
      default: text = "Adding " + b + " to the running total gives " + a + " + " + b + " = " + s + "."; break;
    }
    if (terminal) text += " The answer is \\boxed{" + s + "}.";
    if (wrong[j]) text += " [ERRMATH]";
    out.push_back(std::move(text));
  }
  return out;
}

std::string judge_response(int a, int b, int c, const std::string& reasoning) {
  return "Reasoning:\n" + reasoning + "\n\nFinal answers:\nScore A:\n" + std::to_string(a) + "\nScore B:\n" +
         std::to_string(b) + "\nScore C:\n" + std::to_string(c) + "\n";
}

CorpusFixture make_corpus_fixture(const CorpusFixtureSpec& spec) {
  CorpusFixture f;
  auto make = [&](GoldKind kind, std::size_t count, std::vector<dataset::RawTrace>& traces) {
    for (std::size_t i = 0; i < count; ++i) {
      Draw d(spec.seed, std::string(to_string(kind)) + "/" + std::to_string(i));
      dataset::RawTrace t;
      t.trace_ref = std::string(kind == GoldKind::Prm800k ? "prm-" : "mc-") + std::to_string(i + 1);
      t.question = "Fixture question " + std::to_string(i + 1);
      for (std::size_t s = 1; s <= spec.steps_per_trace; ++s) {
        dataset::RawStepRecord r;
        r.trace_ref = t.trace_ref;
        r.step_index = s;
        r.step_text = "Fixture step " + std::to_string(s) + " of " + t.trace_ref;
        const double u = d.uniform();
        if (kind == GoldKind::Prm800k)
          r.gold = GoldSourceLabel::prm800k(u < 0.5 ? 1 : (u < 0.75 ? 0 : -1));
        else
          r.gold = GoldSourceLabel::mistral_mc(u < 0.6 ? McLabel::Plus : McLabel::Minus);
        const bool needs_verdict = kind == GoldKind::MistralMc || *r.gold.prm800k_label == -1;
        if (needs_verdict && d.uniform() >= spec.missing_verdict_rate) {
          const std::size_t pattern = d.below(8);
          const int a = (pattern >> 2) & 1, b = (pattern >> 1) & 1, c = pattern & 1;
          f.verdict_lines.push_back({{"prompt_id", dataset::prompt_id(kind, t.trace_ref, s)},
                                     {"response", judge_response(a, b, c)}});
        }
        t.steps.push_back(std::move(r));
      }
      traces.push_back(std::move(t));
    }
  };
  make(GoldKind::Prm800k, spec.prm800k_traces, f.prm800k);
  make(GoldKind::MistralMc, spec.mistral_traces, f.mistral);
  return f;
}

}  // namespace hprm::synthetic
