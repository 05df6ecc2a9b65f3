// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "hprm/dataset.hpp"
#include "hprm/errors.hpp"
#include "hprm/evaluator.hpp"
#include "hprm/hashing.hpp"
#include "hprm/jsonl.hpp"
#include "hprm/mock_backend.hpp"
#include "hprm/scorer.hpp"
#include "hprm/search.hpp"
#include "hprm/synthetic.hpp"

using namespace hprm;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

int failures = 0;

void report(const char* name, const Check& c, const std::string& summary) {
  std::printf("%s  %-24s %s\n", c.ok ? "PASS" : "FAIL", name, c.ok ? summary.c_str() : c.detail.c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << std::fixed << v;
  return s.str();
}

// ---------------------------------------------------------------- labels

void label_rules() {
  Check c;
  using dataset::JudgeVerdict;
  // Keep masks over verdicts (a,b,c) enumerated as a*4 + b*2 + c.
  const std::string plus_keep = "00000001";
  const std::string minus_keep = "11111110";
  const std::string prm_neg_keep = "11111110";
  std::size_t cases = 0;

  for (int code = 0; code < 8; ++code) {
    const JudgeVerdict v{code >> 2 & 1, code >> 1 & 1, code & 1, ""};
    const StepLabelVector vec{v.score_a, v.score_b, v.score_c};

    for (auto [mc, keep] : {std::pair{McLabel::Plus, plus_keep}, std::pair{McLabel::Minus, minus_keep}}) {
      const auto r = dataset::filter_mc(mc, v);
      const bool kept = std::holds_alternative<StepLabelVector>(r);
      c.expect(kept == (keep[code] == '1'), "filter_mc disagrees on verdict " + std::to_string(code));
      if (kept) c.expect(std::get<StepLabelVector>(r) == vec, "filter_mc altered labels");
      c.expect(validate_label_vector(vec, GoldSourceLabel::mistral_mc(mc)) == (keep[code] == '1'),
               "validate_label_vector disagrees for MC verdict " + std::to_string(code));
      ++cases;
    }

    const auto r = dataset::filter_judged_prm800k(-1, v);
    const bool kept = std::holds_alternative<StepLabelVector>(r);
    c.expect(kept == (prm_neg_keep[code] == '1'), "filter_judged_prm800k disagrees on verdict " + std::to_string(code));
    if (!kept)
      c.expect(std::get<dataset::Rejected>(r).rule == dataset::kRulePrm800kJudgedAllOnes, "wrong rejection rule");
    c.expect(validate_label_vector(vec, GoldSourceLabel::prm800k(-1)) == (prm_neg_keep[code] == '1'),
             "validate_label_vector disagrees for l=-1");
    c.expect(std::holds_alternative<dataset::NeedsJudge>(dataset::map_prm800k(-1)), "l=-1 must need a judge");
    ++cases;
  }

  const std::pair<int, StepLabelVector> direct[] = {{1, {1, 1, 1}}, {0, {1, 1, 0}}};
  for (const auto& [l, expected] : direct) {
    const auto r = dataset::map_prm800k(l);
    c.expect(std::holds_alternative<StepLabelVector>(r) && std::get<StepLabelVector>(r) == expected,
             "map_prm800k(" + std::to_string(l) + ")");
    for (int code = 0; code < 8; ++code) {
      const StepLabelVector v{code >> 2 & 1, code >> 1 & 1, code & 1};
      c.expect(validate_label_vector(v, GoldSourceLabel::prm800k(l)) == (v == expected),
               "validate_label_vector for l=" + std::to_string(l));
    }
    ++cases;
  }
  bool threw = false;
  try {
    dataset::map_prm800k(2);
  } catch (const ValidationError&) {
    threw = true;
  }
  c.expect(threw, "map_prm800k(2) must be rejected");
  report("label-rules", c, std::to_string(cases) + " cases match the rule table");
}

// ---------------------------------------------------------------- corpus

void corpus_audit() {
  Check c;
  const auto fixture = synthetic::make_corpus_fixture({1000, 1000, 5, 11, 0.02});
  dataset::VerdictStore store;
  for (const auto& v : fixture.verdict_lines)
    store.add_response(v.at("prompt_id").get<std::string>(), v.at("response").get<std::string>());

  const auto t0 = Clock::now();
  const auto result = dataset::build_corpus(fixture.prm800k, fixture.mistral, store, {});
  const double elapsed = seconds_since(t0);

  const std::size_t violations = dataset::count_label_violations(result.records);
  std::size_t independent = 0;
  for (const auto& r : result.records) {
    const auto& v = r.labels;
    const bool ones = v.math == 1 && v.consistency == 1 && v.correctness == 1;
    bool ok = v.is_binary();
    if (r.gold.kind == GoldKind::Prm800k) {
      const int l = *r.gold.prm800k_label;
      ok = ok && (l == 1 ? ones : l == 0 ? (v == StepLabelVector{1, 1, 0}) : !ones);
    } else {
      ok = ok && (*r.gold.mc_label == McLabel::Plus ? ones : !ones);
    }
    independent += !ok;
  }
  c.expect(violations == 0, std::to_string(violations) + " records violate their gold label");
  c.expect(independent == 0, std::to_string(independent) + " records fail the independent label check");

  const auto& s = result.stats;
  const std::size_t total = s.prm800k.total + s.mistral.total;
  c.expect(total == 10000, "fixture should hold 10000 steps, got " + std::to_string(total));
  for (const auto* src : {&s.prm800k, &s.mistral})
    c.expect(src->kept + src->rejected() + src->unresolved == src->total, "kept+rejected+unresolved != total");
  c.expect(result.records.size() + result.audit.size() == total, "records + audit entries != input count");
  c.expect(elapsed < 1.0, "build took " + fmt(elapsed, 3) + "s");
  report("corpus-audit", c,
         std::to_string(total) + " steps, " + std::to_string(result.records.size()) + " kept, 0 violations, " +
             fmt(elapsed, 3) + "s");
}

// ---------------------------------------------------------------- two-pass

// Pass 1 draws tie-prone distributions per step; pass 2 rewards depend on
// the filled labels so any leak between the passes would show up.
class TieBackend : public scorer::ScorerBackend {
 public:
  scorer::MaskDistribution evaluate(const scorer::MaskedQuery& q) override {
    static const double levels[] = {0.5, 0.5, 0.3, 0.7, 0.9};
    scorer::MaskDistribution d;
    const std::string key = q.current_step();
    for (auto s : q.mask_slots) {
      double p = 0.0;
      if (s == scorer::Slot::Correctness) {
        p = 0.1 + 0.4 * to_int(q.filled.at(scorer::Slot::Math)) + 0.3 * to_int(q.filled.at(scorer::Slot::Consistency));
      } else {
        const double u = keyed_uniform(s == scorer::Slot::Math ? 1 : 2, key);
        p = levels[static_cast<std::size_t>(u * 5)];
      }
      d.slots[s] = {p, 1.0 - p};
    }
    return d;
  }
  std::string id() const override { return "tie-backend"; }
};

void two_pass() {
  Check c;
  scorer::MockOracleBackend oracle;
  scorer::CountingBackend counting(oracle);
  const auto bench = synthetic::make_benchmark({50, 3});
  std::size_t steps = 0;
  for (const auto& m : bench) {
    const std::size_t before = counting.calls();
    scorer::score_trace(counting, m.trace);
    steps += m.trace.size();
    c.expect(counting.calls() - before == 2 * m.trace.size(), "call count != 2T for " + m.trace.source_id);
  }
  c.expect(counting.pass1_calls() == steps && counting.pass2_calls() == steps, "pass split is not one each per step");

  TieBackend ties;
  std::mt19937_64 rng(2024);
  std::size_t math_ties = 0, reward_changes = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::string q = "Q" + std::to_string(rng() % 97);
    std::vector<std::string> prefix;
    for (std::size_t k = rng() % 4; k > 0; --k) prefix.push_back("p" + std::to_string(rng() % 1000));
    const std::string step = "step " + std::to_string(i) + "/" + std::to_string(rng());
    scorer::DecodeOptions pos, neg;
    neg.math_tie = scorer::TieBreak::Neg;
    const auto a = scorer::score_step(ties, q, prefix, step, pos);
    const auto b = scorer::score_step(ties, q, prefix, step, neg);
    c.expect(a.consistency_label == b.consistency_label, "C_t changed with the MATH tie-break at query " +
                                                              std::to_string(i));
    math_ties += a.math_label != b.math_label;
    reward_changes += a.reward != b.reward;
  }
  c.expect(math_ties > 0, "no MATH ties were exercised");
  report("two-pass-protocol", c,
         std::to_string(steps) + " steps, 2 calls each; C_t stable over 1000 queries (" + std::to_string(math_ties) +
             " MATH ties, " + std::to_string(reward_changes) + " reward changes)");
}

// ---------------------------------------------------------------- oracle e2e

// Distribution of the number of successes among independent Bernoullis.
std::vector<double> poisson_binomial(const std::vector<double>& p) {
  std::vector<double> dist{1.0};
  for (double q : p) {
    std::vector<double> next(dist.size() + 1, 0.0);
    for (std::size_t k = 0; k < dist.size(); ++k) {
      next[k] += dist[k] * (1 - q);
      next[k + 1] += dist[k] * q;
    }
    dist = std::move(next);
  }
  return dist;
}

double harmonic(double a, double b) { return a + b == 0 ? 0.0 : 2 * a * b / (a + b); }

double expected_f1(const std::vector<double>& p_err, const std::vector<double>& p_ok) {
  const auto de = poisson_binomial(p_err), dc = poisson_binomial(p_ok);
  double e = 0;
  for (std::size_t x = 0; x < de.size(); ++x)
    for (std::size_t y = 0; y < dc.size(); ++y)
      e += de[x] * dc[y] * harmonic(double(x) / double(p_err.size()), double(y) / double(p_ok.size()));
  return e;
}

double f1_counts(double tp, double fp, double fn) { return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn); }

// Exact expectation when every step flips independently with probability r.
double expected_prmscore(std::size_t n_err, std::size_t n_ok, double r) {
  const auto de = poisson_binomial(std::vector<double>(n_err, r));
  const auto dc = poisson_binomial(std::vector<double>(n_ok, r));
  double e = 0;
  for (std::size_t a = 0; a <= n_err; ++a)
    for (std::size_t b = 0; b <= n_ok; ++b) {
      const double tp = double(n_err - a), fn = double(a), fp = double(b), tn = double(n_ok - b);
      e += de[a] * dc[b] * 50.0 * (f1_counts(tp, fp, fn) + f1_counts(tn, fn, fp));
    }
  return e;
}

struct ClosedForm {
  std::vector<double> p_err, p_ok;  // P(first error predicted exactly) per case
  std::size_t n_err_steps = 0, n_ok_steps = 0;
};

ClosedForm closed_form(const std::vector<synthetic::MarkedTrace>& traces, double r) {
  ClosedForm f;
  for (const auto& m : traces) {
    if (m.first_error)
      f.p_err.push_back(std::pow(1 - r, double(*m.first_error)));
    else
      f.p_ok.push_back(std::pow(1 - r, double(m.trace.size())));
    for (int g : m.gold_labels) (g ? f.n_ok_steps : f.n_err_steps)++;
  }
  return f;
}

// Enumerates every flip pattern of every trace, applying the flips to the
// noise-free oracle rewards and predicting with the library, then combines
// traces exactly (they flip independently).
struct Enumerated {
  double f1 = 0, prmscore = 0;
};

Enumerated enumerate_flips(const std::vector<synthetic::MarkedTrace>& traces, double r) {
  scorer::MockOracleBackend oracle;
  std::vector<double> p_err, p_ok;
  // joint[a][b]: P(a gold-erroneous and b gold-correct steps predicted wrongly)
  std::vector<std::vector<double>> joint{{1.0}};
  std::size_t n_err = 0, n_ok = 0;
  for (const auto& m : traces) {
    const auto clean = scorer::score_trace_serial(oracle, m.trace);
    const std::size_t T = clean.size();
    std::size_t te = 0;
    for (int g : m.gold_labels) te += g == 0;
    std::vector<std::vector<double>> local(te + 1, std::vector<double>(T - te + 1, 0.0));
    double exact = 0;
    for (std::uint32_t mask = 0; mask < (1u << T); ++mask) {
      auto scores = clean;
      double w = 1;
      for (std::size_t t = 0; t < T; ++t) {
        const bool flip = mask >> t & 1;
        w *= flip ? r : 1 - r;
        if (flip) scores[t].reward = 1.0 - scores[t].reward;
      }
      exact += w * (eval::predict_first_error(scores) == m.first_error);
      const auto pred = eval::predict_step_errors(scores);
      std::size_t a = 0, b = 0;
      for (std::size_t t = 0; t < T; ++t) {
        if (m.gold_labels[t] == 0 && !pred[t]) ++a;
        if (m.gold_labels[t] == 1 && pred[t]) ++b;
      }
      local[a][b] += w;
    }
    (m.first_error ? p_err : p_ok).push_back(exact);
    std::vector<std::vector<double>> next(n_err + te + 1, std::vector<double>(n_ok + T - te + 1, 0.0));
    for (std::size_t a = 0; a <= n_err; ++a)
      for (std::size_t b = 0; b <= n_ok; ++b)
        for (std::size_t x = 0; x <= te; ++x)
          for (std::size_t y = 0; y <= T - te; ++y) next[a + x][b + y] += joint[a][b] * local[x][y];
    joint = std::move(next);
    n_err += te;
    n_ok += T - te;
  }
  Enumerated e;
  e.f1 = expected_f1(p_err, p_ok);
  for (std::size_t a = 0; a <= n_err; ++a)
    for (std::size_t b = 0; b <= n_ok; ++b) {
      const double tp = double(n_err - a), fn = double(a), fp = double(b), tn = double(n_ok - b);
      e.prmscore += joint[a][b] * 50.0 * (f1_counts(tp, fp, fn) + f1_counts(tn, fn, fp));
    }
  return e;
}

struct Observed {
  double f1 = 0, prmscore = 0;
};

Observed run_benchmark(const std::vector<synthetic::MarkedTrace>& bench, scorer::ScorerBackend& backend) {
  std::vector<ReasoningTrace> traces;
  for (const auto& m : bench) traces.push_back(m.trace);
  const auto scores = scorer::score_traces(backend, traces);
  std::vector<eval::FirstError> fe;
  std::vector<std::vector<bool>> steps;
  for (const auto& s : scores) {
    fe.push_back(eval::predict_first_error(s));
    steps.push_back(eval::predict_step_errors(s));
  }
  const auto fe_cases = synthetic::first_error_cases(bench);
  const auto sj_cases = synthetic::step_judgment_cases(bench);
  return {eval::processbench_f1(fe_cases, fe).f1, eval::prmscore(sj_cases, steps).prmscore};
}

void oracle_end_to_end() {
  Check c;
  constexpr double r = 0.1;
  const auto bench = synthetic::make_benchmark({200, 0});
  std::size_t marked = 0;
  for (const auto& m : bench) marked += m.first_error.has_value();
  c.expect(marked > 0 && marked < bench.size(), "benchmark must mix erroneous and correct traces");

  scorer::MockOracleBackend oracle;
  const auto clean = run_benchmark(bench, oracle);
  c.expect(clean.f1 == 1.0, "noise-free f1 = " + fmt(clean.f1, 6));
  c.expect(clean.prmscore == 100.0, "noise-free prmscore = " + fmt(clean.prmscore, 6));

  const std::vector<synthetic::MarkedTrace> subset(bench.begin(), bench.begin() + 20);
  const auto cf_sub = closed_form(subset, r);
  const auto brute = enumerate_flips(subset, r);
  const double cf_f1 = expected_f1(cf_sub.p_err, cf_sub.p_ok);
  const double cf_prm = expected_prmscore(cf_sub.n_err_steps, cf_sub.n_ok_steps, r);
  c.expect(std::abs(cf_f1 - brute.f1) < 1e-12, "closed-form f1 " + fmt(cf_f1, 9) + " != enumerated " + fmt(brute.f1, 9));
  c.expect(std::abs(cf_prm - brute.prmscore) < 1e-9,
           "closed-form prmscore " + fmt(cf_prm, 9) + " != enumerated " + fmt(brute.prmscore, 9));

  const auto cf = closed_form(bench, r);
  const double e_f1 = 100.0 * expected_f1(cf.p_err, cf.p_ok);
  const double e_prm = expected_prmscore(cf.n_err_steps, cf.n_ok_steps, r);

  constexpr int kSeeds = 64;
  double sum_f1 = 0, sum_prm = 0, seed0_f1 = 0, seed0_prm = 0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    scorer::MockConfig cfg;
    cfg.noise_rate = r;
    cfg.noise_seed = static_cast<std::uint64_t>(seed);
    scorer::MockOracleBackend noisy(cfg);
    const auto o = run_benchmark(bench, noisy);
    sum_f1 += 100.0 * o.f1;
    sum_prm += o.prmscore;
    if (seed == 0) {
      seed0_f1 = 100.0 * o.f1;
      seed0_prm = o.prmscore;
    }
  }
  const double m_f1 = sum_f1 / kSeeds, m_prm = sum_prm / kSeeds;
  c.expect(std::abs(m_f1 - e_f1) <= 2.0, "noisy f1 " + fmt(m_f1, 2) + " vs expected " + fmt(e_f1, 2));
  c.expect(std::abs(m_prm - e_prm) <= 2.0, "noisy prmscore " + fmt(m_prm, 2) + " vs expected " + fmt(e_prm, 2));
  report("oracle-end-to-end", c,
         "f1=1 prmscore=100; noise 0.1 over " + std::to_string(kSeeds) + " seeds: f1 " + fmt(m_f1, 2) + " (exp " +
             fmt(e_f1, 2) + ", seed0 " + fmt(seed0_f1, 2) + "), prmscore " + fmt(m_prm, 2) + " (exp " + fmt(e_prm, 2) +
             ", seed0 " + fmt(seed0_prm, 2) + ")");
}

// ---------------------------------------------------------------- metrics

void metric_oracles() {
  Check c;
  std::mt19937_64 rng(99);
  double worst = 0;
  for (int set = 0; set < 100; ++set) {
    // ProcessBench-style cases.
    std::vector<eval::FirstErrorCase> fe_cases;
    std::vector<eval::FirstError> fe_pred;
    const std::size_t n = 5 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t T = 1 + rng() % 6;
      ReasoningTrace tr{"Q", std::vector<std::string>(T, "s"), std::nullopt, ""};
      const eval::FirstError gold = i % 2 == 0 ? eval::FirstError{1 + rng() % T} : eval::kAllCorrect;
      const eval::FirstError pred = rng() % 3 == 0 ? eval::kAllCorrect : eval::FirstError{1 + rng() % T};
      fe_cases.push_back({"c", tr, gold});
      fe_pred.push_back(rng() % 2 ? gold : pred);
    }
    double hit_e = 0, tot_e = 0, hit_c = 0, tot_c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool erroneous = fe_cases[i].gold_first_error.has_value();
      (erroneous ? tot_e : tot_c) += 1;
      (erroneous ? hit_e : hit_c) += fe_pred[i] == fe_cases[i].gold_first_error;
    }
    const double ae = hit_e / tot_e, ac = hit_c / tot_c;
    const double f1_ref = (ae == 0 || ac == 0) ? 0.0 : 1.0 / ((1.0 / ae + 1.0 / ac) / 2.0);
    const double f1 = eval::processbench_f1(fe_cases, fe_pred).f1;
    worst = std::max(worst, std::abs(f1 - f1_ref));
    c.expect(std::abs(f1 - f1_ref) <= 1e-9, "processbench f1 mismatch on set " + std::to_string(set));

    // Step-judgment cases; precision/recall form as the reference.
    std::vector<eval::StepJudgmentCase> sj;
    std::vector<std::vector<bool>> pred;
    std::vector<int> flat_gold;
    std::vector<bool> flat_pred;
    const std::size_t m = 3 + rng() % 30;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t T = 1 + rng() % 6;
      std::vector<int> g(T);
      std::vector<bool> p(T);
      for (std::size_t t = 0; t < T; ++t) {
        g[t] = rng() % 3 != 0;
        p[t] = rng() % 2 == 0;
        flat_gold.push_back(g[t]);
        flat_pred.push_back(p[t]);
      }
      sj.push_back({"c", ReasoningTrace{"Q", std::vector<std::string>(T, "s"), std::nullopt, ""}, g, "NR"});
      pred.push_back(p);
    }
    auto class_f1 = [&](bool error_class) -> std::optional<double> {
      double tp = 0, pred_pos = 0, gold_pos = 0;
      for (std::size_t i = 0; i < flat_gold.size(); ++i) {
        const bool gold_is = (flat_gold[i] == 0) == error_class;
        const bool pred_is = flat_pred[i] == error_class;
        gold_pos += gold_is;
        pred_pos += pred_is;
        tp += gold_is && pred_is;
      }
      if (gold_pos == 0) return std::nullopt;
      if (tp == 0) return 0.0;
      const double precision = tp / pred_pos, recall = tp / gold_pos;
      return 2 * precision * recall / (precision + recall);
    };
    const auto fe_ref = class_f1(true), fc_ref = class_f1(false);
    double ref = 0;
    if (fe_ref && fc_ref)
      ref = 50.0 * (*fe_ref + *fc_ref);
    else
      ref = 100.0 * (fe_ref ? *fe_ref : *fc_ref);
    const double got = eval::prmscore(sj, pred).prmscore;
    worst = std::max(worst, std::abs(got - ref) / 100.0);
    c.expect(std::abs(got - ref) <= 1e-9 * 100.0, "prmscore mismatch on set " + std::to_string(set));
  }
  report("metric-oracles", c, "100 random sets, max deviation " + [&] {
    std::ostringstream s;
    s << worst;
    return s.str();
  }());
}

// ---------------------------------------------------------------- search

void guided_search() {
  Check c;
  const auto t0 = Clock::now();
  const synthetic::ProblemSpec spec{200, 0, 3, 5};
  const auto problems = synthetic::make_problems(spec);
  scorer::MockOracleBackend oracle;
  search::SearchConfig cfg;
  cfg.k = 8;
  cfg.seed = 0;
  synthetic::ArithmeticPolicy adversarial(0.5, cfg.seed);
  const auto result = search::run_search_benchmark(problems, adversarial, oracle, cfg);
  const auto& s = result.summary;

  // Every guided expansion offered at least one clean candidate.
  for (const auto& o : result.outcomes)
    for (const auto& e : o.transcript.expansions) {
      bool clean = false;
      for (const auto& cand : e.candidates) clean = clean || cand.find("[ERRMATH]") == std::string::npos;
      c.expect(clean, "expansion without a clean candidate in " + o.id);
    }

  // Simulation oracle: an unguided sample is right only if every one of its
  // (terms - 1) additions avoids the error, independently with p = 0.5.
  std::mt19937 rng(12345);
  std::uniform_int_distribution<std::size_t> terms_dist(spec.min_terms, spec.max_terms);
  std::bernoulli_distribution wrong(0.5);
  constexpr int kSims = 10000;
  double sim_pass1 = 0;
  for (int i = 0; i < kSims; ++i) {
    const std::size_t terms = terms_dist(rng);
    bool ok = true;
    for (std::size_t t = 1; t < terms; ++t) ok = !wrong(rng) && ok;
    sim_pass1 += ok;
  }
  sim_pass1 /= kSims;
  const double sim_gap = 1.0 - sim_pass1;  // guided search always keeps the clean candidate

  const double gap = s.search_accuracy - s.pass_at_1;
  const double sd = std::sqrt(sim_pass1 * (1 - sim_pass1) / double(problems.size()));
  const double elapsed = seconds_since(t0);

  c.expect(s.search_accuracy >= s.pass_at_1, "prm@8 below pass@1");
  c.expect(gap > 0, "no strict improvement at error rate 0.5");
  c.expect(std::abs(gap - sim_gap) <= 4 * sd + 0.01,
           "gap " + fmt(gap, 3) + " inconsistent with simulated " + fmt(sim_gap, 3));

  search::SearchConfig clean_cfg = cfg;
  synthetic::ArithmeticPolicy benign(0.0, cfg.seed);
  const auto easy = search::run_search_benchmark(problems, benign, oracle, clean_cfg);
  c.expect(easy.summary.search_accuracy >= easy.summary.pass_at_1, "prm@8 below pass@1 at error rate 0");
  c.expect(elapsed < 30.0, "search took " + fmt(elapsed, 1) + "s");
  report("guided-search", c,
         "prm@8 " + fmt(s.search_accuracy, 3) + " vs pass@1 " + fmt(s.pass_at_1, 3) + ", gap " + fmt(gap, 3) +
             " (simulated " + fmt(sim_gap, 3) + "), " + fmt(elapsed, 2) + "s");
}

// ---------------------------------------------------------------- determinism

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

void determinism() {
  Check c;
  const fs::path root = fs::temp_directory_path() / "hprm_acceptance";
  fs::remove_all(root);
  const fs::path in = root / "inputs";
  fs::create_directories(in);

  const auto bench = synthetic::make_benchmark({80, 6});
  std::vector<json> pb, prm, traces;
  for (const auto& x : synthetic::first_error_cases(bench)) pb.push_back(eval::to_json(x));
  for (const auto& x : synthetic::step_judgment_cases(bench)) prm.push_back(eval::to_json(x));
  for (const auto& m : bench) traces.push_back(m.trace);
  std::vector<json> problems;
  for (const auto& p : synthetic::make_problems({20, 6}))
    problems.push_back({{"id", p.id}, {"question", p.question}, {"gold_answer", p.gold_answer}});
  const auto fixture = synthetic::make_corpus_fixture({40, 40, 5, 6, 0.05});
  std::vector<json> a, b;
  for (const auto& t : fixture.prm800k) a.push_back(dataset::to_json_record(t));
  for (const auto& t : fixture.mistral) b.push_back(dataset::to_json_record(t));
  io::write_jsonl(in / "pb.jsonl", pb);
  io::write_jsonl(in / "prm.jsonl", prm);
  io::write_jsonl(in / "traces.jsonl", traces);
  io::write_jsonl(in / "problems.jsonl", problems);
  io::write_jsonl(in / "prm800k.jsonl", a);
  io::write_jsonl(in / "mc.jsonl", b);
  io::write_jsonl(in / "verdicts.jsonl", fixture.verdict_lines);
  const auto I = [&](const char* name) { return (in / name).string(); };

  std::size_t commands = 0;
  for (const char* run : {"a", "b"}) {
    const fs::path out = root / run;
    fs::create_directories(out);
    const auto O = [&](const char* name) { return (out / name).string(); };
    const std::vector<std::vector<std::string>> runs{
        {"build-dataset", "--prm800k", I("prm800k.jsonl"), "--mistral", I("mc.jsonl"), "--verdicts",
         I("verdicts.jsonl"), "--out", O("corpus.jsonl"), "--sample-rate", "0.6", "--seed", "4"},
        {"emit-prompts", "--prm800k", I("prm800k.jsonl"), "--mistral", I("mc.jsonl"), "--out", O("prompts.jsonl")},
        {"score", "--backend", "mock", "--mock-noise", "0.1", "--mock-noise-seed", "3", "--traces",
         I("traces.jsonl"), "--out", O("scores.jsonl")},
        {"eval-processbench", "--backend", "mock", "--mock-noise", "0.1", "--bench", I("pb.jsonl"), "--out",
         O("pb.json")},
        {"eval-prmbench", "--backend", "mock", "--mock-noise", "0.1", "--bench", I("prm.jsonl"), "--out",
         O("prm.json")},
        {"search", "--policy", "mock", "--scorer", "mock", "--problems", I("problems.jsonl"), "--k", "8", "--seed",
         "5", "--out", O("search.jsonl")},
        {"search", "--policy", "mock", "--scorer", "mock", "--problems", I("problems.jsonl"), "--k", "4", "--mode",
         "best-of-n", "--seed", "5", "--out", O("bon.jsonl")},
    };
    for (const auto& args : runs) {
      c.expect(cli(args) == 0, args[0] + " failed in run " + run);
      ++commands;
    }
  }
  // Report over one shared set of inputs, written twice.
  for (const char* dir : {"report_a", "report_b"}) {
    c.expect(cli({"report", "--inputs", (root / "a" / "pb.json").string(), (root / "a" / "prm.json").string(),
                  (root / "a" / "search.summary.json").string(), "--out-dir", (root / dir).string()}) == 0,
             "report failed");
    ++commands;
  }

  std::size_t files = 0;
  auto compare_dirs = [&](const fs::path& x, const fs::path& y) {
    for (const auto& entry : fs::directory_iterator(x)) {
      const auto other = y / entry.path().filename();
      c.expect(fs::exists(other), "missing " + other.string());
      if (!fs::exists(other)) continue;
      c.expect(slurp(entry.path()) == slurp(other), entry.path().filename().string() + " differs between runs");
      const auto text = slurp(entry.path());
      c.expect(text.find("config_hash") != std::string::npos,
               entry.path().filename().string() + " carries no run metadata");
      ++files;
    }
  };
  compare_dirs(root / "a", root / "b");
  compare_dirs(root / "report_a", root / "report_b");
  report("determinism", c,
         std::to_string(commands) + " invocations, " + std::to_string(files) + " output files byte-identical");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> criteria{
      {"label-rules", label_rules},       {"corpus-audit", corpus_audit},     {"two-pass-protocol", two_pass},
      {"oracle-end-to-end", oracle_end_to_end}, {"metric-oracles", metric_oracles}, {"guided-search", guided_search},
      {"determinism", determinism}};
  for (const auto& [name, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      Check c;
      c.expect(false, std::string("threw: ") + e.what());
      report(name, c, "");
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
