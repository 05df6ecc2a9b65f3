// Writes synthetic fixtures: marked benchmark traces, arithmetic problems and
// raw corpus inputs with judge responses.

#include <CLI11.hpp>

#include <iostream>

#include "hprm/dataset.hpp"
#include "hprm/errors.hpp"
#include "hprm/jsonl.hpp"
#include "hprm/synthetic.hpp"

using namespace hprm;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic fixture generator", "hprm_synth"};
  app.require_subcommand(1);

  synthetic::BenchmarkSpec bench;
  std::string bench_out, bench_format = "processbench";
  auto* b = app.add_subcommand("bench", "Marked traces for eval-processbench / eval-prmbench / score");
  b->add_option("--traces", bench.traces);
  b->add_option("--seed", bench.seed);
  b->add_option("--min-steps", bench.min_steps);
  b->add_option("--max-steps", bench.max_steps);
  b->add_option("--format", bench_format)->check(CLI::IsMember({"processbench", "prmbench", "traces"}));
  b->add_option("--out", bench_out)->required();

  synthetic::ProblemSpec problems;
  std::string problems_out;
  auto* p = app.add_subcommand("problems", "Arithmetic problems for search");
  p->add_option("--problems", problems.problems);
  p->add_option("--seed", problems.seed);
  p->add_option("--out", problems_out)->required();

  synthetic::CorpusFixtureSpec corpus;
  std::string prm_out, mc_out, verdicts_out;
  auto* c = app.add_subcommand("corpus", "Raw PRM800K/MC step records with judge responses");
  c->add_option("--prm800k-traces", corpus.prm800k_traces);
  c->add_option("--mistral-traces", corpus.mistral_traces);
  c->add_option("--steps", corpus.steps_per_trace);
  c->add_option("--seed", corpus.seed);
  c->add_option("--missing-verdict-rate", corpus.missing_verdict_rate);
  c->add_option("--prm800k-out", prm_out)->required();
  c->add_option("--mistral-out", mc_out)->required();
  c->add_option("--verdicts-out", verdicts_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (b->parsed()) {
      const auto traces = synthetic::make_benchmark(bench);
      std::vector<json> lines;
      if (bench_format == "processbench")
        for (const auto& c : synthetic::first_error_cases(traces)) lines.push_back(eval::to_json(c));
      else if (bench_format == "prmbench")
        for (const auto& c : synthetic::step_judgment_cases(traces)) lines.push_back(eval::to_json(c));
      else
        for (const auto& m : traces) lines.push_back(m.trace);
      io::write_jsonl(bench_out, lines);
    } else if (p->parsed()) {
      std::vector<json> lines;
      for (const auto& pr : synthetic::make_problems(problems))
        lines.push_back({{"id", pr.id}, {"question", pr.question}, {"gold_answer", pr.gold_answer}});
      io::write_jsonl(problems_out, lines);
    } else if (c->parsed()) {
      const auto f = synthetic::make_corpus_fixture(corpus);
      std::vector<json> prm, mc;
      for (const auto& t : f.prm800k) prm.push_back(dataset::to_json_record(t));
      for (const auto& t : f.mistral) mc.push_back(dataset::to_json_record(t));
      io::write_jsonl(prm_out, prm);
      io::write_jsonl(mc_out, mc);
      io::write_jsonl(verdicts_out, f.verdict_lines);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(e.category());
  }
  return 0;
}
