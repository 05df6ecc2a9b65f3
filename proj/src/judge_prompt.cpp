#include <string>

#include "hprm/core.hpp"
#include "hprm/dataset.hpp"

namespace hprm::dataset {

namespace {

constexpr std::string_view kContextSlot = "{context}";

constexpr std::string_view kAnnotationPrompt =
    R"(You are an analytical math instructor grading a student's work. Think step-by-step through your analysis. Below is the math question, the previous steps by the student, and the current step to evaluate.

{context}

Your task is to rigorously examine the current step and determine if it contains ANY mathematical errors. Assign binary scores (0 = wrong, 1 = correct) based on three criteria:

A) Mathematical logic — Is the current step, **on its own**, mathematically valid? Check for:
   • Calculation errors
   • Incorrect formula application
   • Invalid operations or simplifications
   • Algebra mistakes or sign errors
   • Incorrect assertions

B) Consistency — Is the current step logically consistent with:
   • Established ground truth
   • Previous steps
   • Any constraints or conditions established earlier
   • The mathematical domain applicable to this problem

C) Simplicity and optimality — is this step an efficient next step toward the solution? Check for:
   • Redundant statements: factually correct statements that do not help progress toward the solution.
   • Circular logic: does this step come to a conclusion already previously established?
   • Non-clarity: Are the assertions made in this step ambiguous in a way that obsfucates their purpose?
   • Optimality: is the **idea** of this step the near optimal approach one would take to solve the problem?


Double check all listed criterion here explicitly in your reasoning. In your analysis, be sensitive to subtle issues like missing pre-requisites/assumptions, correct-looking statements with slight errors and high confidence statements containing errors.

IMPORTANT POINTS:

- If you find ANY error, even a minor one, you MUST assign a score of 0 to the appropriate criteria. Be skeptical and verify all claims thoroughly.

- For incorrect steps, wherever possible, attempt to categorize the issue as violating **one of the three criterion** (i.e., assign score 0 to **only one category**). Assign multiple 0 scores only for serious errors.

You must format your answer as below:

Reasoning:
{{Provide detailed analysis, showing all verification steps and explicitly identifying any errors found}}

Final answers:
Score A:
{{0 or 1 only}}
Score B:
{{0 or 1 only}}
Score C:
{{0 or 1 only}})";

std::string render_context(const ReasoningTrace& trace, std::size_t t) {
  const auto previous = prefix(trace, t);
  std::string out = "### Question\n" + trace.question + "\n\n### Previous steps\n";
  if (previous.empty()) out += "(none)\n";
  for (std::size_t i = 0; i < previous.size(); ++i)
    out += "Step " + std::to_string(i + 1) + ": " + previous[i] + "\n";
  out += "\n### Current step\nStep " + std::to_string(t) + ": " + trace.steps[t - 1];
  return out;
}

}  // namespace

std::string emit_judge_prompt(const ReasoningTrace& trace, std::size_t t) {
  std::string context = render_context(trace, t);
  std::string prompt(kAnnotationPrompt);
  prompt.replace(prompt.find(kContextSlot), kContextSlot.size(), context);
  return prompt;
}

}  // namespace hprm::dataset
