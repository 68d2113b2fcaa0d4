#!/usr/bin/env python3
# Render downstream prompts in both template styles, then rank candidate
# completions by per-token NLL under the built-in n-gram scorer.

from icldata.evaluator import rank_classify, rouge_l_score
from icldata.refscorer import NgramScorer, fit
from icldata.seeding import derive_rng
from icldata.templates import assemble_prompt, default_templates, render, render_full

templates = default_templates()
fields = {
    "Context": "The harbor stayed calm through the night.",
    "Question": "Was the harbor calm?",
    "Answer": "it was calm",
}

print("== the same item in both template styles ==")
for style in ("ours", "gpt3"):
    tpl = templates[("boolq", style)]
    prefix, scored = render({**fields, tpl.candidate_field: tpl.candidates[0]}, tpl)
    print(f"-- {style}: prefix={prefix!r} scored={scored!r}")

# Few-shot prompts: demonstrations drawn without replacement under a seed,
# the test example always last.
tpl = templates[("boolq", "ours")]
demos = [
    render_full({"Context": f"Fact {i} held firm.", "Question": "Did it hold?",
                 tpl.candidate_field: ("True", "False")[i % 2]}, tpl)
    for i in range(8)
]
prefix, _ = render({**fields, tpl.candidate_field: ""}, tpl)
item = assemble_prompt(demos, prefix, shots=2, rng=derive_rng("demo-prompt"),
                       candidates=["True", "False"], gold=0)
print("\n== a 2-shot prompt ==")
print(item.prompt_prefix)

# Rank the candidates with an n-gram model fitted on a skewed corpus: text
# that answers "True" far more often makes "True" the argmin-NLL choice.
model = fit(["Output: True"] * 8 + ["Output: False"] * 2, order=2)
choice = rank_classify(item, NgramScorer(model))
print("\nchosen candidate:", item.candidates[choice])

# Generation quality is scored by LCS-based ROUGE-L.
print("rouge-l('the cat sat on the mat', 'the cat is on the mat') =",
      round(rouge_l_score("the cat sat on the mat", "the cat is on the mat"), 4))
