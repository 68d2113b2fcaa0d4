#!/usr/bin/env python3
# Pack examples into token-budgeted instances and inspect the loss spans:
# the only characters a trainer should compute loss on are the output
# texts, recoverable exactly from the span offsets.

from icldata.corpus import CorpusSampleConfig, Document, segment, windows
from icldata.packer import TokenBudget, count_tokens, pack, subsample
from icldata.seeding import derive_rng
from icldata.taskgen import build_nsg
from icldata.toytext import document_text

cfg = CorpusSampleConfig(docs_per_domain={"demo": 100})
examples = []
for i in range(40):
    text = document_text("farm", 9, derive_rng("pack-demo", i))
    doc = Document(id=f"demo/d#{i}", domain="demo", sentences=tuple(segment(text)))
    examples.extend(build_nsg(w, derive_rng("pack-demo", "nsg", i)) for w in windows(doc, cfg))

budget = TokenBudget(max_tokens=120, counter="whitespace")
log = []
instances = pack(examples, budget, derive_rng("pack-demo", "rng"), log=log)
print(f"packed {len(examples)} examples into {len(instances)} instances (budget 120 words)")

inst = instances[0]
print(f"\nfirst instance: {inst.example_count} examples, {count_tokens(inst.text)} tokens")
print(inst.text[:300], "...")
print("\nloss spans decode to the output texts:")
for start, end in inst.spans:
    print(f"  [{start:4d}:{end:4d}] {inst.text[start:end]!r}")

# The decision log explains why each instance closed: the next drawn
# example would have overflowed the budget (or the pool ran out).
overflow = [e for e in log if e.next_candidate is not None]
print(f"\n{len(overflow)}/{len(log)} instances closed by overflow, rest by pool exhaustion")

# Data-ratio ablations draw a deterministic subsample (or oversample).
for ratio in (0.5, 2.0):
    resampled = subsample(instances, ratio, derive_rng("pack-demo", "ratio", ratio))
    print(f"ratio {ratio}: {len(instances)} -> {len(resampled)} instances")
