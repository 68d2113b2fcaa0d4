#!/usr/bin/env python3
# Build one example of each self-supervised task from the same window and
# show the rendered Input:/Output: form that ends up in training data.

from icldata.corpus import CorpusSampleConfig, Document, segment, windows
from icldata.seeding import derive_rng
from icldata.taskgen import (
    FUNCTION_WORDS,
    WindowSampler,
    build_cl,
    build_dae,
    build_gsg,
    build_lpp_cls,
    build_lpp_gen,
    build_mwp,
    build_nsg,
    build_phrase_bank,
    render_example,
)
from icldata.toytext import document_text

cfg = CorpusSampleConfig(docs_per_domain={"demo": 10})

# Two small documents on different topics; the second supplies "foreign"
# sentences for the classification task and negatives for LPP.
doc_a = Document(id="demo/a#0", domain="demo",
                 sentences=tuple(segment(document_text("river", 9, derive_rng("demo", 1)))))
doc_b = Document(id="demo/b#0", domain="demo",
                 sentences=tuple(segment(document_text("desert", 9, derive_rng("demo", 2)))))
windows_a = list(windows(doc_a, cfg))
windows_b = list(windows(doc_b, cfg))
window = windows_a[0]

print("== source window ==")
for s in window.sentences:
    print("  ", s.text)

bank = build_phrase_bank(windows_a + windows_b)
sampler = WindowSampler(windows_a + windows_b)


def show(title, example):
    print(f"\n== {title} ==")
    print(render_example(example))


show("next sentence generation", build_nsg(window, derive_rng("d", 0)))
show("masked word prediction", build_mwp(window, derive_rng("d", 1)))
show("last phrase prediction (generative)",
     build_lpp_gen(window, FUNCTION_WORDS, derive_rng("d", 2)))
show("last phrase prediction (classification)",
     build_lpp_cls(window, FUNCTION_WORDS, bank, derive_rng("d", 3)))

print("\n== classification over input provenance (one group) ==")
for example in build_cl(window, sampler, derive_rng("d", 4)):
    print(f"-- type {example.meta['kind']}, label map {example.meta['label_map']}")
    print(render_example(example))

show("denoising autoencoding", build_dae(window, derive_rng("d", 5)))
show("gap sentence generation", build_gsg(window, derive_rng("d", 6)))
