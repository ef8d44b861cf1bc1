# Corpus statistics and train/dev/test splitting.
#
# Works on a synthetic show so the numbers are reproducible anywhere.

import json

from tvsg.dataset import SplitSpec, compute_stats, split_corpus
from tvsg.synth import SynthConfig, generate_corpus

corpus = generate_corpus(SynthConfig(show="demo", chars=4, scenes=40, seed=11))
print(f"{len(corpus)} masked scenes, "
      f"{sum(len(i.gold) for i in corpus)} guessing instances")

# Token statistics per show. Every line counts as one utterance, so the
# scene totals are exactly the sum over the scene's lines.
stats = compute_stats(corpus).to_dict()
print(json.dumps(stats["shows"]["demo"], indent=2)[:400], "...")

# Chronological splitting keeps episode order: early scenes train, late
# scenes test. That mirrors how one would deploy on an ongoing show.
splits = split_corpus(corpus, SplitSpec(ratios=(0.8, 0.1, 0.1)))
for name, part in splits.items():
    span = (part[0].scene_index, part[-1].scene_index) if part else ()
    print(f"{name}: {len(part)} scenes, scene_index range {span}")

# A seeded random split is also available when chronology does not matter.
shuffled = split_corpus(
    corpus, SplitSpec(ratios=(0.8, 0.1, 0.1), policy="seeded_random", seed=4)
)
print("random dev indices:", sorted(s.scene_index for s in shuffled["dev"]))

named = compute_stats({k: v for k, v in splits.items()}).to_dict()
print("scenes per split:", named["shows"]["demo"]["scenes"])
