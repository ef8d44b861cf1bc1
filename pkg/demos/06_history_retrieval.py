# Finding the earlier scene that explains a callback.
#
# Annotators sometimes need an earlier scene to justify a guess ("she is
# the one who lost the ring in episode 2"). retrieve_history ranks the
# scenes preceding a query scene by lexical similarity, BM25 by default.

from tvsg.anonymize import MaskedInstanceSet, MaskedLine
from tvsg.retrieval import BM25, TFIDF, recall_at_k, retrieve_history, scene_text


def scene(idx, *texts):
    lines = [MaskedLine(kind="dialogue", text=t, speaker_id="P0") for t in texts]
    return MaskedInstanceSet(show="demo", episode_id="e0", scene_index=idx,
                             lines=lines, candidates=("a",), gold={"P0": "a"},
                             rng_seed=0)


corpus = [
    scene(0, "morning everyone", "coffee is ready"),
    scene(1, "I lost the ring", "the ring from my grandmother"),
    scene(2, "lovely weather today", "indeed it is"),
    scene(3, "has anyone seen my keys", "check the couch"),
    scene(4, "the wedding is tomorrow", "did you ever find that ring"),
]
query = corpus[4]
print("query:", scene_text(query))

# Only scenes BEFORE the query are candidates; the ranker never peeks ahead.
for ref, score in retrieve_history(query, corpus, k=3, scorer=BM25):
    print(f"  scene {ref[2]}  bm25={score:.3f}  | {scene_text(corpus[ref[2]])}")

print()
for ref, score in retrieve_history(query, corpus, k=3, scorer=TFIDF):
    print(f"  scene {ref[2]}  tfidf={score:.3f} | {scene_text(corpus[ref[2]])}")

# With relevance judgments, recall@k measures how often the needed scene
# appears in the top k.
qref = ("demo", "e0", 4)
results = {qref: [r for r, _ in retrieve_history(query, corpus, k=3)]}
relevance = {qref: [("demo", "e0", 1)]}
print(f"\nrecall@3 = {recall_at_k(results, relevance, 3):.1f}")
