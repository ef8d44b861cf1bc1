# Driving a human-study session end to end.
#
# The study service hands an annotator one (scene, speaker ID) item at a
# time, validates each submitted explanation, and never reveals the gold
# mapping in what it serves. This demo drives the store directly; `tvsg
# serve` exposes the same flow over HTTP for the browser UI.

import json
import tempfile
from pathlib import Path

from tvsg.errors import ValidationFailed
from tvsg.service import ServiceConfig, StudyStore
from tvsg.synth import SynthConfig, generate_corpus

corpus = generate_corpus(SynthConfig(show="demo", chars=3, scenes=4, seed=9))
gold_by_ref = {(i.show, i.episode_id, i.scene_index): i.gold for i in corpus}

with tempfile.TemporaryDirectory() as tmp:
    store = StudyStore(ServiceConfig(corpus=corpus, data_dir=Path(tmp)))

    session = store.create_session(annotator="demo_annotator", seed=1)
    sid = session["session_id"]
    print(f"session {sid[:8]}... with {len(session['queue'])} items\n")

    first = store.next_item(sid)["item"]
    print("an item, exactly what the annotator sees:")
    print(json.dumps(first, indent=2)[:500], "...\n")

    def answer(item, guess, evidence):
        return store.submit_answer(sid, {
            "scene_ref": item["scene_ref"],
            "speaker_id": item["speaker_id"],
            "annotator_id": "demo_annotator",
            "guess": guess,
            "evidence": evidence,
            "dependency": "none",
            "reasoning": [],
        })

    # A fact label without a subtype is rejected and the queue does not
    # advance; the annotator fixes the form and resubmits.
    try:
        answer(first, first["candidates"][0], [{"coarse": "fact"}])
    except ValidationFailed as exc:
        print("rejected:", exc.problems)

    # Answer the first three items, always guessing the first candidate.
    for _ in range(3):
        item = store.next_item(sid)["item"]
        result = answer(item, item["candidates"][0],
                        [{"coarse": "linguistic_style"}])
        ref = item["scene_ref"]
        truth = gold_by_ref[(ref["show"], ref["episode_id"], ref["scene_index"])]
        print(f"guessed {item['candidates'][0]:<8} "
              f"correct={result['correct']}  (gold was {truth[item['speaker_id']]})")

    print("\nrunning summary across all annotators:")
    print(json.dumps(store.summary(), indent=2))
