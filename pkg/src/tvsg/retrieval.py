"""Ranking a scene's recent history for question-writing support.

Given a query scene, the candidate pool is the window of scenes immediately
preceding it in show order (default 20). Two lexical scorers are available:
TF-IDF cosine (raw term frequency times inverse document frequency, so
duplicating a document's text leaves rankings unchanged) and BM25. Score
ties break toward recency.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError, EmptyRelevance, NoHistory, SchemaError
from .text import split_tokens

TFIDF = "tfidf"
BM25 = "bm25"
SCORERS = (TFIDF, BM25)

DEFAULT_WINDOW = 20

SceneRef = tuple[str, str, int]


def _tokens(text: str) -> list[str]:
    return [t.lower() for t in split_tokens(text)]


def scene_text(scene) -> str:
    """Retrieval view of a scene: speaker labels and line text, in order."""
    parts: list[str] = []
    for line in scene.lines:
        speaker = getattr(line, "speaker", None)
        speaker_id = getattr(line, "speaker_id", None)
        if speaker:
            parts.append(speaker)
        elif speaker_id:
            parts.append(speaker_id)
        parts.append(line.text)
    return " ".join(parts)


def tfidf_scores(query: list[str], docs: Sequence[list[str]]) -> list[float]:
    """Cosine similarity between the query and each document."""
    n = len(docs)
    df = Counter()
    for doc in docs:
        df.update(set(doc))
    idf = {t: math.log((1 + n) / (1 + c)) + 1.0 for t, c in df.items()}

    def vec(tokens: list[str]) -> dict[str, float]:
        tf = Counter(tokens)
        return {t: tf[t] * idf[t] for t in tf if t in idf}

    q = vec(query)
    qn = math.sqrt(sum(v * v for v in q.values()))
    out: list[float] = []
    for doc in docs:
        d = vec(doc)
        dn = math.sqrt(sum(v * v for v in d.values()))
        if qn == 0 or dn == 0:
            out.append(0.0)
            continue
        dot = sum(q[t] * d[t] for t in q.keys() & d.keys())
        out.append(dot / (qn * dn))
    return out


def bm25_scores(
    query: list[str], docs: Sequence[list[str]], k1: float = 1.2, b: float = 0.75
) -> list[float]:
    n = len(docs)
    df = Counter()
    for doc in docs:
        df.update(set(doc))
    avg_len = sum(len(d) for d in docs) / n if n else 0.0
    idf = {t: math.log(1.0 + (n - c + 0.5) / (c + 0.5)) for t, c in df.items()}
    out: list[float] = []
    for doc in docs:
        tf = Counter(doc)
        norm = k1 * (1.0 - b + b * (len(doc) / avg_len if avg_len else 0.0))
        score = 0.0
        for t in query:
            if t not in tf:
                continue
            score += idf[t] * tf[t] * (k1 + 1.0) / (tf[t] + norm)
        out.append(score)
    return out


def retrieve_history(
    query,
    corpus: Sequence,
    k: int = 3,
    window: int = DEFAULT_WINDOW,
    scorer: str = BM25,
) -> list[tuple[SceneRef, float]]:
    """Rank the scenes preceding the query within its show.

    Candidates are the up-to-``window`` scenes with the largest scene_index
    below the query's, in the query's show. Returns up to k (scene_ref,
    score) pairs, best first; equal scores rank the more recent scene
    higher. Raises NoHistory when nothing precedes the query.
    """
    if scorer not in SCORERS:
        raise ConfigError(f"unknown scorer {scorer!r}; choose from {SCORERS}")
    if k < 1:
        raise ConfigError("k must be >= 1")
    if window < 1:
        raise ConfigError("window must be >= 1")
    previous = [
        sc for sc in corpus
        if sc.show == query.show and sc.scene_index < query.scene_index
    ]
    previous.sort(key=lambda sc: sc.scene_index)
    candidates = previous[-window:]
    if not candidates:
        raise NoHistory(
            f"scene {query.scene_index} of {query.show!r} has no preceding scenes"
        )
    qtok = _tokens(scene_text(query))
    dtoks = [_tokens(scene_text(sc)) for sc in candidates]
    scores = tfidf_scores(qtok, dtoks) if scorer == TFIDF else bm25_scores(qtok, dtoks)
    ranked = sorted(
        range(len(candidates)),
        key=lambda i: (-scores[i], -candidates[i].scene_index),
    )
    return [
        ((candidates[i].show, candidates[i].episode_id, candidates[i].scene_index), scores[i])
        for i in ranked[:k]
    ]


def recall_at_k(
    results: Mapping[SceneRef, Sequence[SceneRef]],
    relevance: Mapping[SceneRef, Sequence[SceneRef]],
    k: int,
) -> float:
    """Fraction of judged queries whose top-k hits a relevant scene.

    Judged queries missing from ``results`` count as misses. Raises
    EmptyRelevance when no query carries a relevance judgment.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    judged = {q: set(refs) for q, refs in relevance.items() if refs}
    if not judged:
        raise EmptyRelevance("no judged queries")
    hits = 0
    for q, relevant in judged.items():
        top = [tuple(r) for r in results.get(q, [])][:k]
        if any(r in relevant for r in top):
            hits += 1
    return hits / len(judged)


def read_relevance(path: str | Path) -> dict[SceneRef, list[SceneRef]]:
    """Read line-delimited {"query": ref, "relevant": [ref, ...]} records."""
    def ref_of(obj, lineno) -> SceneRef:
        try:
            return (obj["show"], obj["episode_id"], int(obj["scene_index"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad scene ref: {exc}", line=lineno) from exc

    out: dict[SceneRef, list[SceneRef]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if "query" not in rec or "relevant" not in rec:
                raise SchemaError("record needs 'query' and 'relevant'", line=lineno)
            out[ref_of(rec["query"], lineno)] = [ref_of(r, lineno) for r in rec["relevant"]]
    return out
