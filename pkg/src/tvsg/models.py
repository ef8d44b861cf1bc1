"""Speaker-guessing architectures on top of the encoder.

Three architectures share one serialization scheme (an ID-prefixed utterance
reads ``[P#] tokens [SPLIT]``, supporting dialogue keeps its literal name
tokens, background lines are plain tokens, every line ends with [SPLIT]):

* ``longformer_p``: encode the whole flattened scene once, then for each
  speaker ID pool the hidden states of that ID's own tokens with a learned
  attentive scorer and classify the pooled vector.
* ``mr``: pack the scene into a fixed number of rows. Each row holds one
  anchor utterance, [SEP], then as much preceding dialogue as fits. Rows are
  encoded independently and pooled into one embedding each; for a given ID
  the rows whose anchor it did not speak are zeroed before the concatenated
  row embeddings reach the classifier, so quadratic attention cost drops
  from L^2 to rows * seg_len^2.
* ``vanilla``: encode only the ID's own utterances; by construction the
  output is bitwise independent of every other character's lines.

Classifier heads are per show, over that show's roster in fixed order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .anonymize import MaskedInstanceSet, MaskedLine
from .encoder import (
    SEP_ID,
    SPECIALS,
    SPLIT_ID,
    EncoderConfig,
    HiddenStates,
    Vocab,
    config_from_dict,
    config_to_dict,
    cross_entropy,
    encoder_backward,
    encoder_forward,
    init_encoder_params,
    load_checkpoint,
    masked_softmax,
    masked_softmax_backward,
    restricted_cross_entropy,
    save_checkpoint,
    zero_grads,
)
from .errors import (
    AllTruncated,
    ConfigError,
    EmptyInput,
    RowsUnrepresentable,
    ShapeMismatch,
)
from .parsing import BACKGROUND, DIALOGUE

LONGFORMER_P = "longformer_p"
MR = "mr"
VANILLA = "vanilla"
ARCHS = (LONGFORMER_P, MR, VANILLA)

CharacterLogits = dict[str, np.ndarray]


@dataclass(frozen=True)
class MrConfig:
    """Row layout for the multi-row architecture.

    Full-scale runs elsewhere used 12 rows; the toy default keeps every
    speaker representable (6 IDs) at a fraction of the cost.
    """

    rows: int = 6
    seg_len: int = 64
    reverse: bool = True
    fill_empty: bool = True

    def __post_init__(self):
        if self.rows < 1:
            raise ConfigError("rows must be >= 1")
        if self.seg_len < 3:
            raise ConfigError("seg_len must be >= 3 ([P#] + token + [SPLIT])")


def serialize_line(line: MaskedLine, vocab: Vocab) -> tuple[list[int], str | None]:
    """Token ids for one line and the speaker ID that owns them, if masked."""
    if line.kind == DIALOGUE and line.speaker_id is not None:
        ids = [vocab.speaker_token_id(line.speaker_id)] + vocab.tokenize(line.text) + [SPLIT_ID]
        return ids, line.speaker_id
    if line.kind == DIALOGUE:
        ids = vocab.tokenize(line.speaker or "") + vocab.tokenize(line.text) + [SPLIT_ID]
        return ids, None
    return vocab.tokenize(line.text) + [SPLIT_ID], None


@dataclass
class FlatSceneInput:
    """Whole-scene token stream with per-ID ownership masks."""

    ids: np.ndarray
    masks: dict[str, np.ndarray]
    line_spans: list[tuple[int, int, int]] = field(default_factory=list)


def build_flat_input(
    inst: MaskedInstanceSet,
    vocab: Vocab,
    max_len: int,
    include_background: bool = True,
) -> FlatSceneInput:
    """Serialize a scene in order, truncating whole trailing lines at max_len.

    An ID's mask covers its [P#] prefix, utterance tokens, and [SPLIT]. IDs
    whose every line was truncated away get no mask; if no masked token
    survives at all the scene is unusable and AllTruncated is raised.
    """
    pieces: list[tuple[int, list[int], str | None]] = []
    for li, line in enumerate(inst.lines):
        if line.kind == BACKGROUND and not include_background:
            continue
        ids, sid = serialize_line(line, vocab)
        pieces.append((li, ids, sid))

    ids_out: list[int] = []
    spans: list[tuple[int, int, int]] = []
    masks: dict[str, list[tuple[int, int]]] = {}
    for li, ids, sid in pieces:
        if len(ids_out) + len(ids) > max_len:
            break
        start = len(ids_out)
        ids_out.extend(ids)
        spans.append((li, start, len(ids_out)))
        if sid is not None:
            masks.setdefault(sid, []).append((start, len(ids_out)))

    if not masks:
        raise AllTruncated(
            f"{inst.show}/{inst.episode_id}/{inst.scene_index}: "
            f"no masked dialogue token fits in {max_len}"
        )
    L = len(ids_out)
    mask_arrays: dict[str, np.ndarray] = {}
    for sid, ranges in masks.items():
        m = np.zeros(L, dtype=bool)
        for start, end in ranges:
            m[start:end] = True
        mask_arrays[sid] = m
    return FlatSceneInput(
        ids=np.asarray(ids_out, dtype=np.int64),
        masks=dict(sorted(mask_arrays.items())),
        line_spans=spans,
    )


@dataclass
class RowBatch:
    """Fixed grid of encoded rows; invalid rows are all-PAD placeholders."""

    ids: np.ndarray
    lengths: np.ndarray
    anchors: np.ndarray
    valid: np.ndarray
    seg_masks: dict[str, np.ndarray]


def build_rows(
    inst: MaskedInstanceSet,
    vocab: Vocab,
    rows: int,
    seg_len: int,
    reverse: bool = True,
    fill_empty: bool = True,
) -> RowBatch:
    """Select anchor utterances and pack one row per anchor.

    Anchors are ID-prefixed utterances. With fill_empty, each present ID's
    last utterance is reserved first (so every ID anchors at least one row);
    remaining slots are filled from the scene end backwards when reverse is
    set, else from the start forwards. Rows are always emitted in descending
    anchor position. A row holds its anchor (cut to seg_len if needed),
    [SEP], then preceding dialogue turns packed backwards until seg_len.
    """
    mr = MrConfig(rows=rows, seg_len=seg_len, reverse=reverse, fill_empty=fill_empty)
    serialized: dict[int, tuple[list[int], str | None]] = {}
    main_turns: list[int] = []
    dialogue_turns: list[int] = []
    for li, line in enumerate(inst.lines):
        if line.kind != DIALOGUE:
            continue
        ids, sid = serialize_line(line, vocab)
        serialized[li] = (ids, sid)
        dialogue_turns.append(li)
        if sid is not None:
            main_turns.append(li)
    if not main_turns:
        raise EmptyInput(
            f"{inst.show}/{inst.episode_id}/{inst.scene_index}: no ID-prefixed utterances"
        )

    if fill_empty:
        last_turn: dict[str, int] = {}
        for li in main_turns:
            last_turn[serialized[li][1]] = li  # later turns overwrite
        present = sorted(last_turn)
        if len(present) > rows:
            raise RowsUnrepresentable(
                f"{len(present)} speaker IDs but only {rows} rows"
            )
        chosen = set(last_turn.values())
        remaining = [li for li in main_turns if li not in chosen]
        if reverse:
            remaining = remaining[::-1]
        for li in remaining:
            if len(chosen) >= rows:
                break
            chosen.add(li)
    else:
        order = main_turns[::-1] if reverse else main_turns
        chosen = set(order[:rows])

    anchor_list = sorted(chosen, reverse=True)
    ids_grid = np.zeros((rows, seg_len), dtype=np.int64)
    lengths = np.zeros(rows, dtype=np.int64)
    anchors = np.full(rows, -1, dtype=np.int64)
    valid = np.zeros(rows, dtype=bool)
    for r, li in enumerate(anchor_list):
        row_ids = list(serialized[li][0][:seg_len])
        history = [d for d in dialogue_turns if d < li]
        if len(row_ids) < seg_len and history:
            row_ids.append(SEP_ID)
            for h in reversed(history):
                space = seg_len - len(row_ids)
                if space <= 0:
                    break
                row_ids.extend(serialized[h][0][:space])
        ids_grid[r, :len(row_ids)] = row_ids
        lengths[r] = len(row_ids)
        anchors[r] = li
        valid[r] = True

    present_ids = sorted({serialized[li][1] for li in main_turns})
    seg_masks = {
        sid: np.array(
            [valid[r] and serialized[int(anchors[r])][1] == sid for r in range(rows)],
            dtype=bool,
        )
        for sid in present_ids
    }
    return RowBatch(ids=ids_grid, lengths=lengths, anchors=anchors, valid=valid, seg_masks=seg_masks)


# --- pooling --------------------------------------------------------------

def attentive_scores(H: np.ndarray, params: dict[str, np.ndarray]) -> np.ndarray:
    """One-layer feedforward scorer: one scalar per token position."""
    return H @ params["pool.w"] + params["pool.b"][0]


def masked_attentive_pool(
    H: np.ndarray, scores: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Softmax ``scores`` over masked positions, return (weights, H^T weights)."""
    alpha = masked_softmax(scores, mask)
    return alpha, H.T @ alpha


def pool_characters(
    H: HiddenStates | np.ndarray,
    masks: dict[str, np.ndarray],
    params: dict[str, np.ndarray],
) -> dict[str, np.ndarray]:
    """Per-ID pooled embeddings from one encoded scene.

    The scorer runs once over all positions; each ID's attention weights are
    the masked softmax restricted to its own (unpadded) tokens.
    """
    if isinstance(H, HiddenStates):
        mat, pad = H.h, H.pad_mask
    else:
        mat, pad = H, np.ones(H.shape[0], dtype=bool)
    scores = attentive_scores(mat, params)
    out: dict[str, np.ndarray] = {}
    for sid, mask in masks.items():
        _, pooled = masked_attentive_pool(mat, scores, np.asarray(mask, bool) & pad)
        out[sid] = pooled
    return out


# --- model ----------------------------------------------------------------

class CharModel:
    """Encoder + pooling scorer + per-show classifier heads for one arch."""

    def __init__(
        self,
        arch: str,
        vocab: Vocab,
        rosters: dict[str, Sequence[str]],
        cfg: EncoderConfig,
        mr: MrConfig | None = None,
        seed: int = 0,
        include_background: bool = True,
    ):
        if arch not in ARCHS:
            raise ConfigError(f"unknown architecture {arch!r}")
        if not rosters:
            raise ConfigError("at least one show roster is required")
        self.arch = arch
        self.vocab = vocab
        self.rosters = {show: list(names) for show, names in rosters.items()}
        self.cfg = cfg
        self.mr = mr or MrConfig()
        self.seed = seed
        self.include_background = include_background
        self.params = init_encoder_params(cfg, len(vocab), seed=seed)
        rng = np.random.default_rng([seed, 1])
        self.params["pool.w"] = rng.normal(0.0, 0.02, size=cfg.dim)
        self.params["pool.b"] = np.zeros(1)
        width = self.head_width()
        for show in sorted(self.rosters):
            c = len(self.rosters[show])
            if c < 1:
                raise ConfigError(f"show {show!r} has an empty roster")
            self.params[f"head.{show}.w"] = rng.normal(0.0, 0.02, size=(c, width))
            self.params[f"head.{show}.b"] = np.zeros(c)

    def head_width(self) -> int:
        return self.cfg.dim * (self.mr.rows if self.arch == MR else 1)

    def roster_of(self, inst: MaskedInstanceSet) -> list[str]:
        roster = self.rosters.get(inst.show)
        if roster is None:
            raise ConfigError(f"model has no head for show {inst.show!r}")
        return roster

    # -- forward passes, each returning (logits by sid, cache for backward)

    def _head(self, show: str, vector: np.ndarray) -> np.ndarray:
        return self.params[f"head.{show}.w"] @ vector + self.params[f"head.{show}.b"]

    def _forward_flat(self, inst, train=False, rng=None):
        flat = build_flat_input(inst, self.vocab, self.cfg.max_len, self.include_background)
        H, cache = encoder_forward(self.params, self.cfg, flat.ids, train, rng)
        scores = attentive_scores(H, self.params)
        pooled: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        logits: CharacterLogits = {}
        for sid, mask in flat.masks.items():
            alpha, vec = masked_attentive_pool(H, scores, mask)
            pooled[sid] = (alpha, vec)
            logits[sid] = self._head(inst.show, vec)
        return logits, {"kind": LONGFORMER_P, "flat": flat, "H": H, "enc": cache,
                        "scores": scores, "pooled": pooled, "show": inst.show}

    def _backward_flat(self, cache, dlogits: dict[str, np.ndarray], grads) -> None:
        show = cache["show"]
        H = cache["H"]
        wname, bname = f"head.{show}.w", f"head.{show}.b"
        dH = np.zeros_like(H)
        dscores = np.zeros(H.shape[0])
        for sid, dl in dlogits.items():
            alpha, vec = cache["pooled"][sid]
            grads[wname] += np.outer(dl, vec)
            grads[bname] += dl
            dvec = self.params[wname].T @ dl
            dalpha = H @ dvec
            dH += np.outer(alpha, dvec)
            dscores += masked_softmax_backward(alpha, dalpha)
        grads["pool.w"] += H.T @ dscores
        grads["pool.b"][0] += dscores.sum()
        dH += np.outer(dscores, self.params["pool.w"])
        encoder_backward(self.params, self.cfg, cache["enc"], dH, grads)

    def _forward_mr(self, inst, train=False, rng=None):
        rb = build_rows(inst, self.vocab, self.mr.rows, self.mr.seg_len,
                        self.mr.reverse, self.mr.fill_empty)
        D = self.cfg.dim
        row_embs = np.zeros((self.mr.rows, D))
        row_caches: list[dict | None] = [None] * self.mr.rows
        for r in range(self.mr.rows):
            if not rb.valid[r]:
                continue
            ids = rb.ids[r, :rb.lengths[r]]
            Hr, enc = encoder_forward(self.params, self.cfg, ids, train, rng)
            scores = attentive_scores(Hr, self.params)
            alpha, vec = masked_attentive_pool(Hr, scores, np.ones(len(ids), dtype=bool))
            row_embs[r] = vec
            row_caches[r] = {"H": Hr, "enc": enc, "alpha": alpha}
        logits: CharacterLogits = {}
        for sid, m in rb.seg_masks.items():
            z = (row_embs * m[:, None]).reshape(-1)
            logits[sid] = self._head(inst.show, z)
        return logits, {"kind": MR, "rows": rb, "row_embs": row_embs,
                        "row_caches": row_caches, "show": inst.show}

    def _backward_mr(self, cache, dlogits: dict[str, np.ndarray], grads) -> None:
        show = cache["show"]
        rb: RowBatch = cache["rows"]
        row_embs = cache["row_embs"]
        D = self.cfg.dim
        wname, bname = f"head.{show}.w", f"head.{show}.b"
        d_rows = np.zeros_like(row_embs)
        for sid, dl in dlogits.items():
            m = rb.seg_masks[sid]
            z = (row_embs * m[:, None]).reshape(-1)
            grads[wname] += np.outer(dl, z)
            grads[bname] += dl
            dz = (self.params[wname].T @ dl).reshape(self.mr.rows, D)
            d_rows += dz * m[:, None]
        for r in range(self.mr.rows):
            rc = cache["row_caches"][r]
            if rc is None or not np.any(d_rows[r]):
                continue
            H, alpha = rc["H"], rc["alpha"]
            dvec = d_rows[r]
            dalpha = H @ dvec
            dH = np.outer(alpha, dvec)
            dscores = masked_softmax_backward(alpha, dalpha)
            grads["pool.w"] += H.T @ dscores
            grads["pool.b"][0] += dscores.sum()
            dH += np.outer(dscores, self.params["pool.w"])
            encoder_backward(self.params, self.cfg, rc["enc"], dH, grads)

    def _own_ids(self, inst: MaskedInstanceSet, sid: str) -> np.ndarray:
        ids_out: list[int] = []
        for line in inst.lines:
            if line.speaker_id != sid:
                continue
            ids, _ = serialize_line(line, self.vocab)
            if len(ids_out) + len(ids) > self.cfg.max_len:
                break
            ids_out.extend(ids)
        if not ids_out:
            raise AllTruncated(f"speaker {sid} has no tokens within max_len")
        return np.asarray(ids_out, dtype=np.int64)

    def _forward_vanilla(self, inst, train=False, rng=None):
        logits: CharacterLogits = {}
        per_sid: dict[str, dict] = {}
        for sid in sorted(inst.gold):
            ids = self._own_ids(inst, sid)
            H, enc = encoder_forward(self.params, self.cfg, ids, train, rng)
            scores = attentive_scores(H, self.params)
            alpha, vec = masked_attentive_pool(H, scores, np.ones(len(ids), dtype=bool))
            per_sid[sid] = {"H": H, "enc": enc, "alpha": alpha, "vec": vec}
            logits[sid] = self._head(inst.show, vec)
        return logits, {"kind": VANILLA, "per_sid": per_sid, "show": inst.show}

    def _backward_vanilla(self, cache, dlogits: dict[str, np.ndarray], grads) -> None:
        show = cache["show"]
        wname, bname = f"head.{show}.w", f"head.{show}.b"
        for sid, dl in dlogits.items():
            sc = cache["per_sid"][sid]
            H, alpha, vec = sc["H"], sc["alpha"], sc["vec"]
            grads[wname] += np.outer(dl, vec)
            grads[bname] += dl
            dvec = self.params[wname].T @ dl
            dalpha = H @ dvec
            dH = np.outer(alpha, dvec)
            dscores = masked_softmax_backward(alpha, dalpha)
            grads["pool.w"] += H.T @ dscores
            grads["pool.b"][0] += dscores.sum()
            dH += np.outer(dscores, self.params["pool.w"])
            encoder_backward(self.params, self.cfg, sc["enc"], dH, grads)

    def _forward(self, inst, train=False, rng=None):
        if self.arch == LONGFORMER_P:
            return self._forward_flat(inst, train, rng)
        if self.arch == MR:
            return self._forward_mr(inst, train, rng)
        return self._forward_vanilla(inst, train, rng)

    def _backward(self, cache, dlogits, grads):
        if cache["kind"] == LONGFORMER_P:
            self._backward_flat(cache, dlogits, grads)
        elif cache["kind"] == MR:
            self._backward_mr(cache, dlogits, grads)
        else:
            self._backward_vanilla(cache, dlogits, grads)

    # -- public API

    def predict_scene(self, inst: MaskedInstanceSet) -> CharacterLogits:
        """Eval-mode logits over the show roster for every ID in the scene."""
        self.roster_of(inst)
        logits, _ = self._forward(inst)
        return logits

    def loss_and_grads(
        self,
        batch: Sequence[MaskedInstanceSet],
        candidate_masked: bool = False,
        train: bool = True,
        rng: np.random.Generator | None = None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Mean scene loss over the batch and gradients for every parameter.

        A scene's loss is the mean cross-entropy over its present IDs, over
        the full roster by default or restricted to the scene's candidates
        when candidate_masked is set.
        """
        if not batch:
            raise EmptyInput("empty batch")
        grads = zero_grads(self.params)
        total = 0.0
        for inst in batch:
            roster = self.roster_of(inst)
            logits, cache = self._forward(inst, train=train, rng=rng)
            sids = sorted(logits)
            scale = 1.0 / (len(batch) * len(sids))
            dlogits: dict[str, np.ndarray] = {}
            for sid in sids:
                name = inst.gold[sid]
                if name not in roster:
                    raise ShapeMismatch(f"gold character {name!r} missing from roster")
                target = roster.index(name)
                if candidate_masked:
                    allowed = [roster.index(c) for c in inst.candidates]
                    loss, dl = restricted_cross_entropy(logits[sid], target, allowed)
                else:
                    loss, dl = cross_entropy(logits[sid], target)
                total += loss * scale
                dlogits[sid] = dl * scale
            self._backward(cache, dlogits, grads)
        return total, grads


def predict_longformer_p(inst: MaskedInstanceSet, model: CharModel) -> CharacterLogits:
    if model.arch != LONGFORMER_P:
        raise ConfigError(f"model is {model.arch!r}, not {LONGFORMER_P!r}")
    return model.predict_scene(inst)


def predict_mr(inst: MaskedInstanceSet, model: CharModel) -> CharacterLogits:
    if model.arch != MR:
        raise ConfigError(f"model is {model.arch!r}, not {MR!r}")
    return model.predict_scene(inst)


def predict_vanilla(inst: MaskedInstanceSet, speaker_id: str, model: CharModel) -> np.ndarray:
    if model.arch != VANILLA:
        raise ConfigError(f"model is {model.arch!r}, not {VANILLA!r}")
    if speaker_id not in inst.gold:
        raise ConfigError(f"speaker ID {speaker_id!r} not present in scene")
    return model.predict_scene(inst)[speaker_id]


def argmax_candidate(logits: np.ndarray, roster: Sequence[str], candidates: Sequence[str]) -> str:
    """Highest-scoring candidate; ties break by roster order."""
    best_name, best_val = None, None
    for name in roster:
        if name not in candidates:
            continue
        val = logits[list(roster).index(name)]
        if best_val is None or val > best_val:
            best_name, best_val = name, val
    if best_name is None:
        raise ShapeMismatch("no candidate appears in the roster")
    return best_name


def decode_joint(
    logits_by_sid: CharacterLogits, roster: Sequence[str], candidates: Sequence[str]
) -> dict[str, str]:
    """Greedy one-to-one assignment of candidates to IDs (optional decoder).

    Repeatedly commits the highest-scoring unassigned (ID, candidate) pair,
    so no two IDs share a guess.
    """
    roster = list(roster)
    pairs = []
    for sid, logits in logits_by_sid.items():
        for name in candidates:
            pairs.append((float(logits[roster.index(name)]), sid, name))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    out: dict[str, str] = {}
    used: set[str] = set()
    for _, sid, name in pairs:
        if sid in out or name in used:
            continue
        out[sid] = name
        used.add(name)
    return out


# --- persistence ----------------------------------------------------------

def save_model(path: str | Path, model: CharModel) -> None:
    meta = {
        "arch": model.arch,
        "config": config_to_dict(model.cfg),
        "mr": asdict(model.mr),
        "rosters": model.rosters,
        "words": list(model.vocab.tokens[len(SPECIALS):]),
        "include_background": model.include_background,
        "seed": model.seed,
    }
    save_checkpoint(path, model.params, meta)


def load_model(path: str | Path) -> CharModel:
    params, meta = load_checkpoint(path)
    model = CharModel(
        arch=meta["arch"],
        vocab=Vocab(meta["words"]),
        rosters=meta["rosters"],
        cfg=config_from_dict(meta["config"]),
        mr=MrConfig(**meta["mr"]),
        seed=meta.get("seed", 0),
        include_background=meta.get("include_background", True),
    )
    for key, value in params.items():
        if key not in model.params:
            raise ConfigError(f"checkpoint tensor {key!r} does not fit the model")
        if model.params[key].shape != value.shape:
            raise ConfigError(
                f"checkpoint tensor {key!r} has shape {value.shape}, "
                f"expected {model.params[key].shape}"
            )
        model.params[key] = value
    return model
