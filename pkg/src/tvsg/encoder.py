"""From-scratch trainable text encoder in float64 numpy.

Learned token and position embeddings feed a stack of pre-norm transformer
blocks with either full or symmetric sliding-window self-attention. Forward
passes cache every intermediate so the hand-written backward pass can return
exact gradients for all parameters; everything runs in double precision so
finite-difference checks are meaningful. Padding ids are excluded from the
attention key set by slicing (not by masking after the fact), which keeps
the hidden states of unpadded positions bitwise independent of appended
padding; for the same reason a window at least as wide as the sequence is
bitwise identical to full attention.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, EmptyInput, EmptyMask, SequenceTooLong, ShapeMismatch
from .text import split_tokens

FULL = "full"
WINDOW = "window"

SPECIALS = ("[PAD]", "[UNK]", "[SPLIT]", "[SEP]", "[P0]", "[P1]", "[P2]", "[P3]", "[P4]", "[P5]")
PAD_ID = 0
UNK_ID = 1
SPLIT_ID = 2
SEP_ID = 3
FIRST_SPEAKER_ID = 4

# [PAD] never comes from text; the remaining specials pass through verbatim.
_SPECIAL_RE = re.compile(r"\[(?:UNK|SPLIT|SEP|P[0-5])\]")

_INIT_STD = 0.02
_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


class Vocab:
    """Token table with ten reserved specials at ids 0..9."""

    def __init__(self, words: Iterable[str] = ()):
        ordinary = sorted({w for w in words if w not in SPECIALS})
        self.tokens: tuple[str, ...] = SPECIALS + tuple(ordinary)
        self.index: dict[str, int] = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ConfigError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def speaker_token_id(self, speaker_id: str) -> int:
        """Id of the [P#] token for a speaker ID like "P2"."""
        n = int(speaker_id[1:])
        if not 0 <= n < 6:
            raise ConfigError(f"no special token for speaker ID {speaker_id!r}")
        return FIRST_SPEAKER_ID + n

    def _word_ids(self, chunk: str) -> list[int]:
        return [self.index.get(tok, UNK_ID) for tok in split_tokens(chunk.lower())]

    def tokenize(self, text: str) -> list[int]:
        """Lowercase, split off punctuation, map words to ids (OOV -> [UNK]).

        Special-token strings other than [PAD] map to their reserved ids, so
        the output never contains PAD_ID.
        """
        ids: list[int] = []
        pos = 0
        for m in _SPECIAL_RE.finditer(text):
            ids.extend(self._word_ids(text[pos:m.start()]))
            ids.append(self.index[m.group(0)])
            pos = m.end()
        ids.extend(self._word_ids(text[pos:]))
        return ids

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocab":
        words: set[str] = set()
        for text in texts:
            words.update(split_tokens(text.lower()))
        return cls(words)


def tokenize(text: str, vocab: Vocab) -> list[int]:
    return vocab.tokenize(text)


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture hyperparameters.

    ``window`` is the half-width w of the symmetric sliding window: position
    i attends to positions j with |i - j| <= w, a neighborhood of 2w + 1.
    Full-scale runs elsewhere used a neighborhood of 256 (w = 128) with
    sequences up to 2000 tokens; the defaults here are the toy scale this
    artifact trains at.
    """

    dim: int = 64
    layers: int = 2
    heads: int = 2
    max_len: int = 512
    attention: str = FULL
    window: int = 0
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.layers < 1 or self.heads < 1 or self.max_len < 1:
            raise ConfigError("dim, layers, heads, max_len must all be positive")
        if self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.attention not in (FULL, WINDOW):
            raise ConfigError(f"unknown attention kind {self.attention!r}")
        if self.attention == WINDOW and self.window < 1:
            raise ConfigError("window attention needs window >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")


@dataclass
class HiddenStates:
    """Encoder output: one row per input position."""

    h: np.ndarray
    ids: np.ndarray
    pad_mask: np.ndarray


def init_encoder_params(cfg: EncoderConfig, vocab_size: int, seed: int | None = None) -> dict[str, np.ndarray]:
    """Seeded scaled-normal init (std 0.02); LayerNorm gains 1, biases 0."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    d, f = cfg.dim, 4 * cfg.dim

    def normal(*shape):
        return rng.normal(0.0, _INIT_STD, size=shape)

    params: dict[str, np.ndarray] = {
        "tok": normal(vocab_size, d),
        "pos": normal(cfg.max_len, d),
    }
    for i in range(cfg.layers):
        p = f"L{i}."
        params[p + "ln1.g"] = np.ones(d)
        params[p + "ln1.b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            params[p + name] = normal(d, d)
        for name in ("bq", "bk", "bv", "bo"):
            params[p + name] = np.zeros(d)
        params[p + "ln2.g"] = np.ones(d)
        params[p + "ln2.b"] = np.zeros(d)
        params[p + "w1"] = normal(d, f)
        params[p + "b1"] = np.zeros(f)
        params[p + "w2"] = normal(f, d)
        params[p + "b2"] = np.zeros(d)
    params["lnf.g"] = np.ones(d)
    params["lnf.b"] = np.zeros(d)
    return params


def zero_grads(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


# --- numerics -------------------------------------------------------------

def _layernorm_fwd(x: np.ndarray, g: np.ndarray, b: np.ndarray, eps: float = 1e-5):
    mu = x.mean(-1, keepdims=True)
    var = x.var(-1, keepdims=True)
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * invstd
    return g * xhat + b, (xhat, invstd, g)


def _layernorm_bwd(dy: np.ndarray, cache, grads: dict, prefix: str) -> np.ndarray:
    xhat, invstd, g = cache
    grads[prefix + ".g"] += (dy * xhat).sum(0)
    grads[prefix + ".b"] += dy.sum(0)
    dxhat = dy * g
    return invstd * (
        dxhat - dxhat.mean(-1, keepdims=True) - xhat * (dxhat * xhat).mean(-1, keepdims=True)
    )


def _gelu_fwd(x: np.ndarray) -> np.ndarray:
    return x * ndtr(x)


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    return ndtr(x) + x * np.exp(-0.5 * x * x) / _SQRT_2PI


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    m = z.max(axis=axis, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max()
    s = z - m
    return s - np.log(np.exp(s).sum())


def masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the positions where ``mask`` is True; zeros elsewhere.

    Excluded positions take no part in the normalization (this is exclusion,
    not multiplication of scores by the mask). Raises EmptyMask when nothing
    is selected.
    """
    mask = np.asarray(mask, dtype=bool)
    if scores.shape != mask.shape:
        raise ShapeMismatch(f"scores {scores.shape} vs mask {mask.shape}")
    if not mask.any():
        raise EmptyMask("mask selects no positions")
    shifted = scores - scores[mask].max()
    e = np.where(mask, np.exp(np.where(mask, shifted, 0.0)), 0.0)
    return e / e.sum()


def masked_softmax_backward(alpha: np.ndarray, dalpha: np.ndarray) -> np.ndarray:
    """Gradient of masked_softmax w.r.t. the raw scores (zeros off-mask)."""
    inner = (dalpha * alpha).sum()
    return alpha * (dalpha - inner)


def cross_entropy(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Mean-ready CE for one instance: loss and d loss / d logits."""
    logp = log_softmax(logits)
    dlogits = np.exp(logp)
    dlogits[target] -= 1.0
    return float(-logp[target]), dlogits


def restricted_cross_entropy(
    logits: np.ndarray, target: int, allowed: Sequence[int]
) -> tuple[float, np.ndarray]:
    """CE over a subset of classes; gradient is zero outside ``allowed``."""
    allowed = list(allowed)
    if target not in allowed:
        raise ShapeMismatch("target class not in allowed set")
    sub = logits[allowed]
    loss, dsub = cross_entropy(sub, allowed.index(target))
    dlogits = np.zeros_like(logits)
    dlogits[allowed] = dsub
    return loss, dlogits


# --- attention masking ----------------------------------------------------

def _window_allowed(L: int, cfg: EncoderConfig) -> np.ndarray:
    if cfg.attention == FULL:
        return np.ones((L, L), dtype=bool)
    idx = np.arange(L)
    return np.abs(idx[:, None] - idx[None, :]) <= cfg.window


def build_attention_mask(L: int, cfg: EncoderConfig, pad_mask: np.ndarray | None = None) -> np.ndarray:
    """(L, L) boolean matrix: may query position i attend to key position j."""
    allowed = _window_allowed(L, cfg)
    if pad_mask is not None:
        allowed = allowed & np.asarray(pad_mask, dtype=bool)[None, :]
    return allowed


def attention_pair_count(L: int, cfg: EncoderConfig) -> int:
    """Number of (query, key) pairs the attention pattern evaluates."""
    if L < 0:
        raise ConfigError("sequence length must be non-negative")
    if cfg.attention == FULL:
        return L * L
    w = cfg.window
    total = 0
    for i in range(L):
        total += min(L - 1, i + w) - max(0, i - w) + 1
    return total


# --- forward / backward ---------------------------------------------------

def encoder_forward(
    params: dict[str, np.ndarray],
    cfg: EncoderConfig,
    ids: Sequence[int],
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Run the encoder; returns (H, cache) with H of shape (L, dim).

    Dropout fires only when ``train`` is True and cfg.dropout > 0, drawing
    masks from ``rng``. Padding ids contribute nothing to other positions:
    they are dropped from the attention key set entirely.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise EmptyInput("encoder input must be a non-empty 1-D id sequence")
    L = int(ids.size)
    if L > cfg.max_len:
        raise SequenceTooLong(f"sequence of {L} tokens exceeds max_len {cfg.max_len}")
    pad_mask = ids != PAD_ID
    real_idx = np.nonzero(pad_mask)[0]
    if real_idx.size == 0:
        raise EmptyInput("encoder input is all padding")
    allowed = build_attention_mask(L, cfg, pad_mask)[:, real_idx]

    d, nh = cfg.dim, cfg.heads
    dh = d // nh
    scale = 1.0 / np.sqrt(dh)
    use_dropout = train and cfg.dropout > 0.0
    if use_dropout and rng is None:
        rng = np.random.default_rng(cfg.seed)
    keep = 1.0 - cfg.dropout

    h = params["tok"][ids] + params["pos"][:L]
    cache: dict = {"ids": ids, "L": L, "real_idx": real_idx, "allowed": allowed, "blocks": []}

    for i in range(cfg.layers):
        p = f"L{i}."
        a, ln1c = _layernorm_fwd(h, params[p + "ln1.g"], params[p + "ln1.b"])
        q = a @ params[p + "wq"] + params[p + "bq"]
        k = a @ params[p + "wk"] + params[p + "bk"]
        v = a @ params[p + "wv"] + params[p + "bv"]
        qh = q.reshape(L, nh, dh).transpose(1, 0, 2)
        kh = k[real_idx].reshape(real_idx.size, nh, dh).transpose(1, 0, 2)
        vh = v[real_idx].reshape(real_idx.size, nh, dh).transpose(1, 0, 2)
        scores = np.matmul(qh, kh.transpose(0, 2, 1)) * scale
        scores = np.where(allowed[None, :, :], scores, -np.inf)
        smax = scores.max(-1, keepdims=True)
        smax = np.where(np.isfinite(smax), smax, 0.0)
        e = np.exp(scores - smax)
        denom = e.sum(-1, keepdims=True)
        probs = np.where(denom > 0, e / np.where(denom == 0, 1.0, denom), 0.0)
        ctx = np.matmul(probs, vh).transpose(1, 0, 2).reshape(L, d)
        attn = ctx @ params[p + "wo"] + params[p + "bo"]
        drop1 = None
        if use_dropout:
            drop1 = (rng.random(attn.shape) < keep) / keep
            attn = attn * drop1
        h = h + attn
        f, ln2c = _layernorm_fwd(h, params[p + "ln2.g"], params[p + "ln2.b"])
        z1 = f @ params[p + "w1"] + params[p + "b1"]
        gz = _gelu_fwd(z1)
        z2 = gz @ params[p + "w2"] + params[p + "b2"]
        drop2 = None
        if use_dropout:
            drop2 = (rng.random(z2.shape) < keep) / keep
            z2 = z2 * drop2
        h = h + z2
        cache["blocks"].append(
            {"ln1": ln1c, "a": a, "qh": qh, "kh": kh, "vh": vh, "probs": probs,
             "ctx": ctx, "ln2": ln2c, "f": f, "z1": z1, "gz": gz,
             "drop1": drop1, "drop2": drop2}
        )

    out, lnfc = _layernorm_fwd(h, params["lnf.g"], params["lnf.b"])
    cache["lnf"] = lnfc
    return out, cache


def encoder_backward(
    params: dict[str, np.ndarray],
    cfg: EncoderConfig,
    cache: dict,
    dH: np.ndarray,
    grads: dict[str, np.ndarray],
) -> None:
    """Accumulate parameter gradients for one forward pass into ``grads``."""
    L = cache["L"]
    ids = cache["ids"]
    real_idx = cache["real_idx"]
    d, nh = cfg.dim, cfg.heads
    dh_dim = d // nh
    scale = 1.0 / np.sqrt(dh_dim)

    dh = _layernorm_bwd(dH, cache["lnf"], grads, "lnf")
    for i in reversed(range(cfg.layers)):
        p = f"L{i}."
        blk = cache["blocks"][i]
        dz2 = dh if blk["drop2"] is None else dh * blk["drop2"]
        grads[p + "w2"] += blk["gz"].T @ dz2
        grads[p + "b2"] += dz2.sum(0)
        dgz = dz2 @ params[p + "w2"].T
        dz1 = dgz * _gelu_grad(blk["z1"])
        grads[p + "w1"] += blk["f"].T @ dz1
        grads[p + "b1"] += dz1.sum(0)
        df = dz1 @ params[p + "w1"].T
        dh = dh + _layernorm_bwd(df, blk["ln2"], grads, p + "ln2")

        dattn = dh if blk["drop1"] is None else dh * blk["drop1"]
        grads[p + "wo"] += blk["ctx"].T @ dattn
        grads[p + "bo"] += dattn.sum(0)
        dctx = (dattn @ params[p + "wo"].T).reshape(L, nh, dh_dim).transpose(1, 0, 2)
        probs, vh, qh, kh = blk["probs"], blk["vh"], blk["qh"], blk["kh"]
        dprobs = np.matmul(dctx, vh.transpose(0, 2, 1))
        dvh = np.matmul(probs.transpose(0, 2, 1), dctx)
        dscores = probs * (dprobs - (dprobs * probs).sum(-1, keepdims=True))
        dqh = np.matmul(dscores, kh) * scale
        dkh = np.matmul(dscores.transpose(0, 2, 1), qh) * scale
        dq = dqh.transpose(1, 0, 2).reshape(L, d)
        dk_real = dkh.transpose(1, 0, 2).reshape(real_idx.size, d)
        dv_real = dvh.transpose(1, 0, 2).reshape(real_idx.size, d)
        dk = np.zeros((L, d))
        dv = np.zeros((L, d))
        dk[real_idx] = dk_real
        dv[real_idx] = dv_real
        a = blk["a"]
        grads[p + "wq"] += a.T @ dq
        grads[p + "bq"] += dq.sum(0)
        grads[p + "wk"] += a.T @ dk
        grads[p + "bk"] += dk.sum(0)
        grads[p + "wv"] += a.T @ dv
        grads[p + "bv"] += dv.sum(0)
        da = dq @ params[p + "wq"].T + dk @ params[p + "wk"].T + dv @ params[p + "wv"].T
        dh = dh + _layernorm_bwd(da, blk["ln1"], grads, p + "ln1")

    np.add.at(grads["tok"], ids, dh)
    grads["pos"][:L] += dh


def encode(params: dict[str, np.ndarray], cfg: EncoderConfig, ids: Sequence[int]) -> HiddenStates:
    """Deterministic (eval-mode) encoding of one id sequence."""
    h, cache = encoder_forward(params, cfg, ids)
    return HiddenStates(h=h, ids=cache["ids"], pad_mask=cache["ids"] != PAD_ID)


# --- optimization ---------------------------------------------------------

class Adam:
    """Adaptive-moment optimizer over a named parameter dict."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ConfigError("learning rate must be non-negative")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


# --- checkpoints ----------------------------------------------------------

CHECKPOINT_FORMAT = 1


def save_checkpoint(path: str | Path, params: dict[str, np.ndarray], meta: dict) -> None:
    """Versioned container: named tensors plus a JSON metadata echo."""
    payload = dict(params)
    payload["__meta__"] = np.array(json.dumps({"format": CHECKPOINT_FORMAT, **meta}))
    np.savez_compressed(path, **payload)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data:
            raise ConfigError(f"{path}: not a checkpoint (missing metadata)")
        meta = json.loads(str(data["__meta__"][()]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ConfigError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
        params = {k: data[k].astype(np.float64) for k in data.files if k != "__meta__"}
    meta.pop("format", None)
    return params, meta


def config_to_dict(cfg: EncoderConfig) -> dict:
    return asdict(cfg)


def config_from_dict(d: dict) -> EncoderConfig:
    return EncoderConfig(**d)


# --- gradient verification ------------------------------------------------

def gradient_check(
    loss_fn: Callable[[dict[str, np.ndarray]], float],
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    n_samples: int = 500,
    eps: float = 1e-5,
    seed: int = 0,
) -> tuple[float, float]:
    """Compare analytic ``grads`` against central differences of ``loss_fn``.

    Samples ``n_samples`` scalar parameters uniformly across all tensors and
    returns (fraction within 1e-4 relative error, max relative error seen).
    """
    rng = np.random.default_rng(seed)
    keys = sorted(params)
    sizes = np.array([params[k].size for k in keys])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(n_samples, total), replace=False)
    bounds = np.cumsum(sizes)
    ok = 0
    max_rel = 0.0
    for flat in picks:
        ki = int(np.searchsorted(bounds, flat, side="right"))
        offset = int(flat - (bounds[ki - 1] if ki else 0))
        key = keys[ki]
        idx = np.unravel_index(offset, params[key].shape)
        orig = params[key][idx]
        params[key][idx] = orig + eps
        up = loss_fn(params)
        params[key][idx] = orig - eps
        down = loss_fn(params)
        params[key][idx] = orig
        fd = (up - down) / (2.0 * eps)
        g = grads[key][idx]
        rel = abs(fd - g) / max(abs(fd), abs(g), 1e-8)
        max_rel = max(max_rel, rel)
        if rel < 1e-4:
            ok += 1
    return ok / len(picks), max_rel
