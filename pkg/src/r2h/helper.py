"""Multimodal helper model: tokenization, COS-masked transformer, MLM training, decoding.

Sequence layout is fixed-slot: inquiry tokens ending in [CLS] padded to
max_inquiry_tokens, then k_max response slots, then t_frames visual frames.
The additive attention mask has three row sections: inquiry rows attend
inquiry+visual, response rows attend inquiry+visual+response up to their own
position, and visual rows attend inquiry plus a learned conditional visual
submask C = sigmoid(f(VE)) applied as log C (multiplicative pre-softmax).
Padded frame columns and padded token columns are always disallowed.
"""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import neuralcore as nc
from .world import D_OBS, ObservationSequence

SPECIAL_TOKENS = ("[PAD]", "[MSK]", "[CLS]", "[EOS]", "[SEP]", "[UNK]")
PAD_ID, MSK_ID, CLS_ID, EOS_ID, SEP_ID, UNK_ID = range(len(SPECIAL_TOKENS))

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


class HelperError(ValueError):
    """Invalid helper configuration or input."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries diagnostics from the offending step."""


@dataclass(frozen=True)
class HelperConfig:
    layers: int = 2
    heads: int = 4
    width: int = 128
    t_frames: int = 16
    window: int = 5
    sparsity_lambda: float = 0.1
    lr: float = 1e-4
    batch_size: int = 6
    iterations: int = 5000
    seed: int = 0
    parse_by_step: bool = True
    cos_mask: bool = True
    k_max: int = 32
    max_inquiry_tokens: int = 20
    d_obs: int = D_OBS
    max_vocab: int = 512
    weight_decay: float = 0.0
    ffn_ratio: int = 4
    init_std: float = 0.02
    eval_interval: int = 1000
    eval_task_limit: int = 30
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if self.width % self.heads != 0:
            raise HelperError("width must be divisible by heads")
        if self.sparsity_lambda < 0:
            raise HelperError("sparsity coefficient must be >= 0")

    @property
    def text_len(self) -> int:
        return self.max_inquiry_tokens + self.k_max

    @property
    def seq_len(self) -> int:
        return self.text_len + self.t_frames

    @property
    def visual_offset(self) -> int:
        return self.text_len

    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        doc["lambda"] = doc.pop("sparsity_lambda")
        doc["T_frames"] = doc.pop("t_frames")
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> "HelperConfig":
        doc = dict(doc)
        if "lambda" in doc:
            doc["sparsity_lambda"] = doc.pop("lambda")
        if "T_frames" in doc:
            doc["t_frames"] = doc.pop("T_frames")
        return HelperConfig(**doc)


class Vocabulary:
    """Word-level token <-> id maps with the special tokens at fixed low ids."""

    def __init__(self, tokens: list[str]):
        if list(tokens[: len(SPECIAL_TOKENS)]) != list(SPECIAL_TOKENS):
            raise HelperError("vocabulary must begin with the special tokens")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise HelperError("duplicate vocabulary tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    @staticmethod
    def tokenize(text: str) -> list[str]:
        return _TOKEN_RE.findall(text.lower())

    @staticmethod
    def build(texts: list[str], max_size: int = 512) -> "Vocabulary":
        counts: dict[str, int] = {}
        for text in texts:
            for tok in Vocabulary.tokenize(text):
                counts[tok] = counts.get(tok, 0) + 1
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        room = max_size - len(SPECIAL_TOKENS)
        return Vocabulary(list(SPECIAL_TOKENS) + ordered[:room])

    def encode(self, text: str) -> list[int]:
        return [self.index.get(t, UNK_ID) for t in self.tokenize(text)]

    def decode(self, ids, skip_special: bool = True) -> str:
        parts: list[str] = []
        for i in ids:
            tok = self.tokens[int(i)]
            if skip_special and int(i) < len(SPECIAL_TOKENS):
                continue
            if parts and not (len(tok) == 1 and not tok.isalnum()):
                parts.append(" ")
            parts.append(tok)
        return "".join(parts)


def init_params(cfg: HelperConfig, vocab_size: int,
                rng: np.random.Generator | None = None) -> dict[str, nc.Tensor]:
    """Seeded parameter dictionary for the transformer and the conditional-mask head."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    dt = cfg.np_dtype()
    std = cfg.init_std
    d = cfg.width
    hidden = cfg.ffn_ratio * d

    def normal(*shape):
        return nc.Tensor(rng.normal(0.0, std, size=shape).astype(dt), requires_grad=True)

    def zeros(*shape):
        return nc.Tensor(np.zeros(shape, dtype=dt), requires_grad=True)

    def ones(*shape):
        return nc.Tensor(np.ones(shape, dtype=dt), requires_grad=True)

    params: dict[str, nc.Tensor] = {
        "tok_emb": normal(vocab_size, d),
        "pos_emb": normal(cfg.text_len, d),
        "vis_pos": normal(cfg.t_frames, d),
        "vis_proj": normal(cfg.d_obs, d),
        "final_ln_g": ones(d), "final_ln_b": zeros(d),
        "head_w": normal(d, vocab_size), "head_b": zeros(vocab_size),
        "cmask_w1": normal(d, d), "cmask_b1": zeros(d),
        "cmask_w2": normal(d, cfg.t_frames * cfg.t_frames),
        # negative bias starts C small: early sparsity pressure lands on the
        # bias while the weights stay free to keep useful entries alive
        "cmask_b2": nc.Tensor(np.full(cfg.t_frames * cfg.t_frames, -2.0, dtype=dt),
                              requires_grad=True),
    }
    for i in range(cfg.layers):
        params.update({
            f"L{i}_ln1_g": ones(d), f"L{i}_ln1_b": zeros(d),
            f"L{i}_wq": normal(d, d), f"L{i}_bq": zeros(d),
            f"L{i}_wk": normal(d, d), f"L{i}_bk": zeros(d),
            f"L{i}_wv": normal(d, d), f"L{i}_bv": zeros(d),
            f"L{i}_wo": normal(d, d), f"L{i}_bo": zeros(d),
            f"L{i}_ln2_g": ones(d), f"L{i}_ln2_b": zeros(d),
            f"L{i}_ffn_w1": normal(d, hidden), f"L{i}_ffn_b1": zeros(hidden),
            f"L{i}_ffn_w2": normal(hidden, d), f"L{i}_ffn_b2": zeros(d),
        })
    return params


# --- attention mask ------------------------------------------------------------

_mask_cache: dict[tuple, np.ndarray] = {}


def build_section_mask(lq: int, lr: int, validity: np.ndarray,
                       cfg: HelperConfig) -> np.ndarray:
    """Binary three-section additive mask: 0 where allowed, -inf elsewhere.

    The visual-to-visual block is left at 0 on valid columns; the conditional
    log C term is added on top of it by the caller. Cached per layout since
    batches repeat the same few shapes.
    """
    key = (lq, lr, validity[: cfg.t_frames].tobytes(),
           cfg.max_inquiry_tokens, cfg.k_max, cfg.t_frames)
    hit = _mask_cache.get(key)
    if hit is not None:
        return hit
    s = cfg.seq_len
    r0 = cfg.max_inquiry_tokens
    v0 = cfg.visual_offset
    mask = np.full((s, s), -np.inf, dtype=np.float32)
    valid_cols = v0 + np.flatnonzero(validity[: cfg.t_frames])
    # inquiry rows: own prefix plus valid visual columns
    mask[:lq, :lq] = 0.0
    mask[np.ix_(range(lq), valid_cols)] = 0.0
    # response rows: inquiry prefix, causal response prefix, valid visual columns
    for i in range(lr):
        row = r0 + i
        mask[row, :lq] = 0.0
        mask[row, r0:row + 1] = 0.0
        mask[row, valid_cols] = 0.0
    # visual rows: inquiry prefix plus the (conditionally weighted) visual block
    mask[v0:, :lq] = 0.0
    mask[np.ix_(range(v0, s), valid_cols)] = 0.0
    mask.setflags(write=False)
    if len(_mask_cache) < 4096:
        _mask_cache[key] = mask
    return mask


@dataclass
class CosAttentionMask:
    """Assembled additive mask plus the conditional submask it embeds."""

    additive: nc.Tensor          # (seq, seq) or (batch, seq, seq)
    conditional: nc.Tensor | None  # C in (0,1), shape (t, t) or (batch, t, t)
    sparsity_lambda: float


def _conditional_mask(ve: nc.Tensor, params: dict[str, nc.Tensor],
                      cfg: HelperConfig) -> tuple[nc.Tensor, nc.Tensor]:
    """(C, log C) from pooled visual embeddings; shapes (..., t, t)."""
    batched = len(ve.shape) == 3
    pooled = nc.mean_(ve, axis=1 if batched else 0)
    if not batched:
        pooled = nc.reshape(pooled, (1, cfg.width))
    h = nc.gelu(nc.add(nc.matmul(pooled, params["cmask_w1"]), params["cmask_b1"]))
    z = nc.add(nc.matmul(h, params["cmask_w2"]), params["cmask_b2"])
    t = cfg.t_frames
    shape = (z.shape[0], t, t) if batched else (t, t)
    return nc.reshape(nc.sigmoid(z), shape), nc.reshape(nc.log_sigmoid(z), shape)


def build_cos_mask(ve: nc.Tensor, lq: int, lr: int, validity: np.ndarray,
                   params: dict[str, nc.Tensor], cfg: HelperConfig) -> CosAttentionMask:
    """Single-example assembled mask; C is computed from ve when cos masking is on."""
    base = nc.Tensor(build_section_mask(lq, lr, validity, cfg).astype(ve.data.dtype))
    if not cfg.cos_mask:
        return CosAttentionMask(base, None, cfg.sparsity_lambda)
    c, log_c = _conditional_mask(ve, params, cfg)
    additive = nc.add(base, nc.pad_block(log_c, cfg.seq_len, cfg.visual_offset))
    return CosAttentionMask(additive, c, cfg.sparsity_lambda)


def sparsity_loss(c: nc.Tensor, lam: float) -> nc.Tensor:
    """lambda * sum |C_ij| (elementwise over the conditional mask)."""
    if lam < 0:
        raise HelperError(f"lambda must be >= 0, got {lam}")
    return nc.mul(nc.sum_(nc.abs_(c)), lam)


# --- encoding / batching ---------------------------------------------------------

def encode_visual(obs: ObservationSequence, params: dict[str, nc.Tensor],
                  cfg: HelperConfig) -> nc.Tensor:
    """Linear projection plus position embedding of each frame; (t_frames, width)."""
    if obs.frames.shape != (cfg.t_frames, cfg.d_obs):
        raise HelperError(
            f"observation shape {obs.frames.shape} does not match "
            f"({cfg.t_frames}, {cfg.d_obs})")
    frames = nc.Tensor(obs.frames.astype(params["vis_proj"].data.dtype))
    return nc.add(nc.matmul(frames, params["vis_proj"]), params["vis_pos"])


def mlm_corrupt(token_ids: list[int], seed: int, vocab_size: int
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mask round(0.8 n) positions, randomize round(0.1 n) others (disjoint, seeded).

    Returns (corrupted ids, corrupted positions sorted, original labels there).
    The mask count is floored at 1 so a single-token response is always masked.
    """
    ids = np.asarray(token_ids, dtype=np.int64)
    n = len(ids)
    if n < 1:
        raise HelperError("need at least one response token")
    n_mask = max(1, round(0.8 * n))
    n_rand = min(round(0.1 * n), n - n_mask)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    mask_pos = perm[:n_mask]
    rand_pos = perm[n_mask:n_mask + n_rand]
    corrupted = ids.copy()
    corrupted[mask_pos] = MSK_ID
    if n_rand > 0:
        corrupted[rand_pos] = rng.integers(len(SPECIAL_TOKENS), vocab_size, size=n_rand)
    positions = np.sort(np.concatenate([mask_pos, rand_pos]))
    return corrupted, positions, ids[positions]


@dataclass(frozen=True)
class TrainingExample:
    """One (inquiry, observations, response target) training triple, tokenized."""

    inquiry_ids: tuple[int, ...]   # ends with [CLS]
    target_ids: tuple[int, ...]    # ends with [EOS]
    frames: np.ndarray             # (t_frames, d_obs)
    validity: np.ndarray           # (t_frames,)


def encode_example(vocab: Vocabulary, cfg: HelperConfig, inquiry: str,
                   target: str, obs: ObservationSequence) -> TrainingExample:
    iq = vocab.encode(inquiry)[: cfg.max_inquiry_tokens - 1] + [CLS_ID]
    tgt = vocab.encode(target)[: cfg.k_max - 1] + [EOS_ID]
    return TrainingExample(tuple(iq), tuple(tgt), obs.frames, obs.validity)


@dataclass
class MultimodalBatch:
    ids: np.ndarray         # (B, text_len) int64
    frames: np.ndarray      # (B, t_frames, d_obs)
    validity: np.ndarray    # (B, t_frames) bool
    lq: np.ndarray          # (B,) inquiry lengths including [CLS]
    lr: np.ndarray          # (B,) response lengths including [EOS]
    label_rows: np.ndarray  # (N,) flat row index into (B * seq_len) logits
    labels: np.ndarray      # (N,) original token ids at corrupted positions


def assemble_batch(examples: list[TrainingExample], cfg: HelperConfig,
                   vocab_size: int, seed: int) -> MultimodalBatch:
    """Corrupt targets and pack fixed-slot rows; corruption seeds derive from seed."""
    b = len(examples)
    ids = np.full((b, cfg.text_len), PAD_ID, dtype=np.int64)
    frames = np.zeros((b, cfg.t_frames, cfg.d_obs), dtype=np.float64)
    validity = np.zeros((b, cfg.t_frames), dtype=bool)
    lq = np.zeros(b, dtype=np.int64)
    lr = np.zeros(b, dtype=np.int64)
    rows: list[int] = []
    labels: list[int] = []
    for k, ex in enumerate(examples):
        lq[k] = len(ex.inquiry_ids)
        lr[k] = len(ex.target_ids)
        ids[k, :lq[k]] = ex.inquiry_ids
        corrupted, positions, originals = mlm_corrupt(
            list(ex.target_ids), seed=int(np.random.SeedSequence((seed, k)).generate_state(1)[0]),
            vocab_size=vocab_size)
        ids[k, cfg.max_inquiry_tokens:cfg.max_inquiry_tokens + lr[k]] = corrupted
        frames[k] = ex.frames
        validity[k] = ex.validity
        for pos, orig in zip(positions, originals):
            rows.append(k * cfg.seq_len + cfg.max_inquiry_tokens + int(pos))
            labels.append(int(orig))
    return MultimodalBatch(ids, frames, validity, lq, lr,
                           np.asarray(rows, dtype=np.int64),
                           np.asarray(labels, dtype=np.int64))


# --- model forward ----------------------------------------------------------------

def forward(params: dict[str, nc.Tensor], cfg: HelperConfig, batch: MultimodalBatch,
            collect_attention: bool = False):
    """Logits over the whole sequence plus the conditional mask.

    Returns (logits (B, seq, vocab), C or None, attention list per layer).
    """
    dt = params["tok_emb"].data.dtype
    b = batch.ids.shape[0]
    d = cfg.width
    heads = cfg.heads
    dh = d // heads
    s = cfg.seq_len

    le = nc.add(nc.embedding_lookup(params["tok_emb"], batch.ids), params["pos_emb"])
    frames = nc.Tensor(batch.frames.astype(dt))
    ve = nc.add(nc.matmul(frames, params["vis_proj"]), params["vis_pos"])
    x = nc.concat([le, ve], axis=1)

    base = np.stack([
        build_section_mask(int(batch.lq[k]), int(batch.lr[k]), batch.validity[k], cfg)
        for k in range(b)
    ]).astype(dt)
    if cfg.cos_mask:
        c, log_c = _conditional_mask(ve, params, cfg)
        additive = nc.add(nc.Tensor(base), nc.pad_block(log_c, s, cfg.visual_offset))
    else:
        c = None
        additive = nc.Tensor(base)
    mask4 = nc.reshape(additive, (b, 1, s, s))

    attention = []
    for i in range(cfg.layers):
        h = nc.layer_norm(x, params[f"L{i}_ln1_g"], params[f"L{i}_ln1_b"])

        def project(which):
            out = nc.add(nc.matmul(h, params[f"L{i}_w{which}"]), params[f"L{i}_b{which}"])
            return nc.transpose(nc.reshape(out, (b, s, heads, dh)), (0, 2, 1, 3))

        q, k_, v = project("q"), project("k"), project("v")
        scores = nc.mul(nc.matmul(q, nc.transpose(k_, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
        probs = nc.softmax_with_additive_mask(scores, mask4)
        if collect_attention:
            attention.append(probs)
        ctx = nc.reshape(nc.transpose(nc.matmul(probs, v), (0, 2, 1, 3)), (b, s, d))
        x = nc.add(x, nc.add(nc.matmul(ctx, params[f"L{i}_wo"]), params[f"L{i}_bo"]))

        h2 = nc.layer_norm(x, params[f"L{i}_ln2_g"], params[f"L{i}_ln2_b"])
        inner = nc.gelu(nc.add(nc.matmul(h2, params[f"L{i}_ffn_w1"]), params[f"L{i}_ffn_b1"]))
        x = nc.add(x, nc.add(nc.matmul(inner, params[f"L{i}_ffn_w2"]), params[f"L{i}_ffn_b2"]))

    xf = nc.layer_norm(x, params["final_ln_g"], params["final_ln_b"])
    logits = nc.add(nc.matmul(xf, params["head_w"]), params["head_b"])
    return logits, c, attention


def batch_losses(params: dict[str, nc.Tensor], cfg: HelperConfig,
                 batch: MultimodalBatch) -> tuple[nc.Tensor, nc.Tensor]:
    """(L_MLM, L_SPARSE) for one batch, each a per-example value averaged over the batch.

    Per example, L_MLM is the summed cross entropy over its corrupted positions
    and L_SPARSE is lambda times the summed |C| entries; the sum forms keep the
    two terms at their intended relative scale.
    """
    b = batch.ids.shape[0]
    logits, c, _ = forward(params, cfg, batch)
    flat = nc.reshape(logits, (b * cfg.seq_len, len(params["head_b"].data)))
    picked = nc.take_rows(flat, batch.label_rows)
    l_mlm = nc.mul(nc.cross_entropy(picked, batch.labels, reduction="sum"), 1.0 / b)
    if c is not None and cfg.sparsity_lambda > 0:
        l_sparse = nc.mul(nc.sum_(nc.abs_(c)), cfg.sparsity_lambda / b)
    else:
        l_sparse = nc.Tensor(np.asarray(0.0, dtype=l_mlm.data.dtype))
    return l_mlm, l_sparse


def train_step(batch: MultimodalBatch, params: dict[str, nc.Tensor],
               optimizer: nc.AdamW, cfg: HelperConfig) -> tuple[float, float]:
    """One optimizer step on L_MLM + L_SPARSE; returns both loss values."""
    optimizer.zero_grad()
    l_mlm, l_sparse = batch_losses(params, cfg, batch)
    total = nc.add(l_mlm, l_sparse)
    if not np.isfinite(total.data):
        raise TrainingDiverged(
            f"non-finite loss: mlm={l_mlm.data!r} sparse={l_sparse.data!r}")
    total.backward()
    optimizer.step()
    return float(l_mlm.data), float(l_sparse.data)


# --- generation --------------------------------------------------------------------

def generate_response(params: dict[str, nc.Tensor], cfg: HelperConfig,
                      vocab: Vocabulary, inquiry: str, obs: ObservationSequence,
                      k_max: int | None = None) -> str:
    """Fill [MSK] slots left to right with argmax tokens until [EOS] or exhaustion."""
    k_max = cfg.k_max if k_max is None else min(k_max, cfg.k_max)
    iq = vocab.encode(inquiry)[: cfg.max_inquiry_tokens - 1] + [CLS_ID]
    ids = np.full((1, cfg.text_len), PAD_ID, dtype=np.int64)
    ids[0, :len(iq)] = iq
    ids[0, cfg.max_inquiry_tokens:cfg.max_inquiry_tokens + k_max] = MSK_ID
    batch = MultimodalBatch(
        ids=ids,
        frames=obs.frames[None, ...],
        validity=obs.validity[None, ...],
        lq=np.array([len(iq)]),
        lr=np.array([k_max]),
        label_rows=np.zeros(0, dtype=np.int64),
        labels=np.zeros(0, dtype=np.int64),
    )
    produced: list[int] = []
    for slot in range(k_max):
        logits, _, _ = forward(params, cfg, batch)
        row = logits.data[0, cfg.max_inquiry_tokens + slot]
        tok = int(np.argmax(row))
        if tok == EOS_ID:
            break
        produced.append(tok)
        batch.ids[0, cfg.max_inquiry_tokens + slot] = tok
    return vocab.decode(produced)


# --- persistence ---------------------------------------------------------------------

def save_helper(path: str | Path, params: dict[str, nc.Tensor], cfg: HelperConfig,
                vocab: Vocabulary, extra_meta: dict | None = None) -> None:
    meta = {"config": cfg.to_json_dict(), "vocab": vocab.tokens}
    if extra_meta:
        meta.update(extra_meta)
    nc.save_checkpoint(path, {k: v.data for k, v in params.items()}, meta)


def load_helper(path: str | Path) -> tuple[dict[str, nc.Tensor], HelperConfig, Vocabulary, dict]:
    arrays, meta = nc.load_checkpoint(path)
    cfg = HelperConfig.from_json_dict(meta["config"])
    vocab = Vocabulary(meta["vocab"])
    params = {k: nc.Tensor(v, requires_grad=True) for k, v in arrays.items()}
    extra = {k: v for k, v in meta.items() if k not in ("config", "vocab")}
    return params, cfg, vocab, extra


class NeuralHelper:
    """Helper-protocol adapter around trained parameters; reentrant for inference."""

    def __init__(self, params: dict[str, nc.Tensor], cfg: HelperConfig,
                 vocab: Vocabulary):
        self.params = params
        self.cfg = cfg
        self.vocab = vocab

    def respond(self, inquiry: str, obs, history) -> str:
        return generate_response(self.params, self.cfg, self.vocab, inquiry, obs)

    @staticmethod
    def load(path: str | Path) -> "NeuralHelper":
        params, cfg, vocab, _ = load_helper(path)
        return NeuralHelper(params, cfg, vocab)
