"""Multi-stream video encoder, text encoder and answer scoring."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from functools import cached_property

import numpy as np

from ..data.atmf import FeatureBundle
from ..tensorcore import (
    ConfigError,
    Tensor,
    attention,
    concat,
    init_linear,
    init_msa,
    linear,
    matmul,
    mean_pool,
    mlp,
    multi_head_self_attention,
    normalize_rows,
    reshape,
    sinusoidal_table,
    take_rows,
)
from ..tensorcore.nn import merge_heads, split_heads
from .vocab import Vocab, pad_batch

STAGES = ("init", "accl", "finetune")


@dataclass(frozen=True)
class ModelConfig:
    d_object: int
    d_frame: int
    d_motion: int
    vocab: tuple[str, ...]
    d_model: int = 512
    heads: int = 8
    t_max: int = 16
    text_max_len: int = 64
    use_pos_embed: bool = True
    open_ended: bool = False
    # global answer list, used only in open-ended mode
    answers: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vocab", tuple(self.vocab))
        object.__setattr__(self, "answers", tuple(self.answers))
        if self.d_model % self.heads:
            raise ConfigError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if min(self.d_object, self.d_frame, self.d_motion, self.d_model, self.t_max, self.text_max_len) < 1:
            raise ConfigError("all dimensions must be positive")
        if self.open_ended and not self.answers:
            raise ConfigError("open-ended mode needs a global answer list")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vocab"] = list(self.vocab)
        d["answers"] = list(self.answers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, Tensor]
    stage: str = "init"

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    @cached_property
    def vocab(self) -> Vocab:
        return Vocab(self.config.vocab)

    def with_tensors(self, tensors: dict[str, Tensor], stage: str | None = None) -> "ModelParams":
        return replace(self, tensors=tensors, stage=stage or self.stage)


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    rng = np.random.default_rng(seed)
    d = config.d_model
    t: dict[str, Tensor] = {}
    t.update(init_linear(rng, config.d_object, d, "video.proj_o"))
    t.update(init_linear(rng, config.d_frame, d, "video.proj_r"))
    t.update(init_linear(rng, config.d_motion, d, "video.proj_m"))
    t.update(init_linear(rng, 3 * d, d, "video.mlp.fc1"))
    t.update(init_linear(rng, d, d, "video.mlp.fc2"))
    t.update(init_msa(rng, d, config.heads, "video.msa"))
    t["video.pos"] = Tensor(sinusoidal_table(config.t_max, d), requires_grad=True, name="video.pos")
    t["text.embed"] = Tensor(rng.normal(size=(len(config.vocab), d)), requires_grad=True, name="text.embed")
    t["text.pos"] = Tensor(sinusoidal_table(config.text_max_len, d), requires_grad=True, name="text.pos")
    t.update(init_msa(rng, d, config.heads, "text.msa"))
    if config.open_ended:
        t.update(init_msa(rng, d, config.heads, "ci"))
        # zero output projection: the cross-modal block starts as the identity
        for name in ("ci.o.W", "ci.o.b"):
            t[name] = Tensor(np.zeros(t[name].shape), requires_grad=True, name=name)
    return ModelParams(config, t)


def frozen(params: ModelParams) -> ModelParams:
    """Copy of ``params`` whose tensors do not record gradients (for inference)."""
    return params.with_tensors({k: Tensor(v.data, name=k) for k, v in params.tensors.items()})


@dataclass
class ScoredAnswers:
    scores: np.ndarray
    chosen: int = field(init=False)

    def __post_init__(self):
        # np.argmax returns the first maximum, i.e. the lowest index on ties
        self.chosen = int(np.argmax(self.scores))


# ---------------------------------------------------------------------------
# video


def video_tokens(params: ModelParams, f_o, f_r, f_m, use_pos_embed: bool | None = None) -> Tensor:
    """Per-clip fused features after self-attention, ``(B, T, d_model)``."""
    cfg = params.config
    f_o, f_r, f_m = (np.asarray(a, dtype=np.float64) for a in (f_o, f_r, f_m))
    t = f_o.shape[1]
    if t > cfg.t_max:
        raise ConfigError(f"video has T={t} clips but the position table covers t_max={cfg.t_max}")
    for name, arr, dim in (("object", f_o, cfg.d_object), ("frame", f_r, cfg.d_frame), ("motion", f_m, cfg.d_motion)):
        if arr.ndim != 3 or arr.shape[1] != t or arr.shape[2] != dim:
            raise ConfigError(f"{name} stream has shape {arr.shape}, expected (B, {t}, {dim})")
    use_pos = cfg.use_pos_embed if use_pos_embed is None else use_pos_embed
    x = concat(
        [
            linear(Tensor(f_o), params.tensors, "video.proj_o"),
            linear(Tensor(f_r), params.tensors, "video.proj_r"),
            linear(Tensor(f_m), params.tensors, "video.proj_m"),
        ],
        axis=-1,
    )
    x = mlp(x, params.tensors, "video.mlp")
    pos = params["video.pos"] if use_pos else None
    return multi_head_self_attention(x, params.tensors, "video.msa", cfg.heads, pos_embed=pos, exact_order=True)


def encode_video_batch(params: ModelParams, f_o, f_r, f_m, use_pos_embed: bool | None = None) -> Tensor:
    return mean_pool(video_tokens(params, f_o, f_r, f_m, use_pos_embed), axis=1)


def encode_video(bundle: FeatureBundle, params: ModelParams, use_pos_embed: bool | None = None) -> Tensor:
    """Global video vector ``f_v`` of shape ``(d_model,)``."""
    f = encode_video_batch(params, bundle.f_o[None], bundle.f_r[None], bundle.f_m[None], use_pos_embed)
    return reshape(f, (params.config.d_model,))


# ---------------------------------------------------------------------------
# text


def encode_text_batch(params: ModelParams, ids: np.ndarray, mask: np.ndarray) -> Tensor:
    cfg = params.config
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= len(cfg.vocab)):
        bad = int(ids[(ids < 0) | (ids >= len(cfg.vocab))][0])
        raise ValueError(f"token id {bad} outside vocabulary of size {len(cfg.vocab)}")
    if ids.shape[1] > cfg.text_max_len:
        raise ConfigError(f"text of {ids.shape[1]} tokens exceeds text_max_len={cfg.text_max_len}")
    x = take_rows(params["text.embed"], ids)
    h = multi_head_self_attention(
        x, params.tensors, "text.msa", cfg.heads, pos_embed=params["text.pos"], key_mask=mask
    )
    return mean_pool(h, axis=1, mask=mask)


def encode_texts(params: ModelParams, seqs: list[list[int]]) -> Tensor:
    ids, mask = pad_batch(seqs)
    return encode_text_batch(params, ids, mask)


def encode_text(token_ids, params: ModelParams) -> Tensor:
    """Text vector ``f_q`` of shape ``(d_model,)`` for one token-id sequence."""
    return reshape(encode_texts(params, [list(token_ids)]), (params.config.d_model,))


# ---------------------------------------------------------------------------
# multiple choice


def encode_qa(params: ModelParams, qa_seqs: list[list[list[int]]]) -> Tensor:
    """``(B, A, d)`` encodings of each question's ``[q; a]`` sequences.

    Every question in the batch must have the same number of candidates.
    """
    n_cand = {len(c) for c in qa_seqs}
    if len(n_cand) != 1:
        raise ValueError(f"batch mixes candidate counts {sorted(n_cand)}")
    a = n_cand.pop()
    flat = encode_texts(params, [s for cands in qa_seqs for s in cands])
    return reshape(flat, (len(qa_seqs), a, params.config.d_model))


def similarity_logits(f_v: Tensor, f_qa: Tensor) -> Tensor:
    """Dot products ``(B, A)`` of ``f_v`` rows ``(B, d)`` with ``f_qa`` ``(B, A, d)``."""
    b, a, _ = f_qa.shape
    return reshape(matmul(reshape(f_v, (b, 1, -1)), f_qa.transpose(0, 2, 1)), (b, a))


def qa_logits(params: ModelParams, f_v: Tensor, qa_seqs: list[list[list[int]]]) -> Tensor:
    return similarity_logits(f_v, encode_qa(params, qa_seqs))


def score_candidates(f_v, question: str, candidates, params: ModelParams) -> ScoredAnswers:
    if len(candidates) == 0:
        raise ValueError("no candidate answers to score")
    fv = f_v.data if isinstance(f_v, Tensor) else np.asarray(f_v, dtype=np.float64)
    vocab = params.vocab
    f_qa = encode_texts(params, [vocab.encode_pair(question, a) for a in candidates]).data
    return ScoredAnswers(f_qa @ fv)


# ---------------------------------------------------------------------------
# open-ended


def cross_modal_interaction(params: ModelParams, tokens: Tensor, f_q: Tensor) -> Tensor:
    """Video tokens ``(B, T, d)`` attend to the question vector ``(B, d)``; residual output."""
    if "ci.q.W" not in params.tensors:
        raise ConfigError("model has no cross-modal interaction parameters (open_ended=False)")
    b, t, d = tokens.shape
    heads = params.config.heads
    q = split_heads(linear(tokens, params.tensors, "ci.q"), heads)
    kv_in = reshape(f_q, (b, 1, d))
    k = split_heads(linear(kv_in, params.tensors, "ci.k"), heads)
    v = split_heads(linear(kv_in, params.tensors, "ci.v"), heads)
    mixed = linear(merge_heads(attention(q, k, v, exact_order=True)), params.tensors, "ci.o")
    return tokens + mixed


def encode_video_oe_batch(params: ModelParams, f_o, f_r, f_m, f_q: Tensor, use_pos_embed: bool | None = None) -> Tensor:
    tokens = video_tokens(params, f_o, f_r, f_m, use_pos_embed)
    return mean_pool(cross_modal_interaction(params, tokens, f_q), axis=1)


def encode_video_oe(bundle: FeatureBundle, question: str, params: ModelParams, use_pos_embed: bool | None = None) -> Tensor:
    """Question-conditioned video vector ``f_qv`` of shape ``(d_model,)``."""
    f_q = encode_texts(params, [params.vocab.encode(question)])
    f = encode_video_oe_batch(params, bundle.f_o[None], bundle.f_r[None], bundle.f_m[None], f_q, use_pos_embed)
    return reshape(f, (params.config.d_model,))


def oe_logits(f_qv: Tensor, f_q: Tensor, f_a: Tensor) -> Tensor:
    """``(B, N)`` joint scores: ``<f_qv, f_a> * cos(f_q, f_a)``."""
    video_term = matmul(f_qv, f_a.T)
    text_term = matmul(normalize_rows(f_q), normalize_rows(f_a).T)
    return video_term * text_term


def score_oe(f_qv, question: str, answer: str, params: ModelParams) -> float:
    fqv = f_qv.data if isinstance(f_qv, Tensor) else np.asarray(f_qv, dtype=np.float64)
    enc = encode_texts(params, [params.vocab.encode(question), params.vocab.encode(answer)]).data
    fq, fa = enc[0], enc[1]
    nq, na = np.linalg.norm(fq), np.linalg.norm(fa)
    cos = 0.0 if nq == 0 or na == 0 else float(fq @ fa) / (nq * na)
    return float(fqv @ fa) * cos
