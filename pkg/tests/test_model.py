import numpy as np
import pytest

from atm.data import FeatureBundle, FormatError, shuffle_clips
from atm.model import (
    ModelConfig,
    ScoredAnswers,
    Vocab,
    decode_checkpoint,
    encode_checkpoint,
    encode_text,
    encode_video,
    encode_video_oe,
    init_params,
    load_checkpoint,
    save_checkpoint,
    score_candidates,
    score_oe,
)
from atm.tensorcore import ConfigError, Tensor

VOCAB = Vocab.build(["what happens after the man jumps", "nothing", "a red ball", "opening the door"])


def config(**kw):
    base = dict(d_object=5, d_frame=4, d_motion=3, vocab=VOCAB.tokens, d_model=8, heads=2, t_max=6)
    base.update(kw)
    return ModelConfig(**base)


def rand_bundle(seed=0, t=4, dims=(5, 4, 3)):
    rng = np.random.default_rng(seed)
    return FeatureBundle("v", *(rng.normal(size=(t, d)) for d in dims))


# --- straight-line oracles -------------------------------------------------


def np_mhsa(x, p, prefix, heads, pos=None, mask=None):
    if pos is not None:
        x = x + pos[: len(x)]
    t, d = x.shape
    dh = d // heads
    q = x @ p[f"{prefix}.q.W"] + p[f"{prefix}.q.b"]
    k = x @ p[f"{prefix}.k.W"] + p[f"{prefix}.k.b"]
    v = x @ p[f"{prefix}.v.W"] + p[f"{prefix}.v.b"]
    out = np.zeros_like(x)
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        logits = q[:, sl] @ k[:, sl].T / np.sqrt(dh)
        if mask is not None:
            logits = np.where(mask[None, :], logits, -np.inf)
        w = np.exp(logits - logits.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        out[:, sl] = w @ v[:, sl]
    return out @ p[f"{prefix}.o.W"] + p[f"{prefix}.o.b"]


def np_video_tokens(b, params, use_pos=True):
    p = {k: v.data for k, v in params.tensors.items()}
    h = np.concatenate(
        [b.f_o @ p["video.proj_o.W"] + p["video.proj_o.b"],
         b.f_r @ p["video.proj_r.W"] + p["video.proj_r.b"],
         b.f_m @ p["video.proj_m.W"] + p["video.proj_m.b"]],
        axis=1,
    )
    h = np.maximum(h @ p["video.mlp.fc1.W"] + p["video.mlp.fc1.b"], 0) @ p["video.mlp.fc2.W"] + p["video.mlp.fc2.b"]
    return np_mhsa(h, p, "video.msa", params.config.heads, p["video.pos"] if use_pos else None)


def np_text(ids, params):
    p = {k: v.data for k, v in params.tensors.items()}
    x = p["text.embed"][ids]
    return np_mhsa(x, p, "text.msa", params.config.heads, p["text.pos"]).mean(axis=0)


def test_encode_video_matches_straight_line_oracle():
    params = init_params(config(), seed=1)
    b = rand_bundle(2)
    for use_pos in (True, False):
        got = encode_video(b, params, use_pos_embed=use_pos).data
        want = np_video_tokens(b, params, use_pos).mean(axis=0)
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


def test_single_clip_video_is_value_output_projection():
    params = init_params(config(), seed=1)
    b = rand_bundle(3, t=1)
    p = {k: v.data for k, v in params.tensors.items()}
    h = np_video_tokens(b, params, use_pos=False)  # not used directly; rebuild the T=1 path by hand
    x = np.concatenate([b.f_o @ p["video.proj_o.W"] + p["video.proj_o.b"],
                        b.f_r @ p["video.proj_r.W"] + p["video.proj_r.b"],
                        b.f_m @ p["video.proj_m.W"] + p["video.proj_m.b"]], axis=1)
    x = np.maximum(x @ p["video.mlp.fc1.W"] + p["video.mlp.fc1.b"], 0) @ p["video.mlp.fc2.W"] + p["video.mlp.fc2.b"]
    x = x + p["video.pos"][:1]
    want = ((x @ p["video.msa.v.W"] + p["video.msa.v.b"]) @ p["video.msa.o.W"] + p["video.msa.o.b"])[0]
    np.testing.assert_allclose(encode_video(b, params).data, want, rtol=1e-10)
    assert h.shape == (1, 8)


def test_encode_text_matches_oracle_and_is_deterministic():
    params = init_params(config(), seed=4)
    ids = VOCAB.encode_pair("what happens after the man jumps", "a red ball")
    got = encode_text(ids, params).data
    np.testing.assert_allclose(got, np_text(np.array(ids), params), rtol=1e-10)
    assert got.tobytes() == encode_text(ids, params).data.tobytes()
    single = encode_text([5], params).data
    np.testing.assert_allclose(single, np_text(np.array([5]), params), rtol=1e-10)


def test_padding_does_not_change_text_encoding():
    from atm.model import encode_texts

    params = init_params(config(), seed=4)
    short, long_ = VOCAB.encode("nothing"), VOCAB.encode("what happens after the man jumps")
    batched = encode_texts(params, [short, long_]).data
    np.testing.assert_allclose(batched[0], encode_text(short, params).data, rtol=1e-12)


def test_one_token_change_moves_text_vector():
    a = VOCAB.encode("what happens after the man jumps")
    b = list(a)
    b[-1] = VOCAB.index["ball"]
    for seed in range(100):
        params = init_params(config(), seed=seed)
        assert not np.array_equal(encode_text(a, params).data, encode_text(b, params).data)


def test_text_rejects_unknown_id():
    params = init_params(config(), seed=0)
    with pytest.raises(ValueError, match="outside vocabulary"):
        encode_text([len(VOCAB) + 3], params)


def test_video_errors():
    params = init_params(config(t_max=3), seed=0)
    with pytest.raises(ConfigError, match="t_max"):
        encode_video(rand_bundle(t=4), params)
    with pytest.raises(ConfigError, match="stream"):
        encode_video(rand_bundle(t=2, dims=(5, 4, 7)), params)
    with pytest.raises(ConfigError):
        config(d_model=9, heads=2)


def test_permutation_invariance_without_position_embedding():
    params = init_params(config(), seed=5)
    b = rand_bundle(6, t=6)
    ref = encode_video(b, params, use_pos_embed=False).data.tobytes()
    ref_pos = encode_video(b, params).data.tobytes()
    changed = 0
    for seed in range(30):
        s, _ = shuffle_clips(b, seed)
        assert encode_video(s, params, use_pos_embed=False).data.tobytes() == ref
        changed += encode_video(s, params).data.tobytes() != ref_pos
    assert changed == 30


# --- scoring ---------------------------------------------------------------


def test_scored_answers_tie_break_and_orthogonal():
    assert ScoredAnswers(np.array([0.0, 0.0, 0.0])).chosen == 0
    assert ScoredAnswers(np.array([1.0, 3.0, 3.0])).chosen == 1


def test_score_candidates_hand_dots():
    params = init_params(config(), seed=7)
    cands = ["nothing", "a red ball", "opening the door", "the man", "jumps"]
    q = "what happens after the man jumps"
    f_v = np.arange(8.0) / 10
    got = score_candidates(f_v, q, cands, params)
    want = [float(np_text(np.array(VOCAB.encode_pair(q, a)), params) @ f_v) for a in cands]
    np.testing.assert_allclose(got.scores, want, rtol=1e-10)
    scaled = score_candidates(f_v * 3.5, q, cands, params)
    np.testing.assert_allclose(scaled.scores, np.array(want) * 3.5, rtol=1e-10)
    assert scaled.chosen == got.chosen
    zero = score_candidates(np.zeros(8), q, cands, params)
    assert np.all(zero.scores == 0) and zero.chosen == 0
    with pytest.raises(ValueError):
        score_candidates(f_v, q, [], params)


def oe_config():
    return config(open_ended=True, answers=("nothing", "a red ball", "opening the door"))


def test_open_ended_zero_ci_is_plain_video_encoding():
    params = init_params(oe_config(), seed=8)
    b = rand_bundle(9)
    np.testing.assert_allclose(
        encode_video_oe(b, "what happens after the man jumps", params).data, encode_video(b, params).data, rtol=1e-12
    )


def test_open_ended_straight_line_oracle_and_invariance():
    params = init_params(oe_config(), seed=8)
    rng = np.random.default_rng(0)
    tensors = dict(params.tensors)
    for name in ("ci.o.W", "ci.o.b"):
        tensors[name] = Tensor(rng.normal(size=tensors[name].shape), requires_grad=True)
    params = params.with_tensors(tensors)
    p = {k: v.data for k, v in tensors.items()}
    b = rand_bundle(10)
    q = "what happens after the man jumps"
    tokens = np_video_tokens(b, params)
    fq = np_text(np.array(VOCAB.encode(q)), params)
    # one key: attention weights are all 1, so each token receives o(v(f_q))
    v = fq @ p["ci.v.W"] + p["ci.v.b"]
    want = (tokens + v @ p["ci.o.W"] + p["ci.o.b"]).mean(axis=0)
    np.testing.assert_allclose(encode_video_oe(b, q, params).data, want, rtol=1e-10)
    ref = encode_video_oe(b, q, params, use_pos_embed=False).data.tobytes()
    for seed in range(10):
        s, _ = shuffle_clips(b, seed)
        assert encode_video_oe(s, q, params, use_pos_embed=False).data.tobytes() == ref


def test_score_oe_hand_arithmetic():
    params = init_params(oe_config(), seed=11)
    q, a = "what happens after the man jumps", "a red ball"
    fq = np_text(np.array(VOCAB.encode(q)), params)
    fa = np_text(np.array(VOCAB.encode(a)), params)
    f_qv = np.linspace(-1, 1, 8)
    cos = fq @ fa / (np.linalg.norm(fq) * np.linalg.norm(fa))
    assert score_oe(f_qv, q, a, params) == pytest.approx(float(f_qv @ fa) * cos, rel=1e-10)
    assert score_oe(2 * f_qv, q, a, params) == pytest.approx(2 * score_oe(f_qv, q, a, params), rel=1e-12)


def test_oe_requires_ci_params():
    params = init_params(config(), seed=0)
    with pytest.raises(ConfigError):
        encode_video_oe(rand_bundle(), "what happens", params)
    with pytest.raises(ConfigError):
        config(open_ended=True)


# --- checkpoint ------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    params = init_params(oe_config(), seed=12)
    save_checkpoint(params, tmp_path / "c.atmc")
    back = load_checkpoint(tmp_path / "c.atmc")
    assert back.config == params.config and back.stage == "init"
    assert sorted(back.tensors) == sorted(params.tensors)
    for name, t in params.tensors.items():
        np.testing.assert_array_equal(back[name].data, t.data.astype(np.float32))
    # float32 storage is a fixed point after one round trip
    assert encode_checkpoint(back) == encode_checkpoint(decode_checkpoint(encode_checkpoint(back)))


@pytest.mark.parametrize("damage", ["magic", "truncate", "crc", "tiny"])
def test_checkpoint_corruption(damage):
    raw = bytearray(encode_checkpoint(init_params(config(), seed=0)))
    if damage == "magic":
        raw[0] = ord("X")
    elif damage == "truncate":
        raw = raw[:100]
    elif damage == "crc":
        raw[50] ^= 0xFF
    else:
        raw = raw[:7]
    with pytest.raises(FormatError):
        decode_checkpoint(bytes(raw))
