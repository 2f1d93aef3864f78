from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .network import (
    ModelConfig,
    ModelParams,
    ScoredAnswers,
    cross_modal_interaction,
    encode_qa,
    encode_text,
    encode_text_batch,
    encode_texts,
    encode_video,
    encode_video_batch,
    encode_video_oe,
    encode_video_oe_batch,
    frozen,
    init_params,
    oe_logits,
    qa_logits,
    score_candidates,
    score_oe,
    similarity_logits,
    video_tokens,
)
from .vocab import Vocab, pad_batch

__all__ = [
    "decode_checkpoint", "encode_checkpoint", "load_checkpoint", "save_checkpoint",
    "ModelConfig", "ModelParams", "ScoredAnswers", "cross_modal_interaction", "encode_qa", "encode_text",
    "encode_text_batch", "encode_texts", "encode_video", "encode_video_batch", "encode_video_oe",
    "encode_video_oe_batch", "frozen", "init_params", "oe_logits", "qa_logits", "score_candidates",
    "score_oe", "similarity_logits", "video_tokens", "Vocab", "pad_batch",
]
