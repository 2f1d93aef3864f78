from .atmf import FeatureBundle, FormatError, decode_bundle, encode_bundle, load_feature_bundle, save_feature_bundle
from .dataset import VideoQADataset, load_dataset, save_dataset, stack_bundles
from .manifest import (
    QTYPES,
    ManifestError,
    QuestionRecord,
    load_question_manifest,
    parse_record,
    write_question_manifest,
)
from .synth import SynthConfig, SynthConfigError, SyntheticDataset, generate_synthetic_dataset, split_dataset
from .transforms import ClipPermutation, draw_shuffle, middle_clip_index, middle_clip_view, shuffle_clips

__all__ = [
    "FeatureBundle", "FormatError", "decode_bundle", "encode_bundle", "load_feature_bundle",
    "save_feature_bundle", "VideoQADataset", "load_dataset", "save_dataset", "stack_bundles",
    "QTYPES", "ManifestError", "QuestionRecord", "load_question_manifest", "parse_record",
    "write_question_manifest", "SynthConfig", "SynthConfigError", "SyntheticDataset",
    "generate_synthetic_dataset", "split_dataset", "ClipPermutation", "draw_shuffle", "middle_clip_index",
    "middle_clip_view", "shuffle_clips",
]
