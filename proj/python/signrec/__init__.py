"""Video sign-language recognition: synthetic corpora, CNN and CNN-LSTM models."""

from ._signrec import (
    Adam,
    CnnLstm,
    FormatError,
    IndexError,
    InputError,
    IoError,
    MicroCnn,
    NumericError,
    ParseError,
    ShapeError,
    SignrecError,
    TypeTagError,
    ValidationError,
    conv2d,
    cross_entropy,
    gen_synthetic,
    load_frames,
    load_manifest,
    load_model,
    lstm_forward,
    matmul,
    maxpool2d,
    read_feature_file,
    relu,
    run_cli,
    softmax,
    stratified_split,
    subsample_indices,
    write_feature_file,
)

__all__ = [
    "Adam",
    "CnnLstm",
    "FormatError",
    "IndexError",
    "InputError",
    "IoError",
    "MicroCnn",
    "NumericError",
    "ParseError",
    "ShapeError",
    "SignrecError",
    "TypeTagError",
    "ValidationError",
    "conv2d",
    "cross_entropy",
    "gen_synthetic",
    "load_frames",
    "load_manifest",
    "load_model",
    "lstm_forward",
    "matmul",
    "maxpool2d",
    "read_feature_file",
    "relu",
    "run_cli",
    "softmax",
    "stratified_split",
    "subsample_indices",
    "write_feature_file",
]
