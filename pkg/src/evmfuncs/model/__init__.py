"""Two-level bi-LSTM + CRF labeler for internal function entries."""

from .baseline import baseline_entries
from .crf import crf_nll, marginals, viterbi
from .predict import EntryPrediction, predict, predict_all, probabilities
from .store import ModelFileError, load_model, save_model
from .tokens import VOCAB, preprocess
from .train import DivergedTraining, EmptyContract, LabeledSequence, TrainConfig, train

__all__ = [
    "DivergedTraining", "EmptyContract", "EntryPrediction", "LabeledSequence", "ModelFileError",
    "TrainConfig", "VOCAB", "baseline_entries", "crf_nll", "load_model", "marginals", "predict",
    "predict_all", "preprocess", "probabilities", "save_model", "train", "viterbi",
]
