"""Ground-truth corpora: on-disk format, splitting and a synthetic generator."""

from .generate import GenSpec, InfeasibleSpec, generate, generate_corpus
from .truth import FunctionLabel, GroundTruthContract, MalformedGroundTruth, kfold, load, save, split

__all__ = [
    "FunctionLabel", "GenSpec", "GroundTruthContract", "InfeasibleSpec", "MalformedGroundTruth",
    "generate", "generate_corpus", "kfold", "load", "save", "split",
]
