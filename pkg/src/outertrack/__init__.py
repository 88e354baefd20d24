"""Exact computations with folding and unfolding sequences of graph maps."""

__version__ = "0.1.0"

from .construction import ConstructionParams, Gamma, big_F, closed_form_M, elementary_maps
from .graphs import EdgePath, MarkedGraph, Morphism, TrainTrack
from .matrices import ExactMatrix, transition_matrix

__all__ = ["ConstructionParams", "EdgePath", "ExactMatrix", "Gamma", "MarkedGraph",
           "Morphism", "TrainTrack", "big_F", "closed_form_M", "elementary_maps",
           "transition_matrix", "__version__"]
