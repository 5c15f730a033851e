"""Spike-gated graph neural networks for discrete dynamic graphs."""

from .errors import (AlignmentError, ConfigError, DataError, DimensionError, NumericError, ParseError,
                     RangeError, SignnError, StateError)
from .graph import (DynamicGraph, EdgeStreamFormat, SbmConfig, Snapshot, degree, degree_increment_series,
                    generate_burst, generate_sbm, load_edge_stream, write_edge_stream, write_labels)
from .model import SignnModel
from .sampling import build_plan, mtg_indices, sample_neighbors
from .training import TrainConfig, metrics_dict, run_ablation, train

__version__ = "0.1.0"
