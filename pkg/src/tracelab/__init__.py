"""Approximate reconstruction of binary strings from deletion-channel traces."""

from .bits import Bits, Partition, RunSeq, density, from_runs, hamming_distance, runs
from .channel import ChannelParams, is_subsequence, sample_trace, sample_traces
from .classes import ClassKind, ClassSpec, generate, validate_class
from .distance import edit_distance, edit_distance_banded, min_partition_mismatch_bruteforce, partition_edit_witness
from .distinguish import LikelihoodModel, embedding_count, ml_decide, trace_likelihood, traces_to_distinguish
from .reconstruct import GapParams, ReconReport, Status, trace_count

__version__ = "0.1.0"

__all__ = [
    "Bits",
    "Partition",
    "RunSeq",
    "density",
    "from_runs",
    "hamming_distance",
    "runs",
    "ChannelParams",
    "is_subsequence",
    "sample_trace",
    "sample_traces",
    "ClassKind",
    "ClassSpec",
    "generate",
    "validate_class",
    "edit_distance",
    "edit_distance_banded",
    "min_partition_mismatch_bruteforce",
    "partition_edit_witness",
    "LikelihoodModel",
    "embedding_count",
    "ml_decide",
    "trace_likelihood",
    "traces_to_distinguish",
    "GapParams",
    "ReconReport",
    "Status",
    "trace_count",
]
