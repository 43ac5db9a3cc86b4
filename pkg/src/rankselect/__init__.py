"""Compressed rank/select over bitvectors with mono-block and mono-pair elimination."""

from .bitvec import BitVector, build_bitvector
from .rank import RankParams, build_rank, expected_accesses
from .select import SelectParams, build_select

__all__ = [
    "BitVector",
    "build_bitvector",
    "RankParams",
    "build_rank",
    "expected_accesses",
    "SelectParams",
    "build_select",
]
