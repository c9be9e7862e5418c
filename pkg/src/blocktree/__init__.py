"""Block-triangular totally full rank matrices over prime fields and the tree codes they generate."""

from .blocks import (
    BlockMatrix,
    VerificationReport,
    bcn_strong_check,
    pascal_odd_columns,
    pascal_triangular,
    random_consistent,
    verify_int_totally_nonsingular,
    verify_totally_full_rank,
)
from .codes import (
    TreeCode,
    encode,
    interleave_identity,
    min_distance_exhaustive,
    normal_form,
    relative_weight,
    singleton_witness,
)
from .linalg import PrimeField, det_int, kernel_vector, rank
from .patterns import BlockShape, IndexSelection, Pattern, make_triangular

__version__ = "0.1.0"

__all__ = [
    "BlockMatrix",
    "BlockShape",
    "IndexSelection",
    "Pattern",
    "PrimeField",
    "TreeCode",
    "VerificationReport",
    "bcn_strong_check",
    "det_int",
    "encode",
    "interleave_identity",
    "kernel_vector",
    "make_triangular",
    "min_distance_exhaustive",
    "normal_form",
    "pascal_odd_columns",
    "pascal_triangular",
    "random_consistent",
    "rank",
    "relative_weight",
    "singleton_witness",
    "verify_int_totally_nonsingular",
    "verify_totally_full_rank",
]
