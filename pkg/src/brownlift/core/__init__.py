"""Structured operators on index-set Hilbert spaces."""
from .indexsets import DisjointUnion, Fin, IndexSet, Int, Nat, Product, StructuralError
from .operators import (BilateralShift, BlockMatrix, DenseMatrix, Diagonal, DirectSum, Identity,
                        Inclusion, Operator, ScalarMul, Tensor, UnilateralShift, ZeroOp, adjoint,
                        compose, scalar, shift)
from .probes import DEFAULT, Check, ToleranceProfile, norm_bounds, probe_equal, window_psd
from .vectors import SupportedVector
from .weights import BergerMeasure, WeightSequence
