"""Exact linear algebra over Q, Z and Z/l^n."""

from .integer import hnf, integer_left_kernel, lattice_contains, saturate
from .rational import MatrixQ, charpoly, kernel_q, restrict, rref_q, solve_left, vstack
from .zmod import (
    HowellForm,
    MatrixR,
    howell,
    is_primitive,
    kernel_r,
    refine_kernel,
    simultaneous_kernel_r,
    span_contains,
)

__all__ = [
    "HowellForm",
    "MatrixQ",
    "MatrixR",
    "charpoly",
    "hnf",
    "howell",
    "integer_left_kernel",
    "is_primitive",
    "kernel_q",
    "kernel_r",
    "lattice_contains",
    "refine_kernel",
    "restrict",
    "rref_q",
    "saturate",
    "simultaneous_kernel_r",
    "solve_left",
    "span_contains",
    "vstack",
]
