"""Weight-2 modular symbols for Gamma_0(M), Hecke operators, and certified
level raising of rational eigenforms modulo prime powers."""

from .arith import ResidueRing, is_prime, primes_up_to, residue_ring
from .eigen import EigenSystem, ModSystem, decompose, level_systems, reduce_system, residually_irreducible_screen, sturm_bound
from .hecke import degeneracy_down, degeneracy_up, hecke_matrix, new_subspace, old_new_split
from .modsym import ModSymSpace, cuspidal_subspace, genus_x0, modsym_space
from .raising import RaiseCertificate, certify, raising_primes, verify

__version__ = "0.1.0"

__all__ = [
    "EigenSystem",
    "ModSymSpace",
    "ModSystem",
    "RaiseCertificate",
    "ResidueRing",
    "certify",
    "cuspidal_subspace",
    "decompose",
    "degeneracy_down",
    "degeneracy_up",
    "genus_x0",
    "hecke_matrix",
    "is_prime",
    "level_systems",
    "modsym_space",
    "new_subspace",
    "old_new_split",
    "primes_up_to",
    "raising_primes",
    "reduce_system",
    "residually_irreducible_screen",
    "residue_ring",
    "sturm_bound",
    "verify",
]
