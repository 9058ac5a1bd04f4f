"""Matrix-free Hamiltonians on truncated Fock spaces.

The problem Hamiltonian is diagonal in the occupation basis with entry
D(n)^2 at each lattice point n, where D is the Diophantine polynomial; its
ground energy is zero exactly when the equation has a nonnegative integer
solution.  The driver Hamiltonian is the displaced number operator
sum_i (adag_i - conj(alpha_i))(a_i - alpha_i), whose ground state is the
product coherent state with displacements alpha_i.  Both operators act on
flat amplitude vectors through per-mode array slices; no matrix is ever
materialized here.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .diophantine import DiophantinePolynomial
from .fock import QuantumState, TruncatedFockSpace, occupation_vectors

__all__ = [
    "DiagonalOverflowError",
    "InitialHamiltonian",
    "LeakageCounter",
    "ProblemHamiltonian",
    "apply_h",
    "apply_hi",
    "apply_hp",
    "diag_hp",
    "interpolated_diagonal",
]

# Largest integer a float64 can hold exactly; diagonal entries past this
# would silently lose precision, so they are rejected instead.
_EXACT_FLOAT_LIMIT = 2**53


class DiagonalOverflowError(OverflowError):
    """A squared polynomial value does not fit exactly into a float64."""


@dataclass
class LeakageCounter:
    """Accumulated squared norm dropped at the truncation boundary."""

    total: float = 0.0

    def add(self, amount: float) -> None:
        self.total += amount


def diag_hp(polynomial: DiophantinePolynomial, space: TruncatedFockSpace) -> np.ndarray:
    """Diagonal of the problem Hamiltonian: D(n)^2 over the basis.

    Every entry is computed in exact integer arithmetic first and only then
    converted to float, which is loss-free up to 2^53.
    """
    if polynomial.num_unknowns != space.num_modes:
        raise ValueError(
            f"{polynomial.num_unknowns} unknowns for {space.num_modes} modes"
        )
    diagonal = np.empty(space.dimension, dtype=float)
    for i in range(space.dimension):
        occupations = space.multi_index(i)
        value = polynomial.evaluate(occupations)
        square = value * value
        if square > _EXACT_FLOAT_LIMIT:
            raise DiagonalOverflowError(
                f"D{occupations}^2 = {square} does not fit exactly in a float64"
            )
        diagonal[i] = float(square)
    diagonal.setflags(write=False)
    return diagonal


@dataclass(frozen=True, eq=False)
class ProblemHamiltonian:
    """The squared polynomial as a diagonal operator on a fixed space."""

    polynomial: DiophantinePolynomial
    space: TruncatedFockSpace
    diagonal: np.ndarray

    @classmethod
    def build(
        cls, polynomial: DiophantinePolynomial, space: TruncatedFockSpace
    ) -> ProblemHamiltonian:
        return cls(polynomial, space, diag_hp(polynomial, space))


@dataclass(frozen=True)
class InitialHamiltonian:
    """Displacements defining the driver Hamiltonian."""

    alphas: tuple[complex, ...]

    def __post_init__(self):
        if not self.alphas:
            raise ValueError("need at least one displacement")


@lru_cache(maxsize=128)
def _flat_couplings(cutoffs: tuple[int, ...]):
    """Per-mode hop index arrays on the flat (mode-1-fastest) layout.

    For mode k with stride p, the annihilation/creation pair couples flat
    index i (occupation n < m) to i + p with weight sqrt(n + 1).  The top
    shell (n = m) is where raising would leave the truncation.
    """
    occs = occupation_vectors(cutoffs)
    couplings = []
    stride = 1
    for occ, m in zip(occs, cutoffs):
        below = np.nonzero(occ < m)[0]
        lower = below.astype(np.intp)
        upper = lower + stride
        coeff = np.sqrt(occ[lower] + 1.0)
        top = np.nonzero(occ == m)[0].astype(np.intp)
        for arr in (lower, upper, coeff, top):
            arr.setflags(write=False)
        couplings.append((lower, upper, coeff, top, m + 1))
        stride *= m + 1
    return tuple(couplings)


def _add_hops(
    out: np.ndarray,
    amps: np.ndarray,
    cutoffs: tuple[int, ...],
    alphas: tuple[complex, ...],
    weight: float,
    leakage: LeakageCounter | None,
) -> None:
    """In-place -weight*(alpha adag + conj(alpha) a) per mode, plus leakage.

    The dropped raising amplitude at the top shell is weight*alpha*sqrt(m+1)
    per element there; its squared norm goes to the counter.
    """
    for (lower, upper, coeff, top, levels), alpha in zip(
        _flat_couplings(cutoffs), alphas
    ):
        if alpha == 0:
            continue
        scaled = weight * alpha
        if lower.size:
            out[upper] -= scaled * (coeff * amps[lower])
            out[lower] -= np.conj(scaled) * (coeff * amps[upper])
        if leakage is not None:
            edge = amps[top]
            leakage.add(
                abs(scaled) ** 2 * levels * float(np.vdot(edge, edge).real)
            )


def apply_hi(
    hi: InitialHamiltonian,
    psi: QuantumState,
    leakage: LeakageCounter | None = None,
) -> QuantumState:
    """Apply the driver Hamiltonian.

    Per mode the operator expands to N - alpha*adag - conj(alpha)*a + |alpha|^2.
    Raising the top level n = m would leave the truncation; that amplitude is
    dropped and its squared norm added to ``leakage``.
    """
    space = psi.space
    if len(hi.alphas) != space.num_modes:
        raise ValueError(
            f"{len(hi.alphas)} displacements for {space.num_modes} modes"
        )
    amps = psi.amplitudes
    out = _hi_diagonal(space.cutoffs, hi.alphas) * amps
    _add_hops(out, amps, space.cutoffs, hi.alphas, 1.0, leakage)
    return QuantumState(space, out)


def apply_hp(hp: ProblemHamiltonian, psi: QuantumState) -> QuantumState:
    """Apply the diagonal problem Hamiltonian."""
    if hp.space.cutoffs != psi.space.cutoffs:
        raise ValueError("state and Hamiltonian live on different spaces")
    return QuantumState(psi.space, hp.diagonal * psi.amplitudes)


def _apply_h_flat(
    s: float,
    hp: ProblemHamiltonian,
    hi: InitialHamiltonian,
    amps: np.ndarray,
    leakage: LeakageCounter | None = None,
) -> np.ndarray:
    """Unchecked flat-array core of apply_h; the integrator's hot path."""
    cutoffs = hp.space.cutoffs
    out = interpolated_diagonal(s, hp, hi) * amps
    if s < 1.0:
        _add_hops(out, amps, cutoffs, hi.alphas, 1.0 - s, leakage)
    return out


def apply_h(
    s: float,
    hp: ProblemHamiltonian,
    hi: InitialHamiltonian,
    psi: QuantumState,
    leakage: LeakageCounter | None = None,
) -> QuantumState:
    """Apply the interpolated Hamiltonian (1-s) H_driver + s H_problem."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"schedule point must lie in [0, 1], got {s}")
    if hp.space.cutoffs != psi.space.cutoffs:
        raise ValueError("state and Hamiltonian live on different spaces")
    return QuantumState(psi.space, _apply_h_flat(s, hp, hi, psi.amplitudes, leakage))


@lru_cache(maxsize=128)
def _hi_diagonal(cutoffs: tuple[int, ...], alphas: tuple[complex, ...]) -> np.ndarray:
    diagonal = np.zeros(len(occupation_vectors(cutoffs)[0]), dtype=float)
    for occ, alpha in zip(occupation_vectors(cutoffs), alphas):
        diagonal += occ + abs(alpha) ** 2
    diagonal.setflags(write=False)
    return diagonal


def interpolated_diagonal(
    s: float, hp: ProblemHamiltonian, hi: InitialHamiltonian
) -> np.ndarray:
    """Diagonal part of the interpolated Hamiltonian, used as preconditioner."""
    driver = _hi_diagonal(hp.space.cutoffs, hi.alphas)
    if s == 0.0:
        return driver
    if s == 1.0:
        return hp.diagonal
    return (1.0 - s) * driver + s * hp.diagonal
