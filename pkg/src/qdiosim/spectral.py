"""Dense exact-diagonalization oracles for small truncated spaces.

Everything here assembles explicit matrices and diagonalizes them, entirely
independent of the matrix-free operator path, so it can serve as a
cross-check and as an exact reference propagator.  Dimensions are capped to
keep the cubic-cost routines honest about their intended scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .diophantine import DiophantinePolynomial
from .fock import QuantumState, TruncatedFockSpace
from .hamiltonian import diag_hp

__all__ = [
    "GapProfile",
    "OracleCapError",
    "dense_h",
    "exact_propagate",
    "gap_profile",
]

# Relative scale deciding when two adjacent levels count as degenerate.
_DEGENERACY_SCALE = 1e-9


class OracleCapError(RuntimeError):
    """The requested dense computation exceeds the configured cap."""


def dense_h(
    s: float,
    polynomial: DiophantinePolynomial,
    alphas: Sequence[complex],
    space: TruncatedFockSpace,
    cap: int = 4096,
) -> np.ndarray:
    """Assemble the interpolated Hamiltonian as a dense Hermitian matrix."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"schedule point must lie in [0, 1], got {s}")
    alphas = tuple(complex(a) for a in alphas)
    if len(alphas) != space.num_modes:
        raise ValueError(f"{len(alphas)} displacements for {space.num_modes} modes")
    dim = space.dimension
    if dim > cap:
        raise OracleCapError(f"dimension {dim} exceeds the dense oracle cap {cap}")

    problem_diagonal = diag_hp(polynomial, space)
    driver_diagonal = np.zeros(dim, dtype=float)
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    weight = 1.0 - s
    for i in range(dim):
        occupations = space.multi_index(i)
        acc = 0.0
        for n, alpha in zip(occupations, alphas):
            acc += n + abs(alpha) ** 2
        driver_diagonal[i] = acc
        for axis, (n, alpha, m) in enumerate(zip(occupations, alphas, space.cutoffs)):
            if n < m and alpha != 0:
                raised = list(occupations)
                raised[axis] = n + 1
                j = space.linear_index(raised)
                hop = math.sqrt(n + 1.0)
                matrix[j, i] += weight * (-alpha * hop)
                matrix[i, j] += weight * (-np.conj(alpha) * hop)
    matrix[np.diag_indices(dim)] += (1.0 - s) * driver_diagonal + s * problem_diagonal
    return matrix


@dataclass(frozen=True, eq=False)
class GapProfile:
    """Lowest levels of the interpolated Hamiltonian along a schedule grid."""

    s_values: tuple[float, ...]
    eigenvalues: np.ndarray  # shape (len(s_values), levels), ascending rows
    min_gap_s: float
    min_gap: float
    interior_degenerate: bool

    def write_csv(self, destination) -> None:
        if not hasattr(destination, "write"):
            with open(destination, "w") as handle:
                self.write_csv(handle)
            return
        levels = self.eigenvalues.shape[1]
        destination.write("s," + ",".join(f"E{j}" for j in range(levels)) + "\n")
        for s, row in zip(self.s_values, self.eigenvalues):
            destination.write(
                f"{s:.12g}," + ",".join(f"{e:.12g}" for e in row) + "\n"
            )


def gap_profile(
    polynomial: DiophantinePolynomial,
    alphas: Sequence[complex],
    space: TruncatedFockSpace,
    s_grid: Sequence[float] | None = None,
    levels: int = 4,
    cap: int = 4096,
) -> GapProfile:
    """Track the lowest eigenvalues along the interpolation schedule.

    The minimum gap is taken over interior grid points only (0 < s < 1); the
    endpoints are reported but do not enter the minimum.  A gap below
    1e-9 * max(1, |E1|) flags the interior as degenerate.
    """
    if space.dimension < 2:
        raise ValueError("gap profile needs at least a two-dimensional space")
    if s_grid is None:
        s_grid = np.linspace(0.0, 1.0, 101)
    s_values = tuple(float(s) for s in s_grid)
    if len(s_values) < 3:
        raise ValueError("schedule grid needs at least three points")
    if any(not 0.0 <= s <= 1.0 for s in s_values):
        raise ValueError("schedule grid must lie in [0, 1]")
    if not any(0.0 < s < 1.0 for s in s_values):
        raise ValueError("schedule grid has no interior points")
    tracked = min(levels + 1, space.dimension)
    rows = np.empty((len(s_values), tracked), dtype=float)
    for row, s in enumerate(s_values):
        matrix = dense_h(s, polynomial, alphas, space, cap=cap)
        rows[row] = np.linalg.eigvalsh(matrix)[:tracked]
    min_gap = math.inf
    min_gap_s = s_values[0]
    degenerate = False
    for row, s in enumerate(s_values):
        if not 0.0 < s < 1.0:
            continue
        gap = rows[row, 1] - rows[row, 0]
        if gap < min_gap:
            min_gap = gap
            min_gap_s = s
        if gap < _DEGENERACY_SCALE * max(1.0, abs(rows[row, 1])):
            degenerate = True
    return GapProfile(
        s_values=s_values,
        eigenvalues=rows[:, : min(levels, space.dimension)],
        min_gap_s=min_gap_s,
        min_gap=float(min_gap),
        interior_degenerate=degenerate,
    )


def exact_propagate(
    psi0: QuantumState,
    schedule: Iterable[tuple[float, float]],
    polynomial: DiophantinePolynomial,
    alphas: Sequence[complex],
    cap: int = 4096,
) -> QuantumState:
    """Evolve through piecewise-constant segments by eigendecomposition.

    ``schedule`` yields (s, dt) pairs; each segment applies exp(-i H(s) dt)
    exactly (to rounding), so the result is unitary to machine precision and
    serves as the reference for integrator error measurements.
    """
    psi = psi0.amplitudes.copy()
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for s, dt in schedule:
        key = float(s)
        if key not in cache:
            matrix = dense_h(key, polynomial, alphas, psi0.space, cap=cap)
            values, vectors = np.linalg.eigh(matrix)
            cache[key] = (values, vectors)
        values, vectors = cache[key]
        psi = vectors @ (np.exp(-1j * values * dt) * (vectors.conj().T @ psi))
    return QuantumState(psi0.space, psi)
