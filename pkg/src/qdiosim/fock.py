"""Truncated multi-mode Fock spaces, states, and the growth policy.

Basis states are occupation tuples (n_1, ..., n_K) with 0 <= n_i <= m_i.
The linear index runs with mode 1 fastest, so a flat amplitude vector can be
viewed as a K-dimensional grid with ``reshape(shape, order="F")``.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "CoherentParams",
    "DimensionCapError",
    "GrowthPolicy",
    "QuantumState",
    "TruncatedFockSpace",
    "boundary_mass",
    "coherent_state",
    "dump_state",
    "grow",
    "load_state",
    "make_growth_hook",
    "min_cutoffs",
    "min_truncation",
]

logger = logging.getLogger(__name__)


class DimensionCapError(RuntimeError):
    """Raised when growing a space would exceed the configured dimension cap."""


@dataclass(frozen=True)
class TruncatedFockSpace:
    """K bosonic modes with per-mode occupation cutoffs."""

    cutoffs: tuple[int, ...]

    def __post_init__(self):
        if not self.cutoffs:
            raise ValueError("a Fock space needs at least one mode")
        if any(not isinstance(m, int) or m < 0 for m in self.cutoffs):
            raise ValueError(f"cutoffs must be nonnegative ints, got {self.cutoffs!r}")

    @property
    def num_modes(self) -> int:
        return len(self.cutoffs)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(m + 1 for m in self.cutoffs)

    @property
    def dimension(self) -> int:
        d = 1
        for m in self.cutoffs:
            d *= m + 1
        return d

    def linear_index(self, occupations: Sequence[int]) -> int:
        """Flat index of a basis state; mode 1 varies fastest."""
        occupations = tuple(occupations)
        if len(occupations) != self.num_modes:
            raise ValueError(
                f"{len(occupations)} occupations for {self.num_modes} modes"
            )
        index = 0
        for n, m in zip(reversed(occupations), reversed(self.cutoffs)):
            if not 0 <= n <= m:
                raise ValueError(f"occupation {occupations!r} outside cutoffs {self.cutoffs!r}")
            index = index * (m + 1) + n
        return index

    def multi_index(self, index: int) -> tuple[int, ...]:
        """Inverse of :meth:`linear_index`."""
        if not 0 <= index < self.dimension:
            raise ValueError(f"index {index} outside dimension {self.dimension}")
        occupations = []
        for m in self.cutoffs:
            index, n = divmod(index, m + 1)
            occupations.append(n)
        return tuple(occupations)


@lru_cache(maxsize=256)
def occupation_vectors(cutoffs: tuple[int, ...]) -> tuple[np.ndarray, ...]:
    """Per-mode occupation number of every basis state, as float arrays."""
    space = TruncatedFockSpace(cutoffs)
    grids = np.unravel_index(np.arange(space.dimension), space.shape, order="F")
    vectors = []
    for g in grids:
        v = g.astype(float)
        v.setflags(write=False)
        vectors.append(v)
    return tuple(vectors)


@dataclass
class QuantumState:
    """A complex amplitude vector over a truncated Fock space."""

    space: TruncatedFockSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.space.dimension,):
            raise ValueError(
                f"amplitude vector of shape {self.amplitudes.shape} for dimension "
                f"{self.space.dimension}"
            )

    def norm(self) -> float:
        """Euclidean norm, with an exactly-rounded sum of squares.

        Using a compensated sum makes the norm insensitive to how the
        amplitudes happen to be laid out, so zero-padding a state can never
        change it even in the last bit.
        """
        squares = self.amplitudes.real**2 + self.amplitudes.imag**2
        return math.sqrt(math.fsum(squares.tolist()))

    def normalize(self) -> QuantumState:
        n = self.norm()
        if n == 0.0 or not math.isfinite(n):
            raise ValueError(f"cannot normalize state with norm {n}")
        return QuantumState(self.space, self.amplitudes / n)

    def probabilities(self) -> np.ndarray:
        return self.amplitudes.real**2 + self.amplitudes.imag**2

    def overlap(self, other: QuantumState) -> complex:
        if other.space.cutoffs != self.space.cutoffs:
            raise ValueError("states live on different spaces")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def copy(self) -> QuantumState:
        return QuantumState(self.space, self.amplitudes.copy())


@dataclass(frozen=True)
class CoherentParams:
    """Displacement per mode and the accepted truncation deficit."""

    alphas: tuple[complex, ...]
    epsilon: float = 1e-2

    def __post_init__(self):
        if not self.alphas:
            raise ValueError("need at least one displacement")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")


def min_truncation(alpha: complex, epsilon: float) -> int:
    """Smallest cutoff m whose truncated coherent norm deficit.

    The truncated squared norm is the Poisson(|alpha|^2) cumulative sum
    S_m = exp(-|a|^2) * sum_{n<=m} |a|^(2n) / n!, and the deficit is
    1 - sqrt(S_m).  Returns the smallest m with deficit <= epsilon.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    a2 = abs(alpha) ** 2
    target = (1.0 - epsilon) ** 2
    if a2 == 0.0:
        return 0
    total = 0.0
    m = 0
    while True:
        log_term = -a2 + m * math.log(a2) - math.lgamma(m + 1)
        total += math.exp(log_term)
        if total >= target:
            return m
        m += 1
        if m > a2 + 20.0 * math.sqrt(a2) + 60.0:
            # The Poisson mass lives within a few standard deviations of
            # |alpha|^2; getting here means epsilon is below float resolution.
            raise ValueError(
                f"cannot reach deficit {epsilon} for |alpha|^2 = {a2} in floats"
            )


def min_cutoffs(params: CoherentParams) -> tuple[int, ...]:
    """Per-mode minimal cutoffs for the requested deficit."""
    return tuple(min_truncation(a, params.epsilon) for a in params.alphas)


def coherent_state(params: CoherentParams, space: TruncatedFockSpace) -> QuantumState:
    """Product coherent state, truncated to ``space`` and renormalized.

    The cutoff of every mode must be at least :func:`min_truncation` for the
    requested epsilon.  Amplitudes are assembled through logarithms of the
    factorials so large displacements cannot overflow.
    """
    if len(params.alphas) != space.num_modes:
        raise ValueError(
            f"{len(params.alphas)} displacements for {space.num_modes} modes"
        )
    for i, (alpha, m) in enumerate(zip(params.alphas, space.cutoffs)):
        needed = min_truncation(alpha, params.epsilon)
        if m < needed:
            raise ValueError(
                f"cutoff {m} of mode {i + 1} is below the minimum {needed} "
                f"for epsilon {params.epsilon}"
            )
    factors = []
    for alpha, m in zip(params.alphas, space.cutoffs):
        n = np.arange(m + 1)
        a = abs(alpha)
        if a == 0.0:
            v = np.zeros(m + 1, dtype=np.complex128)
            v[0] = 1.0
        else:
            log_mag = -0.5 * a * a + n * math.log(a) - 0.5 * np.array(
                [math.lgamma(k + 1) for k in range(m + 1)]
            )
            phase = cmath.phase(complex(alpha))
            v = np.exp(log_mag) * np.exp(1j * phase * n)
        factors.append(v)
    flat = factors[0]
    for v in factors[1:]:
        # Later modes vary slower, matching the linear index convention.
        flat = np.kron(v, flat)
    state = QuantumState(space, flat)
    raw = state.norm()
    logger.debug(
        "coherent state on cutoffs %s: pre-normalization deficit %.3e",
        space.cutoffs,
        1.0 - raw,
    )
    return state.normalize()


def grow(
    state: QuantumState,
    delta: Sequence[int],
    max_dimension: int | None = None,
) -> QuantumState:
    """Zero-pad a state into a space enlarged by ``delta`` per mode.

    Amplitudes are copied bit-for-bit, so the norm is exactly preserved.
    Raises :class:`DimensionCapError` if the enlarged dimension would pass
    ``max_dimension``.
    """
    delta = tuple(int(d) for d in delta)
    if len(delta) != state.space.num_modes:
        raise ValueError(f"{len(delta)} increments for {state.space.num_modes} modes")
    if any(d < 0 for d in delta):
        raise ValueError(f"increments must be nonnegative, got {delta!r}")
    if all(d == 0 for d in delta):
        return state.copy()
    new_space = TruncatedFockSpace(
        tuple(m + d for m, d in zip(state.space.cutoffs, delta))
    )
    if max_dimension is not None and new_space.dimension > max_dimension:
        raise DimensionCapError(
            f"growing to cutoffs {new_space.cutoffs} needs dimension "
            f"{new_space.dimension}, above the cap {max_dimension}"
        )
    flat = np.zeros(new_space.dimension, dtype=np.complex128)
    target = flat.reshape(new_space.shape, order="F")
    source = state.amplitudes.reshape(state.space.shape, order="F")
    target[tuple(slice(0, m + 1) for m in state.space.cutoffs)] = source
    return QuantumState(new_space, flat)


def boundary_mass(state: QuantumState, shell: int) -> float:
    """Probability held within ``shell`` levels of any cutoff.

    Counts every basis state with n_i > m_i - shell in at least one mode.
    If the shell exceeds some cutoff the whole squared norm is returned.
    """
    if not isinstance(shell, int) or shell < 1:
        raise ValueError(f"shell must be a positive int, got {shell!r}")
    amplitudes = state.amplitudes
    total = float(np.vdot(amplitudes, amplitudes).real)
    interior_extent = [m - shell + 1 for m in state.space.cutoffs]
    if any(extent <= 0 for extent in interior_extent):
        return total
    grid = amplitudes.reshape(state.space.shape, order="F")
    interior = grid[tuple(slice(0, extent) for extent in interior_extent)]
    inside = float(np.vdot(interior, interior).real)
    return max(0.0, total - inside)


@dataclass(frozen=True)
class GrowthPolicy:
    """When and how much to enlarge the space during an evolution.

    ``threshold`` mode grows only when the boundary shell holds more than
    ``threshold`` probability; ``always`` grows after every accepted step;
    ``never`` keeps the space fixed.
    """

    mode: str = "threshold"
    threshold: float = 1e-8
    shell: int = 2
    step: int = 2

    def __post_init__(self):
        if self.mode not in ("threshold", "always", "never"):
            raise ValueError(f"unknown growth mode {self.mode!r}")
        if self.step < 1:
            raise ValueError("growth step must be positive")
        if self.shell < 1:
            raise ValueError("boundary shell must be positive")


def make_growth_hook(
    policy: GrowthPolicy, max_dimension: int | None = None
) -> Callable[[QuantumState, float], QuantumState] | None:
    """Bind a growth policy into a hook suitable for the integrator."""
    if policy.mode == "never":
        return None

    def hook(state: QuantumState, t: float) -> QuantumState:
        if policy.mode == "always" or (
            boundary_mass(state, policy.shell) > policy.threshold
        ):
            delta = (policy.step,) * state.space.num_modes
            return grow(state, delta, max_dimension)
        return state

    return hook


def dump_state(state: QuantumState, destination) -> None:
    """Write one line per basis state: occupations then re and im parts.

    ``destination`` may be an open text stream or a filesystem path.
    """
    if not hasattr(destination, "write"):
        with open(destination, "w") as stream:
            dump_state(state, stream)
        return
    for i in range(state.space.dimension):
        occupations = state.space.multi_index(i)
        amplitude = state.amplitudes[i]
        head = " ".join(str(n) for n in occupations)
        destination.write(f"{head} {amplitude.real:.17g} {amplitude.imag:.17g}\n")


def load_state(source) -> QuantumState:
    """Rebuild a state from :func:`dump_state` output (stream or path)."""
    if not hasattr(source, "read"):
        with open(source) as stream:
            return load_state(stream)
    entries: dict[tuple[int, ...], complex] = {}
    num_modes = None
    for line in source:
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ValueError(f"malformed state line {line!r}")
        occupations = tuple(int(p) for p in parts[:-2])
        if num_modes is None:
            num_modes = len(occupations)
        elif len(occupations) != num_modes:
            raise ValueError("inconsistent mode count in state dump")
        entries[occupations] = complex(float(parts[-2]), float(parts[-1]))
    if not entries:
        raise ValueError("empty state dump")
    cutoffs = tuple(
        max(occ[i] for occ in entries) for i in range(num_modes)
    )
    space = TruncatedFockSpace(cutoffs)
    flat = np.zeros(space.dimension, dtype=np.complex128)
    for occupations, amplitude in entries.items():
        flat[space.linear_index(occupations)] = amplitude
    return QuantumState(space, flat)
