"""Outer protocol: ramp the total time until the ground state is identified.

For each total time T one adiabatic evolution runs from the product coherent
state.  If some basis state ends with probability above one half it is a
candidate ground state; the candidate only becomes a verdict after the same
T is re-run with a four-times tighter step tolerance and the identification
survives.  That guard matters in practice: intermediate T values can show a
transient majority on a state that is not the asymptotic ground state.

All decision arithmetic is exact.  The ground energy is the squared integer
value of the polynomial at the identified occupation tuple, never the float
expectation value, so ``has_solution`` is free of rounding doubt.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .diophantine import DiophantinePolynomial, MultiIndex
from .fock import (
    CoherentParams,
    GrowthPolicy,
    QuantumState,
    TruncatedFockSpace,
    coherent_state,
    make_growth_hook,
    min_truncation,
)
from .hamiltonian import diag_hp
from .integrator import EvolutionAbortedError, IntegratorConfig, evolve

__all__ = [
    "EvolutionConfig",
    "RunRecord",
    "SweepPolicy",
    "Verdict",
    "decide",
    "identify_ground",
    "initial_state",
    "observables",
    "run_single",
    "sweep",
]

logger = logging.getLogger(__name__)

_SAMPLING_SEED_BASE = 0x51EED


@dataclass(frozen=True)
class SweepPolicy:
    """Which total times to try, and whether to stop at the first verdict."""

    T_values: tuple[float, ...] | None = None
    T0: float = 10.0
    factor: float = 1.5
    T_max: float = 5000.0
    stop_on_majority: bool = True

    def __post_init__(self):
        if self.T_values is not None:
            if not self.T_values:
                raise ValueError("explicit T list must be nonempty")
            if any(t <= 0 for t in self.T_values):
                raise ValueError("total times must be positive")
            if list(self.T_values) != sorted(self.T_values):
                raise ValueError("explicit T list must be ascending")
        else:
            if self.T0 <= 0 or self.T_max < self.T0:
                raise ValueError("need 0 < T0 <= T_max")
            if self.factor <= 1.0:
                raise ValueError("ramp factor must exceed 1")

    def times(self) -> list[float]:
        if self.T_values is not None:
            return list(self.T_values)
        values = []
        t = self.T0
        while t <= self.T_max * (1.0 + 1e-9):
            values.append(t)
            t *= self.factor
            if len(values) > 500:
                raise ValueError("ramp generates more than 500 total times")
        return values


@dataclass(frozen=True)
class EvolutionConfig:
    """Everything one sweep needs besides the polynomial itself."""

    alphas: tuple[complex, ...] | None = None
    epsilon: float = 1e-2
    cutoff_floors: tuple[int, ...] = ()
    sweep: SweepPolicy = field(default_factory=SweepPolicy)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    growth: GrowthPolicy = field(default_factory=GrowthPolicy)
    max_dimension: int = 100_000
    shots: int = 0
    top_k: int = 5
    jobs: int = 1
    refine_divisor: float = 4.0
    step_log_dir: Path | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.shots < 0:
            raise ValueError("shots must be nonnegative")
        if self.top_k < 1:
            raise ValueError("top_k must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")
        if self.refine_divisor <= 1.0:
            raise ValueError("refine_divisor must exceed 1")

    def resolved_alphas(self, num_modes: int) -> tuple[complex, ...]:
        if self.alphas is None:
            return (2.0 + 0.0j,) * num_modes
        if len(self.alphas) == 1:
            return tuple(self.alphas) * num_modes
        if len(self.alphas) != num_modes:
            raise ValueError(
                f"{len(self.alphas)} displacements for {num_modes} modes"
            )
        return tuple(self.alphas)

    def resolved_floors(self, num_modes: int) -> tuple[int, ...]:
        if not self.cutoff_floors:
            return (0,) * num_modes
        if len(self.cutoff_floors) == 1:
            return tuple(self.cutoff_floors) * num_modes
        if len(self.cutoff_floors) != num_modes:
            raise ValueError(
                f"{len(self.cutoff_floors)} cutoff floors for {num_modes} modes"
            )
        return tuple(self.cutoff_floors)


@dataclass(frozen=True)
class RunRecord:
    """Summary of one evolution at a fixed total time."""

    T: float
    top_states: tuple[tuple[MultiIndex, float], ...]
    expectation_n: tuple[float, ...]
    expectation_hp: float
    final_norm: float
    total_steps: int
    final_cutoffs: tuple[int, ...]


@dataclass(frozen=True)
class Verdict:
    """The decision extracted from a stable majority identification."""

    ground: MultiIndex
    ground_probability: float
    ground_energy: int
    has_solution: bool
    witness: MultiIndex | None


def initial_state(
    polynomial: DiophantinePolynomial, config: EvolutionConfig
) -> QuantumState:
    """Coherent start on the smallest admissible truncation.

    Per mode the cutoff is the larger of the epsilon-derived minimum and the
    configured floor.
    """
    k = polynomial.num_unknowns
    if k < 1:
        raise ValueError("the polynomial has no unknowns; nothing to decide")
    alphas = config.resolved_alphas(k)
    floors = config.resolved_floors(k)
    cutoffs = tuple(
        max(min_truncation(alpha, config.epsilon), floor)
        for alpha, floor in zip(alphas, floors)
    )
    space = TruncatedFockSpace(cutoffs)
    if space.dimension > config.max_dimension:
        raise ValueError(
            f"initial dimension {space.dimension} exceeds the cap {config.max_dimension}"
        )
    return coherent_state(CoherentParams(alphas, config.epsilon), space)


def identify_ground(psi: QuantumState) -> tuple[MultiIndex, float] | None:
    """The unique basis state holding more than half the probability, if any."""
    probabilities = psi.probabilities()
    index = int(np.argmax(probabilities))
    top = float(probabilities[index])
    if top > 0.5:
        return psi.space.multi_index(index), top
    return None


def observables(
    psi: QuantumState, polynomial: DiophantinePolynomial
) -> tuple[tuple[float, ...], float]:
    """Expected occupation per mode and expected problem energy."""
    from .fock import occupation_vectors

    probabilities = psi.probabilities()
    expectation_n = tuple(
        float(probabilities @ occ)
        for occ in occupation_vectors(psi.space.cutoffs)
    )
    diagonal = diag_hp(polynomial, psi.space)
    return expectation_n, float(probabilities @ diagonal)


def decide(
    ground: MultiIndex, polynomial: DiophantinePolynomial, probability: float
) -> Verdict:
    """Exact decision for an identified ground state.

    The energy is the squared integer polynomial value; the equation is
    solvable exactly when that integer is zero, and then the identified
    occupation tuple is itself the witness.
    """
    if not probability > 0.5:
        raise ValueError(f"identification needs probability > 1/2, got {probability}")
    value = polynomial.evaluate(ground)
    energy = value * value
    solvable = energy == 0
    return Verdict(
        ground=tuple(ground),
        ground_probability=probability,
        ground_energy=energy,
        has_solution=solvable,
        witness=tuple(ground) if solvable else None,
    )


def _top_states(
    space: TruncatedFockSpace, probabilities: np.ndarray, count: int
) -> tuple[tuple[MultiIndex, float], ...]:
    order = np.argsort(-probabilities, kind="stable")[:count]
    return tuple(
        (space.multi_index(int(i)), float(probabilities[int(i)])) for i in order
    )


def _sampled_probabilities(
    probabilities: np.ndarray, shots: int, seed: int
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    weights = np.clip(probabilities, 0.0, None)
    weights = weights / weights.sum()
    counts = rng.multinomial(shots, weights)
    return counts / float(shots)


def run_single(
    polynomial: DiophantinePolynomial,
    config: EvolutionConfig,
    total_time: float,
    dt_tolerance: float | None = None,
    seed: int = _SAMPLING_SEED_BASE,
) -> tuple[RunRecord, QuantumState]:
    """One evolution at a fixed total time, summarized as a RunRecord.

    Top-state probabilities come from the exact amplitudes unless sampling
    is enabled, in which case they are frequencies out of ``shots`` draws;
    the expectation values always use the exact amplitudes.
    """
    integrator_config = config.integrator
    if dt_tolerance is not None:
        integrator_config = replace(integrator_config, dt_tolerance=dt_tolerance)
    psi0 = initial_state(polynomial, config)
    alphas = config.resolved_alphas(polynomial.num_unknowns)
    hook = make_growth_hook(config.growth, config.max_dimension)
    log_handle = None
    if config.step_log_dir is not None:
        label = f"{total_time:g}"
        if dt_tolerance is not None:
            # refined re-runs get their own trace instead of clobbering
            label += f"_tol{dt_tolerance:g}"
        log_handle = open(Path(config.step_log_dir) / f"steps_T{label}.log", "w")
    try:
        psi, reports = evolve(
            polynomial,
            alphas,
            psi0,
            total_time,
            integrator_config,
            growth=hook,
            step_log=log_handle,
        )
    finally:
        if log_handle is not None:
            log_handle.close()
    probabilities = psi.probabilities()
    if config.shots > 0:
        reported = _sampled_probabilities(probabilities, config.shots, seed)
    else:
        reported = probabilities
    expectation_n, expectation_hp = observables(psi, polynomial)
    record = RunRecord(
        T=total_time,
        top_states=_top_states(psi.space, reported, config.top_k),
        expectation_n=expectation_n,
        expectation_hp=expectation_hp,
        final_norm=psi.norm(),
        total_steps=len(reports),
        final_cutoffs=psi.space.cutoffs,
    )
    return record, psi


def _candidate(record: RunRecord) -> tuple[MultiIndex, float] | None:
    if record.top_states and record.top_states[0][1] > 0.5:
        return record.top_states[0]
    return None


def _attempt(args) -> tuple[RunRecord, QuantumState] | EvolutionAbortedError:
    # Module-level so a process pool can ship it to workers.
    polynomial, config, total_time, seed = args
    try:
        return run_single(polynomial, config, total_time, seed=seed)
    except EvolutionAbortedError as exc:
        return exc


def sweep(
    polynomial: DiophantinePolynomial,
    config: EvolutionConfig,
    on_run: Callable[[RunRecord, QuantumState], None] | None = None,
) -> tuple[list[RunRecord], Verdict | None]:
    """Run evolutions over the time ramp and look for a stable majority.

    Emits one record per completed total time, in ascending T order.  The
    first identification that survives the refined re-run becomes the
    verdict; with ``stop_on_majority`` the ramp stops there.  Runs that
    abort (dimension cap, step underflow) are logged and skipped.  With
    ``jobs > 1`` the evolutions of a chunk run concurrently, but records are
    always merged in T order so results do not depend on scheduling.
    """
    if polynomial.num_unknowns < 1:
        raise ValueError("the polynomial has no unknowns; nothing to decide")
    times = config.sweep.times()
    records: list[RunRecord] = []
    verdict: Verdict | None = None

    index = 0
    while index < len(times):
        chunk = times[index : index + max(1, config.jobs)]
        first_of_chunk = index
        jobs_args = [
            (polynomial, config, t, _SAMPLING_SEED_BASE + 2 * (first_of_chunk + i))
            for i, t in enumerate(chunk)
        ]
        if config.jobs > 1 and len(chunk) > 1:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                results = list(pool.map(_attempt, jobs_args))
        else:
            results = [_attempt(a) for a in jobs_args]
        completed: list[tuple[int, float, RunRecord]] = []
        for offset, (total_time, outcome) in enumerate(zip(chunk, results)):
            if isinstance(outcome, EvolutionAbortedError):
                logger.warning("run at T = %g aborted: %s", total_time, outcome)
                continue
            record, psi = outcome
            records.append(record)
            completed.append((offset, total_time, record))
            if on_run is not None:
                on_run(record, psi)
            logger.info(
                "T = %g: top state %s with probability %.4f (%d steps, cutoffs %s)",
                total_time,
                record.top_states[0][0] if record.top_states else None,
                record.top_states[0][1] if record.top_states else 0.0,
                record.total_steps,
                record.final_cutoffs,
            )
        for offset, total_time, record in completed:
            if verdict is not None:
                break
            candidate = _candidate(record)
            if candidate is None:
                continue
            refined_tolerance = config.integrator.dt_tolerance / config.refine_divisor
            try:
                refined_record, _ = run_single(
                    polynomial,
                    config,
                    total_time,
                    dt_tolerance=refined_tolerance,
                    seed=_SAMPLING_SEED_BASE + 2 * (first_of_chunk + offset) + 1,
                )
            except EvolutionAbortedError as exc:
                logger.warning(
                    "refined re-run at T = %g aborted (%s); identification not stable",
                    total_time,
                    exc,
                )
                continue
            refined_candidate = _candidate(refined_record)
            if refined_candidate is not None and refined_candidate[0] == candidate[0]:
                verdict = decide(candidate[0], polynomial, refined_candidate[1])
                logger.info(
                    "stable identification at T = %g: ground %s, energy %d",
                    total_time,
                    verdict.ground,
                    verdict.ground_energy,
                )
            else:
                logger.info(
                    "identification at T = %g did not survive step refinement "
                    "(%s vs %s); continuing the ramp",
                    total_time,
                    candidate[0],
                    refined_candidate[0] if refined_candidate else None,
                )
        if verdict is not None and config.sweep.stop_on_majority:
            break
        index += len(chunk)
    return records, verdict
