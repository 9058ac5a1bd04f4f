"""Command-line front end.

Three modes share one configuration surface:

* ``sweep``        parse the equation, ramp the total time, write the per-run
                   table plus the final verdict,
* ``gap-profile``  diagonalize the interpolated operator on an s-grid and
                   write the spectrum table,
* ``oracle-check`` brute-force the equation over the truncation box and
                   cross-check the diagonal problem operator entry by entry.

Configuration comes from flags, optionally layered over a line-oriented
``key = value`` file (``#`` starts a comment); flags win over file entries.
All numeric output uses ``%.12g`` with a ``.`` decimal separator so reruns
with an identical configuration produce byte-identical files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .adiabatic import EvolutionConfig, RunRecord, SweepPolicy, Verdict, sweep
from .diophantine import (
    DiophantinePolynomial,
    ParseError,
    brute_force_search,
    parse,
)
from .fock import GrowthPolicy, QuantumState, dump_state, min_truncation
from .hamiltonian import diag_hp
from .integrator import IntegratorConfig
from .spectral import gap_profile

__all__ = ["RunConfig", "build_run_config", "main", "run"]

logger = logging.getLogger(__name__)

_MODES = ("sweep", "gap-profile", "oracle-check")


@dataclass(frozen=True)
class RunConfig:
    equation: str
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    mode: str = "sweep"
    out_dir: Path = Path(".")
    dump_state_path: Path | None = None
    step_logs: bool = False

    def __post_init__(self):
        if not self.equation.strip():
            raise ValueError("equation must be nonempty")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {', '.join(_MODES)}")


def _fmt(value: float) -> str:
    return format(float(value), ".12g")


def _parse_complex_pair(text: str) -> complex:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 're,im', got {text!r}")
    return complex(float(parts[0]), float(parts[1]))


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def read_config_file(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for line_number, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_number}: expected 'key = value'")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdiosim",
        description=(
            "Decide solvability of an integer polynomial equation in "
            "nonnegative unknowns by simulated adiabatic evolution."
        ),
    )
    parser.add_argument("--config", type=Path, help="key = value configuration file")
    parser.add_argument("--equation", help="polynomial equation, e.g. 'x*y + x + 4*y - 11'")
    parser.add_argument(
        "--alpha",
        action="append",
        metavar="RE,IM",
        help="per-mode displacement; repeat per unknown or give one for all",
    )
    parser.add_argument("--eps", type=float, help="truncation tail budget in (0,1)")
    parser.add_argument(
        "--initial-cutoff",
        action="append",
        type=int,
        metavar="M",
        help="per-mode cutoff floor; repeat per unknown or give one for all",
    )
    parser.add_argument("--T0", type=float, help="first total time of the ramp")
    parser.add_argument("--T-factor", type=float, help="geometric ramp factor")
    parser.add_argument("--T-max", type=float, help="ramp budget")
    parser.add_argument(
        "--T-list", metavar="T1,T2,...", help="explicit ascending total times (overrides the ramp)"
    )
    parser.add_argument("--dt-tol", type=float, help="per-step local error tolerance")
    parser.add_argument("--solver-tol", type=float, help="linear solver relative residual")
    parser.add_argument(
        "--grow-always",
        action="store_true",
        default=None,
        help="grow every mode by 2 after every accepted step",
    )
    parser.add_argument(
        "--growth-threshold",
        type=float,
        help="boundary-mass trigger for growth (inf disables growth)",
    )
    parser.add_argument("--max-dim", type=int, help="hard cap on the state dimension")
    parser.add_argument("--jobs", type=int, help="concurrent evolutions per ramp chunk")
    parser.add_argument("--mode", choices=_MODES, help="sweep (default), gap-profile, oracle-check")
    parser.add_argument("--out-dir", type=Path, help="directory for output files")
    parser.add_argument("--dump-state", type=Path, help="write the last final state to this file")
    parser.add_argument("--shots", type=int, help="sample reported probabilities from N draws")
    return parser


def build_run_config(argv: list[str] | None = None) -> RunConfig:
    """Merge flags over the optional config file into a validated RunConfig."""
    args = _build_parser().parse_args(argv)
    entries = read_config_file(args.config) if args.config else {}

    def pick(flag_value, key: str, convert, default):
        if flag_value is not None:
            return flag_value
        if key in entries:
            return convert(entries[key])
        return default

    equation = pick(args.equation, "equation", str, None)
    if equation is None:
        raise ValueError("an equation is required (--equation or config file)")

    alphas = None
    if args.alpha is not None:
        alphas = tuple(_parse_complex_pair(a) for a in args.alpha)
    elif "alpha" in entries:
        alphas = tuple(
            _parse_complex_pair(a.strip()) for a in entries["alpha"].split(";") if a.strip()
        )

    floors: tuple[int, ...] = ()
    if args.initial_cutoff is not None:
        floors = tuple(args.initial_cutoff)
    elif "initial_cutoff" in entries:
        floors = tuple(int(v) for v in entries["initial_cutoff"].split(";") if v.strip())
    if any(f < 0 for f in floors):
        raise ValueError("cutoff floors must be nonnegative")

    T_values = None
    t_list_text = pick(args.T_list, "T_list", str, None)
    if t_list_text is not None:
        T_values = tuple(float(v) for v in t_list_text.split(",") if v.strip())
    sweep_policy = SweepPolicy(
        T_values=T_values,
        T0=pick(args.T0, "T0", float, 10.0),
        factor=pick(args.T_factor, "T_factor", float, 1.5),
        T_max=pick(args.T_max, "T_max", float, 5000.0),
        # config-file only: figure reproductions want the whole curve
        stop_on_majority=pick(None, "stop_on_majority", _parse_bool, True),
    )

    integrator = IntegratorConfig(
        dt_tolerance=pick(args.dt_tol, "dt_tol", float, 1e-3),
        solver_tolerance=pick(args.solver_tol, "solver_tol", float, 1e-10),
    )

    grow_always = pick(args.grow_always, "grow_always", _parse_bool, False)
    threshold = pick(args.growth_threshold, "growth_threshold", float, 1e-8)
    if grow_always:
        growth = GrowthPolicy(mode="always")
    else:
        growth = GrowthPolicy(mode="threshold", threshold=threshold)

    evolution = EvolutionConfig(
        alphas=alphas,
        epsilon=pick(args.eps, "eps", float, 1e-2),
        cutoff_floors=floors,
        sweep=sweep_policy,
        integrator=integrator,
        growth=growth,
        max_dimension=pick(args.max_dim, "max_dim", int, 100_000),
        shots=pick(args.shots, "shots", int, 0),
        jobs=pick(args.jobs, "jobs", int, 1),
    )
    return RunConfig(
        equation=equation,
        evolution=evolution,
        mode=pick(args.mode, "mode", str, "sweep"),
        out_dir=pick(args.out_dir, "out_dir", Path, Path(".")),
        dump_state_path=pick(args.dump_state, "dump_state", Path, None),
        step_logs=pick(None, "step_logs", _parse_bool, False),
    )


def _state_cell(occupations, probability: float) -> str:
    return ":".join(str(n) for n in occupations) + "=" + _fmt(probability)


def _cutoffs_cell(cutoffs) -> str:
    return ":".join(str(m) for m in cutoffs)


def write_records_csv(
    path: Path, records: list[RunRecord], polynomial: DiophantinePolynomial, top_k: int
) -> None:
    header = ["T"]
    header += [f"top{i + 1}" for i in range(top_k)]
    header += [f"N_{name}" for name in polynomial.unknowns]
    header += ["HP", "norm", "steps", "cutoffs"]
    lines = [",".join(header)]
    for record in records:
        cells = [_fmt(record.T)]
        for i in range(top_k):
            if i < len(record.top_states):
                occupations, probability = record.top_states[i]
                cells.append(_state_cell(occupations, probability))
            else:
                cells.append("")
        cells += [_fmt(v) for v in record.expectation_n]
        cells += [
            _fmt(record.expectation_hp),
            _fmt(record.final_norm),
            str(record.total_steps),
            _cutoffs_cell(record.final_cutoffs),
        ]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_verdict_txt(path: Path, verdict: Verdict | None) -> None:
    if verdict is None:
        path.write_text("verdict = none\n")
        return
    lines = [
        "ground = " + ":".join(str(n) for n in verdict.ground),
        "ground_probability = " + _fmt(verdict.ground_probability),
        f"E_g = {verdict.ground_energy}",
        "has_solution = " + ("true" if verdict.has_solution else "false"),
        "witness = "
        + (":".join(str(n) for n in verdict.witness) if verdict.witness else "none"),
    ]
    path.write_text("\n".join(lines) + "\n")


def _resolved_cutoffs(polynomial: DiophantinePolynomial, evolution: EvolutionConfig):
    alphas = evolution.resolved_alphas(polynomial.num_unknowns)
    floors = evolution.resolved_floors(polynomial.num_unknowns)
    return alphas, tuple(
        max(min_truncation(alpha, evolution.epsilon), floor)
        for alpha, floor in zip(alphas, floors)
    )


def _run_sweep(polynomial: DiophantinePolynomial, config: RunConfig) -> int:
    last_state: list[QuantumState] = []

    def keep_state(record: RunRecord, psi: QuantumState) -> None:
        last_state[:] = [psi]

    evolution = config.evolution
    if config.step_logs:
        # Per-run step traces; T appears in each file name so runs never
        # clobber each other even with a parallel ramp.
        evolution = replace(evolution, step_log_dir=config.out_dir)
    records, verdict = sweep(polynomial, evolution, on_run=keep_state)
    write_records_csv(
        config.out_dir / "records.csv", records, polynomial, config.evolution.top_k
    )
    write_verdict_txt(config.out_dir / "verdict.txt", verdict)
    if config.dump_state_path is not None and last_state:
        dump_state(last_state[0], config.dump_state_path)
    if verdict is None:
        logger.warning("no stable majority within the time budget")
        return 2
    print(
        "has_solution = "
        + ("true" if verdict.has_solution else "false")
        + (
            " witness = " + ":".join(str(n) for n in verdict.witness)
            if verdict.witness
            else ""
        )
    )
    return 0


def _run_gap_profile(polynomial: DiophantinePolynomial, config: RunConfig) -> int:
    from .fock import TruncatedFockSpace

    alphas, cutoffs = _resolved_cutoffs(polynomial, config.evolution)
    space = TruncatedFockSpace(cutoffs)
    profile = gap_profile(polynomial, alphas, space)
    profile.write_csv(config.out_dir / "gap.csv")
    print(
        f"min interior gap {_fmt(profile.min_gap)} at s = {_fmt(profile.min_gap_s)}"
        + ("; interior degeneracy detected" if profile.interior_degenerate else "")
    )
    return 0


def _run_oracle_check(polynomial: DiophantinePolynomial, config: RunConfig) -> int:
    from .fock import TruncatedFockSpace, occupation_vectors

    _, cutoffs = _resolved_cutoffs(polynomial, config.evolution)
    result = brute_force_search(polynomial, cutoffs)
    space = TruncatedFockSpace(cutoffs)
    diagonal = diag_hp(polynomial, space)
    mismatches = 0
    for index in range(space.dimension):
        point = space.multi_index(index)
        value = polynomial.evaluate(point)
        if float(value * value) != diagonal[index]:
            mismatches += 1
    lines = [
        f"equation = {polynomial}",
        "box = " + ":".join(str(m) for m in cutoffs),
        f"num_zeros = {len(result.zeros)}",
        "zeros = "
        + (
            "; ".join(":".join(str(n) for n in z) for z in result.zeros)
            if result.zeros
            else "none"
        ),
        f"min_square = {result.min_square}",
        "argmin = "
        + "; ".join(":".join(str(n) for n in point) for point in result.argmin),
        "has_solution_in_box = " + ("true" if result.zeros else "false"),
        f"diagonal_check = {'ok' if mismatches == 0 else 'MISMATCH'} "
        f"({space.dimension} entries)",
    ]
    (config.out_dir / "oracle.txt").write_text("\n".join(lines) + "\n")
    print(lines[-2] + "; " + lines[-1])
    return 0 if mismatches == 0 else 1


def run(config: RunConfig) -> int:
    polynomial = parse(config.equation)
    if polynomial.num_unknowns < 1:
        raise ValueError("the equation has no unknowns; nothing to decide")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    if config.mode == "sweep":
        return _run_sweep(polynomial, config)
    if config.mode == "gap-profile":
        return _run_gap_profile(polynomial, config)
    return _run_oracle_check(polynomial, config)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = build_run_config(argv)
        return run(config)
    except (ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
