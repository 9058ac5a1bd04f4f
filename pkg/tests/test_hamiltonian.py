"""Diagonal problem operator and matrix-free driver application."""

import math

import numpy as np
import pytest

from qdiosim.diophantine import parse
from qdiosim.fock import (
    CoherentParams,
    QuantumState,
    TruncatedFockSpace,
    coherent_state,
)
from qdiosim.hamiltonian import (
    DiagonalOverflowError,
    InitialHamiltonian,
    LeakageCounter,
    ProblemHamiltonian,
    apply_h,
    apply_hi,
    apply_hp,
    diag_hp,
    interpolated_diagonal,
)


def random_state(space, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=space.dimension) + 1j * rng.normal(size=space.dimension)
    return QuantumState(space, amps).normalize()


# --- problem diagonal -------------------------------------------------------


def test_diag_hp_single_mode_values():
    space = TruncatedFockSpace((3,))
    diagonal = diag_hp(parse("x - 2"), space)
    assert diagonal.tolist() == [4.0, 1.0, 0.0, 1.0]


def test_diag_hp_matches_exact_squares_everywhere():
    p = parse("x*y + x + 4*y - 11")
    space = TruncatedFockSpace((9, 9))
    diagonal = diag_hp(p, space)
    for i in range(space.dimension):
        point = space.multi_index(i)
        assert diagonal[i] == float(p.evaluate(point) ** 2)


def test_diag_hp_zero_entry_marks_solution():
    p = parse("x*y + x + 4*y - 11")
    space = TruncatedFockSpace((9, 9))
    diagonal = diag_hp(p, space)
    zero_at = [space.multi_index(i) for i in np.nonzero(diagonal == 0.0)[0]]
    assert zero_at == [(1, 2)]


def test_diag_hp_excited_value_examples():
    p = parse("x*y + x + 4*y - 11")
    assert p.evaluate((4, 1)) == 1
    assert p.evaluate((3, 1)) == -1
    space = TruncatedFockSpace((4, 2))
    diagonal = diag_hp(p, space)
    assert diagonal[space.linear_index((4, 1))] == 1.0
    assert diagonal[space.linear_index((3, 1))] == 1.0


def test_diag_hp_rejects_values_past_exact_float_range():
    # 94906266^2 is the first square past 2^53
    space = TruncatedFockSpace((0,))
    with pytest.raises(DiagonalOverflowError):
        diag_hp(parse("x + 94906266"), space)
    diag_hp(parse("x + 94906265"), space)  # still exactly representable


def test_diag_hp_dimension_mismatch():
    with pytest.raises(ValueError):
        diag_hp(parse("x + y"), TruncatedFockSpace((3,)))


# --- driver application -----------------------------------------------------


def test_apply_hi_annihilates_untruncated_ground_state():
    # with alpha = 0 the driver is the number operator; vacuum is its kernel
    space = TruncatedFockSpace((5,))
    hi = InitialHamiltonian((0.0 + 0j,))
    vac = QuantumState(space, np.eye(6, dtype=complex)[:, 0])
    out = apply_hi(hi, vac)
    assert np.allclose(out.amplitudes, 0.0, atol=1e-15)


def test_apply_hi_number_operator_on_basis_states():
    space = TruncatedFockSpace((5,))
    hi = InitialHamiltonian((0.0 + 0j,))
    for n in range(6):
        e = QuantumState(space, np.eye(6, dtype=complex)[:, n])
        out = apply_hi(hi, e)
        expected = np.zeros(6, dtype=complex)
        expected[n] = n
        assert np.allclose(out.amplitudes, expected, atol=1e-15)


def test_apply_hi_truncated_coherent_residual_is_pure_boundary():
    # On the truncated, renormalized coherent state the driver gives exactly
    # |alpha|^2 c_m at the top level and zero below it: (a - alpha) kills
    # every component except the one the cutoff removed.
    m = 9
    alpha = 2.0 + 0j
    space = TruncatedFockSpace((m,))
    psi = coherent_state(CoherentParams((alpha,)), space)
    out = apply_hi(InitialHamiltonian((alpha,)), psi)
    expected = np.zeros(m + 1, dtype=complex)
    expected[m] = abs(alpha) ** 2 * psi.amplitudes[m]
    assert np.allclose(out.amplitudes, expected, atol=1e-12)
    # frozen magnitude: 4 * sqrt(P(9)) with P the truncated Poisson profile
    norm = float(np.linalg.norm(out.amplitudes))
    head = sum(math.exp(-4.0) * 4.0**n / math.factorial(n) for n in range(10))
    p9 = math.exp(-4.0) * 4.0**9 / math.factorial(9) / head
    assert abs(norm - 4.0 * math.sqrt(p9)) < 1e-12
    assert abs(norm - 0.46199) < 5e-6


def test_apply_hi_residual_decays_with_cutoff():
    alpha = 2.0 + 0j
    norms = []
    for m in (9, 14, 20):
        space = TruncatedFockSpace((m,))
        psi = coherent_state(CoherentParams((alpha,)), space)
        out = apply_hi(InitialHamiltonian((alpha,)), psi)
        norms.append(float(np.linalg.norm(out.amplitudes)))
    assert norms[0] > norms[1] > norms[2]
    assert norms[2] < 1e-3


def test_apply_hi_is_hermitian():
    space = TruncatedFockSpace((4, 3))
    hi = InitialHamiltonian((1.5 + 0.5j, -0.7 + 0j))
    phi = random_state(space, 1)
    psi = random_state(space, 2)
    left = np.vdot(phi.amplitudes, apply_hi(hi, psi).amplitudes)
    right = np.vdot(apply_hi(hi, phi).amplitudes, psi.amplitudes)
    assert abs(left - right) < 1e-12


def test_apply_hi_is_linear():
    space = TruncatedFockSpace((4, 3))
    hi = InitialHamiltonian((1.1 + 0j, 0.4 - 0.2j))
    phi = random_state(space, 3)
    psi = random_state(space, 4)
    a, b = 0.7 - 0.1j, -0.3 + 0.9j
    combined = QuantumState(space, a * phi.amplitudes + b * psi.amplitudes)
    left = apply_hi(hi, combined).amplitudes
    right = a * apply_hi(hi, phi).amplitudes + b * apply_hi(hi, psi).amplitudes
    assert np.allclose(left, right, atol=1e-12)


def test_apply_hi_support_pattern():
    # the driver couples |n> only to itself and n +- 1 in a single mode
    space = TruncatedFockSpace((3, 3))
    hi = InitialHamiltonian((2.0 + 0j, 2.0 + 0j))
    for i in range(space.dimension):
        e = QuantumState(space, np.eye(space.dimension, dtype=complex)[:, i])
        out = apply_hi(hi, e).amplitudes
        source = space.multi_index(i)
        for j in np.nonzero(np.abs(out) > 1e-14)[0]:
            target = space.multi_index(int(j))
            deltas = [abs(a - b) for a, b in zip(source, target)]
            assert sum(deltas) <= 1


def test_apply_hi_counts_boundary_leakage():
    m = 9
    alpha = 2.0 + 0j
    space = TruncatedFockSpace((m,))
    psi = coherent_state(CoherentParams((alpha,)), space)
    counter = LeakageCounter()
    apply_hi(InitialHamiltonian((alpha,)), psi, counter)
    expected = abs(alpha) ** 2 * (m + 1) * abs(psi.amplitudes[m]) ** 2
    assert abs(counter.total - expected) < 1e-14


# --- interpolated application ----------------------------------------------


def test_apply_h_endpoints():
    p = parse("x - 2")
    space = TruncatedFockSpace((5,))
    hp = ProblemHamiltonian.build(p, space)
    hi = InitialHamiltonian((1.0 + 0j,))
    psi = random_state(space, 7)
    at_zero = apply_h(0.0, hp, hi, psi)
    assert np.array_equal(at_zero.amplitudes, apply_hi(hi, psi).amplitudes)
    at_one = apply_h(1.0, hp, hi, psi)
    assert np.array_equal(at_one.amplitudes, apply_hp(hp, psi).amplitudes)


def test_apply_h_interpolates_linearly():
    p = parse("x*y + x + 4*y - 11")
    space = TruncatedFockSpace((9, 9))
    hp = ProblemHamiltonian.build(p, space)
    hi = InitialHamiltonian((2.0 + 0j, 2.0 + 0j))
    psi = random_state(space, 8)
    s = 0.43
    fused = apply_h(s, hp, hi, psi).amplitudes
    parts = (1.0 - s) * apply_hi(hi, psi).amplitudes + s * apply_hp(hp, psi).amplitudes
    scale = float(np.max(np.abs(parts)))
    assert np.allclose(fused, parts, atol=1e-12 * max(1.0, scale))


def test_apply_h_validates_schedule_point():
    p = parse("x")
    space = TruncatedFockSpace((2,))
    hp = ProblemHamiltonian.build(p, space)
    hi = InitialHamiltonian((1.0 + 0j,))
    psi = random_state(space, 9)
    with pytest.raises(ValueError):
        apply_h(-0.1, hp, hi, psi)
    with pytest.raises(ValueError):
        apply_h(1.1, hp, hi, psi)


def test_apply_h_leakage_scales_with_driver_weight():
    m = 9
    alpha = 2.0 + 0j
    space = TruncatedFockSpace((m,))
    p = parse("x - 2")
    hp = ProblemHamiltonian.build(p, space)
    hi = InitialHamiltonian((alpha,))
    psi = coherent_state(CoherentParams((alpha,)), space)
    base = abs(alpha) ** 2 * (m + 1) * abs(psi.amplitudes[m]) ** 2
    for s in (0.0, 0.25, 0.75):
        counter = LeakageCounter()
        apply_h(s, hp, hi, psi, counter)
        assert abs(counter.total - (1.0 - s) ** 2 * base) < 1e-14
    counter = LeakageCounter()
    apply_h(1.0, hp, hi, psi, counter)
    assert counter.total == 0.0


def test_interpolated_diagonal_endpoints_and_midpoint():
    p = parse("x - 2")
    space = TruncatedFockSpace((3,))
    hp = ProblemHamiltonian.build(p, space)
    hi = InitialHamiltonian((2.0 + 0j,))
    driver = interpolated_diagonal(0.0, hp, hi)
    assert driver.tolist() == [4.0, 5.0, 6.0, 7.0]
    assert interpolated_diagonal(1.0, hp, hi).tolist() == [4.0, 1.0, 0.0, 1.0]
    mid = interpolated_diagonal(0.5, hp, hi)
    assert np.allclose(mid, 0.5 * driver + 0.5 * hp.diagonal, atol=1e-15)
