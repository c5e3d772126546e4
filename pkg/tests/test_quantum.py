import itertools
import math

import numpy as np
import pytest

from conftest import random_config
from tempbell.geometry import Config, Direction, Setting, X_AXIS, Y_AXIS, Z_AXIS, dot, reference_config_18
from tempbell.quantum import (
    QubitState,
    StatePrep,
    collapse,
    expectation_from_pairs,
    expected_value_exact,
    from_amplitudes,
    measure_prob,
    pair_prob_exact,
    quantum_prob_table,
    sample_quantum_runs,
    simulate_quantum,
)

A, B, C = Setting.A, Setting.B, Setting.C


def spinor(state: QubitState) -> np.ndarray:
    """Independent route: ket from the Bloch vector, computational basis along z."""
    x, y, z = state.bloch
    theta = math.acos(max(-1.0, min(1.0, z)))
    phi = math.atan2(y, x)
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


def projector(d: Direction, outcome: int) -> np.ndarray:
    sx = np.array([[0, 1], [1, 0]], complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.array([[1, 0], [0, -1]], complex)
    return (np.eye(2) + outcome * (d.x * sx + d.y * sy + d.z * sz)) / 2


def random_state(rng) -> QubitState:
    v = rng.normal(size=3)
    return QubitState(tuple(v / np.linalg.norm(v)))


def test_from_amplitudes_examples():
    assert np.allclose(from_amplitudes(1.0, 0.7).bloch, [0, 0, 1], atol=1e-15)
    assert np.allclose(from_amplitudes(0.0, 0.7).bloch, [0, 0, -1], atol=1e-15)
    assert np.allclose(from_amplitudes(1 / math.sqrt(2), 0.0).bloch, [1, 0, 0], atol=1e-15)
    e = Direction(1, 2, -1)
    assert np.allclose(from_amplitudes(1.0, 0.3, e).bloch, e.to_list())
    with pytest.raises(ValueError):
        from_amplitudes(1.2, 0.0)


def test_from_amplitudes_matches_ket(rng):
    # |psi> = s|0> + sqrt(1-s^2) e^{i phi}|1>, compared through Born probabilities
    for _ in range(50):
        s, phi = rng.uniform(0, 1), rng.uniform(0, 2 * math.pi)
        ket = np.array([s, math.sqrt(1 - s * s) * np.exp(1j * phi)])
        st = from_amplitudes(s, phi)
        x = Direction.from_array(rng.normal(size=3))
        born = float(np.real(ket.conj() @ projector(x, 1) @ ket))
        assert measure_prob(st, x, 1) == pytest.approx(born, abs=1e-12)


def test_measure_prob_examples():
    st = QubitState.along(X_AXIS)
    assert measure_prob(st, X_AXIS, 1) == 1.0
    assert measure_prob(st, Z_AXIS, 1) == 0.5
    s = 0.37
    assert measure_prob(from_amplitudes(s, 1.1), Z_AXIS, 1) == pytest.approx(s * s, abs=1e-12)


def test_born_normalization(rng):
    for _ in range(300):
        st = random_state(rng)
        x = Direction.from_array(rng.normal(size=3))
        assert abs(measure_prob(st, x, 1) + measure_prob(st, x, -1) - 1.0) <= 1e-12


def test_collapse():
    st = from_amplitudes(0.4, 0.2)
    assert collapse(st, Y_AXIS, 1).bloch == (0.0, 1.0, 0.0)
    post = collapse(st, Y_AXIS, -1)
    assert measure_prob(post, Y_AXIS, -1) == 1.0
    with pytest.raises(ValueError):
        collapse(QubitState.along(X_AXIS), -X_AXIS, 1)


def test_pair_prob_against_matrix_route(rng):
    for _ in range(100):
        st = random_state(rng)
        x = Direction.from_array(rng.normal(size=3))
        y = Direction.from_array(rng.normal(size=3))
        psi = spinor(st)
        for ox, oy in itertools.product((1, -1), repeat=2):
            amp = projector(y, oy) @ projector(x, ox) @ psi
            want = float(np.real(amp.conj() @ amp))
            assert pair_prob_exact(st, x, y, ox, oy) == pytest.approx(want, abs=1e-12)


def test_pair_prob_prepared_along_reference_direction(rng):
    # state with amplitude s on |a+>: P(a+, b-) = s^2 (1 - a.b) / 2, P(a-, b+) = (1 - s^2)(1 - a.b) / 2
    for _ in range(50):
        a = Direction.from_array(rng.normal(size=3))
        b = Direction.from_array(rng.normal(size=3))
        s, phi = rng.uniform(0, 1), rng.uniform(0, 2 * math.pi)
        st = from_amplitudes(s, phi, a)
        ab = dot(a, b)
        assert pair_prob_exact(st, a, b, 1, -1) == pytest.approx(s * s * (1 - ab) / 2, abs=1e-12)
        assert pair_prob_exact(st, a, b, -1, 1) == pytest.approx((1 - s * s) * (1 - ab) / 2, abs=1e-12)


def test_pair_prob_from_a_plus_eigenstate(rng):
    for _ in range(50):
        cfg = random_config(rng)
        ab, ac, bc = cfg.dots()
        st = QubitState.along(cfg.a, 1)
        assert pair_prob_exact(st, cfg.b, cfg.c, 1, -1) == pytest.approx((1 + ab) * (1 - bc) / 4, abs=1e-12)
        assert pair_prob_exact(st, cfg.a, cfg.c, 1, -1) == pytest.approx((1 - ac) / 2, abs=1e-12)


def test_pair_probabilities_normalized_and_perfectly_correlated(rng):
    for _ in range(200):
        st = random_state(rng)
        x = Direction.from_array(rng.normal(size=3))
        y = Direction.from_array(rng.normal(size=3))
        total = sum(pair_prob_exact(st, x, y, a, b) for a, b in itertools.product((1, -1), repeat=2))
        assert abs(total - 1.0) <= 1e-12
        assert pair_prob_exact(st, x, x, 1, -1) == 0.0
        assert pair_prob_exact(st, x, x, -1, 1) == 0.0


def test_expectation_is_state_independent(rng):
    x = Direction(1, 0, 0)
    y = Direction(0.3, math.sqrt(1 - 0.09), 0)
    for _ in range(2):
        st = random_state(rng)
        assert expected_value_exact(st, x, y) == pytest.approx(0.3, abs=1e-15)
        assert expectation_from_pairs(st, x, y) == pytest.approx(0.3, abs=1e-12)
    for _ in range(100):
        st = random_state(rng)
        x = Direction.from_array(rng.normal(size=3))
        y = Direction.from_array(rng.normal(size=3))
        assert abs(expectation_from_pairs(st, x, y) - dot(x, y)) <= 1e-12
    assert expected_value_exact(st, x, x) == 1.0
    assert expected_value_exact(st, X_AXIS, Y_AXIS) == 0.0


def test_individual_probabilities_are_state_dependent():
    a, b = Z_AXIS, X_AXIS
    p_s1 = pair_prob_exact(from_amplitudes(1.0, 0.0, a), a, b, 1, -1)
    p_s0 = pair_prob_exact(from_amplitudes(0.0, 0.0, a), a, b, 1, -1)
    assert p_s1 - p_s0 > 0.1


def test_state_prep_round_trip_and_resolve():
    cfg = reference_config_18()
    prep = StatePrep.from_dict({"eigenstate": "A+"})
    assert prep.resolve(cfg).bloch == tuple(cfg.a.to_list())
    assert StatePrep.from_dict(prep.to_dict()) == prep
    minus_c = StatePrep.from_dict({"eigenstate": "C-"}).resolve(cfg)
    assert np.allclose(minus_c.bloch, (-cfg.c).to_list())
    fixed = StatePrep.from_dict({"s": 1 / math.sqrt(2), "phi": 0.0, "e": [0, 0, 1]})
    assert np.allclose(fixed.resolve(cfg).bloch, [1, 0, 0], atol=1e-15)
    assert StatePrep.from_dict(fixed.to_dict()) == fixed


def test_a_plus_prep_same_setting_runs():
    cfg = reference_config_18()
    runs = sample_quantum_runs(StatePrep.eigenstate(A), cfg, 100_000, seed=1)
    aa = (runs.first == A) & (runs.second == A)
    assert aa.sum() > 0
    assert np.all(runs.o1[aa] == 1) and np.all(runs.o2[aa] == 1)
    assert runs.same_setting_disagreements() == 0


def test_cell_frequencies_converge_to_exact(rng):
    cfg = random_config(rng)
    st = random_state(rng)
    n = 1_000_000
    table = simulate_quantum(StatePrep.fixed(st), cfg, n, seed=12)
    est = table.probabilities()
    exact = quantum_prob_table(st, cfg)
    for s1, s2 in itertools.product(range(3), repeat=2):
        m = est.runs(s1, s2)
        for o1, o2 in itertools.product((1, -1), repeat=2):
            p = exact.p(s1, o1, s2, o2)
            assert abs(est.p(s1, o1, s2, o2) - p) <= 5 * math.sqrt(p * (1 - p) / m) + 1e-15
        e_hat = est.expectation(s1, s2)
        assert abs(e_hat - dot(cfg[s1], cfg[s2])) <= 5 * math.sqrt((1 - e_hat**2) / m) + 1e-12


def test_retain_discards_second_measurement():
    cfg = reference_config_18()
    runs = sample_quantum_runs(StatePrep.fixed(QubitState((0, 0, 1))), cfg, 20_000, seed=3,
                               pair=(A, B), retain=-1, series="-")
    assert np.all(runs.first == A) and np.all(runs.second == B)
    assert np.all(runs.o2[runs.o1 == 1] == 0)
    assert np.all(runs.o2[runs.o1 == -1] != 0)
    # first measurement along x from |z+>: half retained
    frac = np.mean(runs.o1 == -1)
    assert abs(frac - 0.5) < 5 * math.sqrt(0.25 / 20_000)


def test_depolarizing_knob():
    cfg = reference_config_18()
    st = QubitState.along(cfg.a)
    assert expectation_from_pairs(st, cfg.a, cfg.b, 0.5) == pytest.approx(0.5 * dot(cfg.a, cfg.b), abs=1e-12)
    runs = sample_quantum_runs(StatePrep.fixed(st), cfg, 50_000, seed=4, depolarizing=0.0)
    # fully depolarized between measurements: repeated settings disagree half the time
    same = (runs.first == runs.second)
    rate = runs.same_setting_disagreements() / same.sum()
    assert abs(rate - 0.5) < 5 * math.sqrt(0.25 / same.sum())
