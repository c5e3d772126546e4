"""Qubit sequential projective measurement.

States are pure and carried as Bloch vectors. Every probability reduces to
dot products between the state and the measurement directions, so nothing
here depends on a choice of phase.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConfigError
from .geometry import (
    UNIT_TOL,
    Config,
    Direction,
    Setting,
    Z_AXIS,
    check_outcome,
    dot,
    outcome_symbol,
    parse_outcome,
    transverse_frame,
)
from .records import SERIES_CODE, CountTable, ProbTable, RunBatch, partition, substream


@dataclass(frozen=True)
class QubitState:
    """Pure qubit state; ``bloch`` is a unit 3-vector."""

    bloch: tuple[float, float, float]

    def __post_init__(self) -> None:
        r = tuple(float(t) for t in self.bloch)
        if len(r) != 3:
            raise ValueError("Bloch vector needs three components")
        norm = math.sqrt(sum(t * t for t in r))
        if abs(norm - 1.0) > UNIT_TOL:
            raise ValueError(f"pure state needs |r| = 1, got {norm!r}")
        object.__setattr__(self, "bloch", r)

    @classmethod
    def along(cls, d: Direction, outcome: int = 1) -> "QubitState":
        """Eigenstate of the measurement along ``d`` with the given outcome."""
        o = check_outcome(outcome)
        return cls((o * d.x, o * d.y, o * d.z))

    @property
    def direction(self) -> Direction:
        return Direction(*self.bloch)

    def as_array(self) -> np.ndarray:
        return np.array(self.bloch)


def from_amplitudes(s: float, phi: float, e: Direction = Z_AXIS) -> QubitState:
    """State ``s|e+> + sqrt(1-s^2) e^{i phi}|e->`` as a Bloch vector.

    The transverse part lies in the frame of :func:`geometry.transverse_frame`.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"amplitude s must lie in [0, 1], got {s!r}")
    c = math.sqrt(max(0.0, 1.0 - s * s))
    u, v = transverse_frame(e)
    r = (2.0 * s * s - 1.0) * e.as_array() + 2.0 * s * c * (math.cos(phi) * u + math.sin(phi) * v)
    return QubitState(tuple(r / np.linalg.norm(r)))


def measure_prob(state: QubitState, x: Direction, outcome: int) -> float:
    """Born probability of ``outcome`` for a measurement along ``x``."""
    o = check_outcome(outcome)
    rx = state.bloch[0] * x.x + state.bloch[1] * x.y + state.bloch[2] * x.z
    rx = min(1.0, max(-1.0, rx))
    return (1.0 + o * rx) / 2.0


def collapse(state: QubitState, x: Direction, outcome: int) -> QubitState:
    """Post-measurement state; refuses branches of zero probability."""
    if measure_prob(state, x, outcome) <= 0.0:
        raise ValueError(f"outcome {outcome_symbol(outcome)} along {x} has zero probability")
    return QubitState.along(x, outcome)


def transition_prob(x: Direction, y: Direction, ox: int, oy: int, depolarizing: float = 1.0) -> float:
    """P(oy along y | state collapsed onto ox along x), Bloch length shrunk by ``depolarizing``."""
    return (1.0 + check_outcome(ox) * check_outcome(oy) * depolarizing * dot(x, y)) / 2.0


def pair_prob_exact(state: QubitState, x: Direction, y: Direction, ox: int, oy: int,
                    depolarizing: float = 1.0) -> float:
    """Probability of the outcome pair ``(ox, oy)`` for measurements along x then y."""
    return measure_prob(state, x, ox) * transition_prob(x, y, ox, oy, depolarizing)


def expected_value_exact(state: QubitState, x: Direction, y: Direction, depolarizing: float = 1.0) -> float:
    """Mean outcome product for x then y. Equals ``x . y`` whatever the state."""
    return depolarizing * dot(x, y)


def expectation_from_pairs(state: QubitState, x: Direction, y: Direction, depolarizing: float = 1.0) -> float:
    """The same mean, assembled from the four outcome-pair probabilities."""
    return sum(ox * oy * pair_prob_exact(state, x, y, ox, oy, depolarizing)
               for ox in (1, -1) for oy in (1, -1))


def quantum_prob_table(state: QubitState, config: Config, depolarizing: float = 1.0) -> ProbTable:
    probs = np.zeros((3, 2, 3, 2))
    for s1 in Setting:
        for s2 in Setting:
            for i1, o1 in enumerate((1, -1)):
                for i2, o2 in enumerate((1, -1)):
                    probs[s1, i1, s2, i2] = pair_prob_exact(state, config[s1], config[s2], o1, o2, depolarizing)
    return ProbTable(probs)


@dataclass(frozen=True)
class StatePrep:
    """How each run's initial state is prepared.

    Either a fixed state, or the eigenstate of one of the configured
    settings for a given outcome.
    """

    state: Optional[QubitState] = None
    setting: Optional[Setting] = None
    outcome: int = 1

    def __post_init__(self) -> None:
        if (self.state is None) == (self.setting is None):
            raise ValueError("StatePrep needs exactly one of a fixed state or an eigenstate setting")
        check_outcome(self.outcome)

    @classmethod
    def fixed(cls, state: QubitState) -> "StatePrep":
        return cls(state=state)

    @classmethod
    def eigenstate(cls, setting, outcome: int = 1) -> "StatePrep":
        return cls(setting=Setting.parse(setting), outcome=outcome)

    @property
    def is_eigenstate(self) -> bool:
        return self.setting is not None

    def resolve(self, config: Config) -> QubitState:
        if self.state is not None:
            return self.state
        return QubitState.along(config[self.setting], self.outcome)

    @classmethod
    def from_dict(cls, data: dict) -> "StatePrep":
        try:
            if "eigenstate" in data:
                tag = str(data["eigenstate"]).strip()
                if len(tag) != 2:
                    raise ValueError(f"eigenstate tag must look like 'A+', got {tag!r}")
                return cls.eigenstate(tag[0], parse_outcome(tag[1]))
            if "bloch" in data:
                return cls.fixed(QubitState(tuple(data["bloch"])))
            if "s" in data:
                e = Direction.from_array(data.get("e", [0.0, 0.0, 1.0]))
                return cls.fixed(from_amplitudes(float(data["s"]), float(data.get("phi", 0.0)), e))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad state prep {data!r}: {exc}") from None
        raise ConfigError(f"state prep needs 'eigenstate', 'bloch' or 's': {data!r}")

    def to_dict(self) -> dict:
        if self.setting is not None:
            return {"eigenstate": f"{self.setting.name}{outcome_symbol(self.outcome)}"}
        return {"bloch": list(self.state.bloch)}


#: Initial state used when a spec gives none: the equal superposition along +x.
DEFAULT_PREP = StatePrep.fixed(QubitState((1.0, 0.0, 0.0)))


def branch_tables(state: QubitState, config: Config, depolarizing: float = 1.0):
    """P(+) tables consumed by :func:`kernels.qubit_runs`."""
    if not 0.0 <= depolarizing <= 1.0:
        raise ValueError("depolarizing factor must lie in [0, 1]")
    p_first = np.array([measure_prob(state, config[s], 1) for s in Setting])
    gram = config.gram()
    np.fill_diagonal(gram, 1.0)
    p_second = np.empty((2, 3, 3))
    p_second[0] = (1.0 + depolarizing * gram) / 2.0
    p_second[1] = (1.0 - depolarizing * gram) / 2.0
    return p_first, p_second


def _quantum_chunk(tables, key, size, pair, retain, series) -> RunBatch:
    u = substream(*key).random((size, 3))
    if pair is None:
        first, second = kernels.decode_pairs(np.ascontiguousarray(u[:, 0]))
    else:
        first = np.full(size, int(pair[0]), np.int8)
        second = np.full(size, int(pair[1]), np.int8)
    o1, o2 = kernels.qubit_runs(first, second, np.ascontiguousarray(u[:, 1]),
                                np.ascontiguousarray(u[:, 2]), *tables, retain=retain)
    return RunBatch(first, second, o1, o2, np.full(size, -1, np.int8), np.full(size, series, np.int8))


def sample_quantum_runs(prep: StatePrep, config: Config, n_runs: int, seed: int = 0,
                        workers: int = 1, depolarizing: float = 1.0, pair=None, retain: int = 0,
                        series: str = "free", stream: tuple[int, ...] = ()) -> RunBatch:
    """Sequential two-measurement runs from a freshly prepared state.

    Per run the draws are, in order: the ordered setting pair (unused when
    ``pair`` is fixed), the first outcome, the second outcome. With ``retain``
    = +1/-1 only runs whose first outcome matches are measured a second time.
    Chunk ``k`` uses substream ``(seed, *stream, k)``.
    """
    if n_runs < 0:
        raise ValueError("n_runs must be non-negative")
    if pair is not None:
        pair = tuple(Setting.parse(s) for s in pair)
    state = prep.resolve(config)
    tables = branch_tables(state, config, depolarizing)
    code = SERIES_CODE[series]
    chunks = partition(n_runs, workers)

    def run(kc):
        k, (lo, hi) = kc
        return _quantum_chunk(tables, (seed, *stream, k), hi - lo, pair, retain, code)

    if len(chunks) == 1:
        return run((0, chunks[0]))
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        return RunBatch.concat(pool.map(run, enumerate(chunks)))


def simulate_quantum(prep: StatePrep, config: Config, n_runs: int, seed: int = 0,
                     workers: int = 1, depolarizing: float = 1.0) -> CountTable:
    return sample_quantum_runs(prep, config, n_runs, seed, workers, depolarizing).counts()
