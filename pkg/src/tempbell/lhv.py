"""Joint-reality hidden-variable model.

Each run carries one of eight predetermined outcome assignments for the
settings a, b, c. Outcomes are read off that assignment, so two consecutive
measurements along the same setting always agree.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import kernels
from .errors import InsufficientStatistics
from .geometry import SETTINGS, Setting, check_outcome
from .records import REALITY_KEYS, SERIES_CODE, CountTable, ProbTable, RunBatch, RunRecord, partition, substream

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class JointReality:
    alpha: int
    beta: int
    gamma: int

    def __post_init__(self) -> None:
        for v in (self.alpha, self.beta, self.gamma):
            check_outcome(v)

    def __getitem__(self, setting) -> int:
        return (self.alpha, self.beta, self.gamma)[Setting.parse(setting)]

    @property
    def index(self) -> int:
        return 4 * (self.alpha < 0) + 2 * (self.beta < 0) + (self.gamma < 0)

    @property
    def key(self) -> str:
        return REALITY_KEYS[self.index]

    @classmethod
    def from_index(cls, k: int) -> "JointReality":
        if not 0 <= k < 8:
            raise ValueError(f"reality index must be in 0..7, got {k}")
        return cls(*(1 - 2 * ((k >> (2 - s)) & 1) for s in range(3)))

    @classmethod
    def from_key(cls, key: str) -> "JointReality":
        try:
            return cls.from_index(REALITY_KEYS.index(key))
        except ValueError:
            raise ValueError(f"unknown reality key {key!r}") from None


ALL_REALITIES = tuple(JointReality.from_index(k) for k in range(8))


class RealityDistribution:
    """Normalized weights over the eight joint realities (``REALITY_KEYS`` order)."""

    __slots__ = ("weights",)

    def __init__(self, weights) -> None:
        w = np.array(weights, dtype=np.float64).reshape(-1)
        if w.shape != (8,):
            raise ValueError("a reality distribution has exactly 8 weights")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        self.weights = w

    @classmethod
    def normalized(cls, raw) -> "RealityDistribution":
        w = np.asarray(raw, dtype=np.float64)
        total = w.sum()
        if not total > 0:
            raise ValueError("need at least one positive weight")
        return cls(w / total)

    @classmethod
    def uniform(cls) -> "RealityDistribution":
        return cls(np.full(8, 0.125))

    @classmethod
    def point_mass(cls, reality: "JointReality | str") -> "RealityDistribution":
        if isinstance(reality, str):
            reality = JointReality.from_key(reality)
        w = np.zeros(8)
        w[reality.index] = 1.0
        return cls(w)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "RealityDistribution":
        """Eight independent uniform(0, 1) draws, normalized."""
        return cls.normalized(rng.random(8))

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "RealityDistribution":
        unknown = set(data) - set(REALITY_KEYS)
        if unknown:
            raise ValueError(f"unknown reality keys: {sorted(unknown)}")
        return cls([float(data.get(k, 0.0)) for k in REALITY_KEYS])

    def to_dict(self) -> dict[str, float]:
        return {k: float(w) for k, w in zip(REALITY_KEYS, self.weights)}

    def __getitem__(self, reality: "JointReality | str") -> float:
        if isinstance(reality, str):
            reality = JointReality.from_key(reality)
        return float(self.weights[reality.index])

    def __repr__(self) -> str:
        return f"RealityDistribution({self.to_dict()})"


def sample_reality(dist: RealityDistribution, rng: np.random.Generator) -> JointReality:
    cdf = kernels.reality_cdf(dist.weights)
    k = int(np.searchsorted(cdf, rng.random(), side="right"))
    return ALL_REALITIES[min(k, 7)]


def lhv_run(reality: JointReality, pair) -> RunRecord:
    first, second = (Setting.parse(s) for s in pair)
    return RunRecord(first, second, reality[first], reality[second],
                     (reality.alpha, reality.beta, reality.gamma))


def lhv_pair_prob(dist: RealityDistribution, pair, outcomes) -> float:
    """P(outcomes | pair): total weight of the realities consistent with both outcomes."""
    first, second = (Setting.parse(s) for s in pair)
    o1, o2 = (check_outcome(o) for o in outcomes)
    return float(sum(dist.weights[r.index] for r in ALL_REALITIES
                     if r[first] == o1 and r[second] == o2))


def lhv_prob_table(dist: RealityDistribution) -> ProbTable:
    probs = np.zeros((3, 2, 3, 2))
    for s1 in SETTINGS:
        for s2 in SETTINGS:
            for i1, o1 in enumerate((1, -1)):
                for i2, o2 in enumerate((1, -1)):
                    probs[s1, i1, s2, i2] = lhv_pair_prob(dist, (s1, s2), (o1, o2))
    return ProbTable(probs)


def _lhv_chunk(cdf, seed: int, k: int, size: int, series: int) -> RunBatch:
    u = substream(seed, k).random((size, 2))
    first, second, o1, o2, hidden = kernels.lhv_runs(
        np.ascontiguousarray(u[:, 0]), np.ascontiguousarray(u[:, 1]), cdf)
    return RunBatch(first, second, o1, o2, hidden, np.full(size, series, np.int8))


def sample_lhv_runs(dist: RealityDistribution, n_runs: int, seed: int = 0,
                    workers: int = 1, series: str = "free") -> RunBatch:
    """Draw ``n_runs`` runs: one reality and one uniform ordered pair per run.

    Chunk ``k`` of the partition uses substream ``(seed, k)``; the result
    depends only on ``(seed, workers)``.
    """
    if n_runs < 0:
        raise ValueError("n_runs must be non-negative")
    cdf = kernels.reality_cdf(dist.weights)
    code = SERIES_CODE[series]
    chunks = partition(n_runs, workers)
    if len(chunks) == 1:
        return _lhv_chunk(cdf, seed, 0, n_runs, code)
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = pool.map(lambda kc: _lhv_chunk(cdf, seed, kc[0], kc[1][1] - kc[1][0], code),
                         enumerate(chunks))
        return RunBatch.concat(parts)


def simulate_lhv(dist: RealityDistribution, n_runs: int, seed: int = 0, workers: int = 1) -> CountTable:
    return sample_lhv_runs(dist, n_runs, seed, workers).counts()


def counting_identity_ratio(table: CountTable, hidden_tally, pair=(Setting.A, Setting.B),
                            outcomes=(1, -1)) -> float:
    """Hidden-reality runs with the given assignment over observed runs showing it.

    With the pair chosen uniformly among nine, the ratio tends to 9.
    """
    first, second = (Setting.parse(s) for s in pair)
    o1, o2 = (check_outcome(o) for o in outcomes)
    tally = np.asarray(hidden_tally)
    hidden = sum(int(tally[r.index]) for r in ALL_REALITIES if r[first] == o1 and r[second] == o2)
    observed = table.n(first, o1, second, o2)
    if observed == 0:
        raise InsufficientStatistics(
            f"no runs recorded as [{first.name}{o1:+d}, {second.name}{o2:+d}]")
    return hidden / observed
