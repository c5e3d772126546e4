"""Run records, count tables and probability tables, plus their CSV forms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .geometry import SETTINGS, Setting, check_outcome, parse_outcome

SERIES_LABELS = ("free", "prepared", "+", "-")
SERIES_CODE = {name: i for i, name in enumerate(SERIES_LABELS)}

REALITY_KEYS = ("+++", "++-", "+-+", "+--", "-++", "-+-", "--+", "---")

RECORD_COLUMNS = (
    "run_index",
    "series",
    "first_setting",
    "first_outcome",
    "second_setting",
    "second_outcome",
    "hidden_reality",
)
COUNT_COLUMNS = ("first_setting", "first_outcome", "second_setting", "second_outcome", "count")


def _oi(outcome: int) -> int:
    """Table axis index of an outcome: 0 for +1, 1 for -1."""
    return 0 if check_outcome(outcome) > 0 else 1


@dataclass(frozen=True)
class RunRecord:
    first_setting: Setting
    second_setting: Setting
    first_outcome: int
    second_outcome: int
    hidden_reality: Optional[tuple[int, int, int]] = None


@dataclass
class RunBatch:
    """Column store for many runs, in run-index order.

    ``second`` outcome 0 marks a run discarded after its first measurement.
    ``hidden`` is the joint-reality index, or -1 when there is none.
    """

    first: np.ndarray
    second: np.ndarray
    o1: np.ndarray
    o2: np.ndarray
    hidden: np.ndarray
    series: np.ndarray

    @classmethod
    def empty(cls) -> "RunBatch":
        z = np.zeros(0, np.int8)
        return cls(z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy())

    @classmethod
    def concat(cls, batches: Iterable["RunBatch"]) -> "RunBatch":
        batches = list(batches)
        if not batches:
            return cls.empty()
        return cls(*(np.concatenate([getattr(b, f) for b in batches])
                     for f in ("first", "second", "o1", "o2", "hidden", "series")))

    def __len__(self) -> int:
        return int(self.first.shape[0])

    def record(self, i: int) -> RunRecord:
        h = int(self.hidden[i])
        hidden = None
        if h >= 0:
            hidden = tuple(1 - 2 * ((h >> (2 - s)) & 1) for s in range(3))
        return RunRecord(Setting(int(self.first[i])), Setting(int(self.second[i])),
                         int(self.o1[i]), int(self.o2[i]), hidden)

    def select(self, mask: np.ndarray) -> "RunBatch":
        return RunBatch(self.first[mask], self.second[mask], self.o1[mask],
                        self.o2[mask], self.hidden[mask], self.series[mask])

    def counts(self) -> "CountTable":
        return CountTable.from_runs(self)

    def hidden_tally(self) -> np.ndarray:
        """Runs per joint reality, indexed like ``REALITY_KEYS``."""
        h = self.hidden[self.hidden >= 0].astype(np.intp)
        return np.bincount(h, minlength=8).astype(np.int64)

    def same_setting_disagreements(self) -> int:
        done = self.o2 != 0
        same = (self.first == self.second) & done
        return int(np.count_nonzero(self.o1[same] != self.o2[same]))

    # -- CSV ---------------------------------------------------------------

    def to_csv(self, path: "str | Path") -> None:
        Path(path).write_text(self.to_csv_text(), newline="")

    def to_csv_text(self) -> str:
        labels = np.array(["A", "B", "C"])
        outs = {1: "1", -1: "-1", 0: ""}
        o1 = np.array([outs[v] for v in (-1, 0, 1)])[self.o1.astype(np.intp) + 1]
        o2 = np.array([outs[v] for v in (-1, 0, 1)])[self.o2.astype(np.intp) + 1]
        hid = np.array([""] + list(REALITY_KEYS))[self.hidden.astype(np.intp) + 1]
        ser = np.array(SERIES_LABELS)[self.series.astype(np.intp)]
        f = labels[self.first.astype(np.intp)]
        s = labels[self.second.astype(np.intp)]
        lines = [",".join(RECORD_COLUMNS)]
        lines.extend(
            f"{i},{a},{b},{c},{d},{e},{g}"
            for i, (a, b, c, d, e, g) in enumerate(zip(ser, f, o1, s, o2, hid))
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, path: "str | Path") -> "RunBatch":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != RECORD_COLUMNS:
                raise ValueError(f"{path}: not a run-record file (bad header {header!r})")
            rows = list(reader)
        n = len(rows)
        first = np.empty(n, np.int8)
        second = np.empty(n, np.int8)
        o1 = np.empty(n, np.int8)
        o2 = np.empty(n, np.int8)
        hidden = np.empty(n, np.int8)
        series = np.empty(n, np.int8)
        real_idx = {k: i for i, k in enumerate(REALITY_KEYS)}
        real_idx[""] = -1
        for i, row in enumerate(rows):
            if int(row[0]) != i:
                raise ValueError(f"{path}: run_index out of order at row {i + 1}")
            series[i] = SERIES_CODE[row[1]]
            first[i] = Setting.parse(row[2])
            o1[i] = parse_outcome(row[3])
            second[i] = Setting.parse(row[4])
            o2[i] = parse_outcome(row[5]) if row[5] else 0
            hidden[i] = real_idx[row[6]]
        return cls(first, second, o1, o2, hidden, series)


@dataclass
class CountTable:
    """Run counts indexed ``[first_setting, first_outcome, second_setting, second_outcome]``.

    Outcome axes use index 0 for +1 and 1 for -1.
    """

    counts: np.ndarray = field(default_factory=lambda: np.zeros((3, 2, 3, 2), np.int64))

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64).reshape(3, 2, 3, 2)
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def total_runs(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_runs(cls, runs: RunBatch) -> "CountTable":
        done = runs.o2 != 0
        f = runs.first[done].astype(np.intp)
        s = runs.second[done].astype(np.intp)
        i1 = (runs.o1[done] < 0).astype(np.intp)
        i2 = (runs.o2[done] < 0).astype(np.intp)
        flat = ((f * 2 + i1) * 3 + s) * 2 + i2
        return cls(np.bincount(flat, minlength=36))

    def n(self, first, o1: int, second, o2: int) -> int:
        return int(self.counts[Setting.parse(first), _oi(o1), Setting.parse(second), _oi(o2)])

    def pair_total(self, first, second) -> int:
        return int(self.counts[Setting.parse(first), :, Setting.parse(second), :].sum())

    def pair_totals(self) -> np.ndarray:
        return self.counts.sum(axis=(1, 3))

    def __add__(self, other: "CountTable") -> "CountTable":
        return CountTable(self.counts + other.counts)

    def probabilities(self) -> "ProbTable":
        """Per-pair relative frequencies; pairs with no runs get zeros."""
        n_pair = self.pair_totals()
        denom = np.where(n_pair > 0, n_pair, 1)[:, None, :, None]
        return ProbTable(self.counts / denom, n_pair=n_pair)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COUNT_COLUMNS)
        for s1 in SETTINGS:
            for o1 in (1, -1):
                for s2 in SETTINGS:
                    for o2 in (1, -1):
                        w.writerow([s1.name, o1, s2.name, o2, self.n(s1, o1, s2, o2)])
        return buf.getvalue()

    def to_csv(self, path: "str | Path") -> None:
        Path(path).write_text(self.to_csv_text(), newline="")

    @classmethod
    def from_csv(cls, path: "str | Path") -> "CountTable":
        table = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                idx = (Setting.parse(row["first_setting"]), _oi(parse_outcome(row["first_outcome"])),
                       Setting.parse(row["second_setting"]), _oi(parse_outcome(row["second_outcome"])))
                table.counts[idx] += int(row["count"])
        return table


@dataclass
class ProbTable:
    """Conditional probabilities P(o1, o2 | first, second).

    ``n_pair`` is present for tables estimated from counts and holds the
    number of runs behind each ordered pair.
    """

    probs: np.ndarray
    n_pair: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64).reshape(3, 2, 3, 2)

    def p(self, first, o1: int, second, o2: int) -> float:
        return float(self.probs[Setting.parse(first), _oi(o1), Setting.parse(second), _oi(o2)])

    def expectation(self, first, second) -> float:
        """Mean of the product of the two outcomes for the ordered pair."""
        sub = self.probs[Setting.parse(first), :, Setting.parse(second), :]
        return float(sub[0, 0] + sub[1, 1] - sub[0, 1] - sub[1, 0])

    def runs(self, first, second) -> Optional[int]:
        if self.n_pair is None:
            return None
        return int(self.n_pair[Setting.parse(first), Setting.parse(second)])

    @property
    def sampled(self) -> bool:
        return self.n_pair is not None


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream at ``key`` under the master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def partition(n: int, workers: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into ``workers`` contiguous chunks (first chunks get the remainder)."""
    workers = max(1, int(workers))
    base, extra = divmod(int(n), workers)
    out = []
    start = 0
    for k in range(workers):
        size = base + (1 if k < extra else 0)
        out.append((start, start + size))
        start += size
    return out
