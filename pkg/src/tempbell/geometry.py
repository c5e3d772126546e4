"""Directions on the unit sphere, measurement settings and configurations."""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

UNIT_TOL = 1e-9

#: Tolerance under which two directions count as equal or antipodal.
DEGENERATE_TOL = 1e-9


class Setting(enum.IntEnum):
    """One of the three external parameter values."""

    A = 0
    B = 1
    C = 2

    @classmethod
    def parse(cls, label: "str | int | Setting") -> "Setting":
        if isinstance(label, Setting):
            return label
        if isinstance(label, str):
            try:
                return cls[label.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown setting label {label!r}") from None
        return cls(int(label))


SETTINGS = (Setting.A, Setting.B, Setting.C)


def check_outcome(value: int) -> int:
    """Return ``value`` as an int, raising unless it is +1 or -1."""
    v = int(value)
    if v not in (1, -1) or v != value:
        raise ValueError(f"outcome must be +1 or -1, got {value!r}")
    return v


def parse_outcome(token: "str | int") -> int:
    if isinstance(token, str):
        token = token.strip()
        if token in ("+", "+1", "1"):
            return 1
        if token in ("-", "-1", "−", "−1"):
            return -1
        raise ValueError(f"cannot parse outcome {token!r}")
    return check_outcome(token)


def outcome_symbol(value: int) -> str:
    return "+" if check_outcome(value) > 0 else "-"


@dataclass(frozen=True)
class Direction:
    """Unit 3-vector. Construction normalizes the given components."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(norm) or norm == 0.0:
            raise ValueError("direction needs a finite non-zero vector")
        if abs(norm - 1.0) <= 4 * sys.float_info.epsilon:
            # already unit: leave it alone so that normalizing twice is a no-op
            norm = 1.0
        object.__setattr__(self, "x", float(self.x) / norm)
        object.__setattr__(self, "y", float(self.y) / norm)
        object.__setattr__(self, "z", float(self.z) / norm)

    @classmethod
    def from_array(cls, v: Iterable[float]) -> "Direction":
        x, y, z = (float(t) for t in v)
        return cls(x, y, z)

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "Direction":
        """Polar angle ``theta`` from +z, azimuth ``phi`` from +x (radians)."""
        st = math.sin(theta)
        return cls(st * math.cos(phi), st * math.sin(phi), math.cos(theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __neg__(self) -> "Direction":
        return Direction(-self.x, -self.y, -self.z)

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]


Z_AXIS = Direction(0.0, 0.0, 1.0)
X_AXIS = Direction(1.0, 0.0, 0.0)
Y_AXIS = Direction(0.0, 1.0, 0.0)


def make_direction(x: float, y: float, z: float) -> Direction:
    """Normalize ``(x, y, z)`` into a :class:`Direction`.

    Raises ``ValueError`` for the zero vector.
    """
    return Direction(x, y, z)


def dot(u: Direction, v: Direction) -> float:
    """Scalar product of two directions, clamped to [-1, 1]."""
    if u == v:
        return 1.0
    d = u.x * v.x + u.y * v.y + u.z * v.z
    return min(1.0, max(-1.0, d))


def eigen_amplitudes(x: Direction, e: Direction) -> tuple[float, float]:
    """Real amplitudes of ``|x+>`` on the ``|e+>``, ``|e->`` basis.

    Coplanar (phase-free) form; probabilities elsewhere go through dot products.
    """
    c = dot(x, e)
    return math.sqrt((1.0 + c) / 2.0), math.sqrt((1.0 - c) / 2.0)


def transverse_frame(e: Direction) -> tuple[np.ndarray, np.ndarray]:
    """Right-handed orthonormal pair (u, v) with u x v = e.

    u is Gram-Schmidt of the coordinate axis along which ``e`` has the smallest
    absolute component; for e = +z this gives u = +x, v = +y.
    """
    ev = e.as_array()
    k = int(np.argmin(np.abs(ev)))
    axis = np.zeros(3)
    axis[k] = 1.0
    u = axis - ev * ev[k]
    u /= np.linalg.norm(u)
    v = np.cross(ev, u)
    return u, v


def rotation_to_z(v: Direction) -> np.ndarray:
    """Proper rotation matrix R with R @ v = +z."""
    a = v.as_array()
    z = np.array([0.0, 0.0, 1.0])
    c = float(a @ z)
    if c > 1.0 - 1e-15:
        return np.eye(3)
    if c < -1.0 + 1e-15:
        return np.diag([1.0, -1.0, -1.0])
    k = np.cross(a, z)
    s = np.linalg.norm(k)
    k /= s
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + s * kx + (1.0 - c) * (kx @ kx)


def random_direction(rng: np.random.Generator) -> Direction:
    while True:
        v = rng.normal(size=3)
        if np.linalg.norm(v) > 1e-12:
            return Direction.from_array(v)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass(frozen=True)
class Config:
    """The three measurement directions bound to settings A, B, C."""

    a: Direction
    b: Direction
    c: Direction

    def __getitem__(self, setting: "Setting | int | str") -> Direction:
        return (self.a, self.b, self.c)[Setting.parse(setting)]

    def matrix(self) -> np.ndarray:
        """Rows are a, b, c."""
        return np.array([self.a.to_list(), self.b.to_list(), self.c.to_list()])

    def gram(self) -> np.ndarray:
        """3x3 matrix of clamped pairwise dot products."""
        d = (self.a, self.b, self.c)
        return np.array([[dot(u, v) for v in d] for u in d])

    def dots(self) -> tuple[float, float, float]:
        """``(a.b, a.c, b.c)``."""
        return dot(self.a, self.b), dot(self.a, self.c), dot(self.b, self.c)

    @property
    def degenerate(self) -> bool:
        return any(abs(d) > 1.0 - DEGENERATE_TOL for d in self.dots())

    def rotated(self, rot: np.ndarray) -> "Config":
        m = self.matrix() @ np.asarray(rot).T
        return Config(*(Direction.from_array(row) for row in m))

    @classmethod
    def from_vectors(cls, a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> "Config":
        return cls(Direction.from_array(a), Direction.from_array(b), Direction.from_array(c))

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        try:
            return cls.from_vectors(data["a"], data["b"], data["c"])
        except KeyError as exc:
            raise ValueError(f"config is missing direction {exc.args[0]!r}") from None

    def to_dict(self) -> dict[str, list[float]]:
        return {"a": self.a.to_list(), "b": self.b.to_list(), "c": self.c.to_list()}


def reference_config_16() -> Config:
    """b, c orthogonal and a along b - c: the three-term form reaches sqrt(2)."""
    return Config.from_vectors([1.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])


def reference_config_18() -> Config:
    """a, c orthogonal and b bisecting them: the prepared form reaches sqrt(2) + 1/2."""
    return Config.from_vectors([1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0])


def coplanar_config(angle_a: float, angle_b: float, angle_c: float) -> Config:
    """Directions in the xz-plane at the given angles (radians) from +z."""
    return Config(*(Direction.from_angles(t, 0.0) for t in (angle_a, angle_b, angle_c)))
