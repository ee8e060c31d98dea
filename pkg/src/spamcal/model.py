"""Single-qubit error model on Bloch coordinates.

States are Bloch 3-vectors, the outcome-0 POVM element is described by
``(pi0, pix, piy, piz)``, and gates act as 3x3 rotation matrices with a
shared over-rotation angle ``theta`` and a per-gate depolarizing shrinkage
``eps``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EXACT_TOL = 1e-12
PRODUCT_TOL = 1e-10


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.x * self.x + self.y * self.y + self.z * self.z > 1.0 + EXACT_TOL:
            raise ValueError(f"Bloch vector {self.as_array()} is longer than 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, r) -> "BlochVector":
        r = np.asarray(r, dtype=float)
        return cls(float(r[0]), float(r[1]), float(r[2]))

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class PovmParams:
    """Expansion coefficients of the outcome-0 POVM element on (1, X, Y, Z)."""

    pi0: float
    pix: float = 0.0
    piy: float = 0.0
    piz: float = 0.0

    @classmethod
    def ideal(cls) -> "PovmParams":
        return cls(0.5, 0.0, 0.0, 0.5)

    def as_array(self) -> np.ndarray:
        return np.array([self.pi0, self.pix, self.piy, self.piz], dtype=float)


@dataclass(frozen=True)
class SpamParams:
    """Initial Bloch vector and classical readout parameters (pix = piy = 0)."""

    x0: float = 0.0
    y0: float = 0.0
    z0: float = 1.0
    pi0: float = 0.5
    piz: float = 0.5

    def __post_init__(self):
        if self.x0 ** 2 + self.y0 ** 2 + self.z0 ** 2 > 1.0 + EXACT_TOL:
            raise ValueError("initial Bloch vector is longer than 1")
        if self.pi0 - self.piz < -EXACT_TOL or self.pi0 + self.piz > 1.0 + EXACT_TOL:
            raise ValueError("readout parameters need 0 <= pi0 - piz and pi0 + piz <= 1")

    @property
    def bloch(self) -> BlochVector:
        return BlochVector(self.x0, self.y0, self.z0)

    @property
    def povm(self) -> PovmParams:
        return PovmParams(self.pi0, 0.0, 0.0, self.piz)

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.y0, self.z0, self.pi0, self.piz], dtype=float)


@dataclass(frozen=True)
class FullParams:
    """SPAM parameters plus the coherent over-rotation and depolarizing error."""

    spam: SpamParams = SpamParams()
    theta: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        if not abs(self.theta) < math.pi / 2:
            raise ValueError("theta must satisfy |theta| < pi/2")
        if not 0.0 <= self.eps < 1.0:
            raise ValueError("eps must lie in [0, 1)")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.spam.as_array(), [self.theta, self.eps]])

    @classmethod
    def from_array(cls, values) -> "FullParams":
        v = [float(t) for t in values]
        return cls(SpamParams(*v[:5]), v[5], v[6])


_LABEL_RE = re.compile(r"^(id|x|x90p|x90m|y90p|y90m)(?:\^(\d+))?$")


@dataclass(frozen=True)
class GateOp:
    """One calibration sequence: a gate from the calibration set raised to ``power``.

    ``kind`` is ``"id"``, ``"x"`` (ideal pi flip), ``"x90"`` or ``"y90"``;
    ``sign`` selects the +90 or -90 variant of the quarter-turn gates.
    """

    kind: str
    sign: int = 1
    power: int = 1

    def __post_init__(self):
        if self.kind not in ("id", "x", "x90", "y90"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.power < 0:
            raise ValueError("power must be nonnegative")

    @classmethod
    def identity(cls) -> "GateOp":
        return cls("id", 1, 0)

    @classmethod
    def flip(cls) -> "GateOp":
        return cls("x", 1, 1)

    @classmethod
    def x90(cls, sign: int = 1, power: int = 1) -> "GateOp":
        return cls("x90", sign, power)

    @classmethod
    def y90(cls, sign: int = 1, power: int = 1) -> "GateOp":
        return cls("y90", sign, power)

    @property
    def is_identity(self) -> bool:
        return self.kind == "id" or self.power == 0

    @property
    def depolarizing_steps(self) -> int:
        """Number of elementary gates, each contributing one shrinkage step."""
        return 0 if self.is_identity else self.power

    @property
    def label(self) -> str:
        if self.is_identity:
            return "id"
        name = self.kind if self.kind == "x" else self.kind + ("p" if self.sign > 0 else "m")
        return name if self.power == 1 else f"{name}^{self.power}"

    @classmethod
    def parse(cls, label: str) -> "GateOp":
        """Inverse of :attr:`label`, e.g. ``"x90p^33"`` or ``"y90m"``."""
        m = _LABEL_RE.match(label.strip())
        if m is None:
            raise ValueError(f"cannot parse gate label {label!r}")
        name, power = m.group(1), int(m.group(2)) if m.group(2) else 1
        if name == "id":
            return cls.identity()
        if name == "x":
            return cls("x", 1, power)
        return cls(name[:3], 1 if name.endswith("p") else -1, power)

    def __str__(self):
        return self.label


SIX_GATES = (GateOp.identity(), GateOp.flip(), GateOp.x90(-1), GateOp.x90(1),
             GateOp.y90(1), GateOp.y90(-1))
"""The SPAM calibration set, ordered as (f+z, f-z, f+y, f-y, f+x, f-x)."""

FOUR_GATES = (GateOp.identity(), GateOp.flip(), GateOp.x90(-1), GateOp.y90(1))
"""Gates for direct POVM estimation, giving (f_z, f_-z, f_y, f_x)."""


def eight_gates(n_rep: int = 8) -> tuple:
    """The SPAM set extended with (X90)^(4n) and (X90)^(4n+1)."""
    if n_rep < 1:
        raise ValueError("n_rep must be at least 1")
    return SIX_GATES + (GateOp.x90(1, 4 * n_rep), GateOp.x90(1, 4 * n_rep + 1))


def gate_power_matrix(axis: str, sign: int, j: int, theta: float = 0.0) -> np.ndarray:
    """Closed-form j-th power of the X+-90 or Y+-90 rotation with over-rotation theta."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    angle = j * (math.pi / 2 + theta)
    c, s = math.cos(angle), sign * math.sin(angle)
    if axis == "x":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


FLIP_MATRIX = np.diag([1.0, -1.0, -1.0])


def gate_matrix(gate: GateOp, theta: float = 0.0) -> np.ndarray:
    if gate.is_identity:
        return np.eye(3)
    if gate.kind == "x":
        return FLIP_MATRIX if gate.power % 2 else np.eye(3)
    return gate_power_matrix(gate.kind[0], gate.sign, gate.power, theta)


def apply_gate(gate: GateOp, r: BlochVector, theta: float = 0.0) -> BlochVector:
    return BlochVector.from_array(gate_matrix(gate, theta) @ r.as_array())


def rotation_generator(yhat: float, zhat: float) -> np.ndarray:
    if yhat * yhat + zhat * zhat > 1.0 + EXACT_TOL:
        raise ValueError("rotation axis needs yhat^2 + zhat^2 <= 1")
    xhat = math.sqrt(max(0.0, 1.0 - yhat * yhat - zhat * zhat))
    return np.array([[0.0, -zhat, yhat], [zhat, 0.0, -xhat], [-yhat, xhat, 0.0]])


def rotation_matrix_tilted(yhat: float, zhat: float, angle: float) -> np.ndarray:
    """Rotation by ``angle`` about the unit axis (sqrt(1-yhat^2-zhat^2), yhat, zhat)."""
    u = rotation_generator(yhat, zhat)
    return np.eye(3) + math.sin(angle) * u + (1.0 - math.cos(angle)) * (u @ u)


def apply_depolarizing(r: BlochVector, eps: float, j: int = 1) -> BlochVector:
    if not 0.0 <= eps < 1.0 or j < 0:
        raise ValueError("need 0 <= eps < 1 and j >= 0")
    return BlochVector.from_array((1.0 - eps) ** j * r.as_array())


def outcome_probability(r: BlochVector, povm: PovmParams) -> float:
    """Probability of reading 0: pi0 + pix x + piy y + piz z."""
    return povm.pi0 + povm.pix * r.x + povm.piy * r.y + povm.piz * r.z


def six_gate_probabilities_general(r0: BlochVector, povm: PovmParams) -> np.ndarray:
    """(f+z, f-z, f+y, f-y, f+x, f-x) for a general POVM without gate errors."""
    x0, y0, z0 = r0.x, r0.y, r0.z
    p0, px, py, pz = povm.pi0, povm.pix, povm.piy, povm.piz
    return np.array([
        p0 + px * x0 + py * y0 + pz * z0,
        p0 + px * x0 - py * y0 - pz * z0,
        p0 + py * z0 + px * x0 - pz * y0,
        p0 - py * z0 + px * x0 + pz * y0,
        p0 + px * z0 - pz * x0 + py * y0,
        p0 - px * z0 + pz * x0 + py * y0,
    ])


def spam_sequence_probabilities(p: SpamParams) -> np.ndarray:
    """(f+z, f-z, f+y, f-y, f+x, f-x) with pix = piy = 0 and ideal gates."""
    return np.array([
        p.pi0 + p.piz * p.z0,
        p.pi0 - p.piz * p.z0,
        p.pi0 - p.piz * p.y0,
        p.pi0 + p.piz * p.y0,
        p.pi0 - p.piz * p.x0,
        p.pi0 + p.piz * p.x0,
    ])


def full_sequence_probability(p: FullParams, seq: GateOp) -> float:
    r = p.spam.bloch.as_array()
    r = gate_matrix(seq, p.theta) @ r
    r = (1.0 - p.eps) ** seq.depolarizing_steps * r
    return p.spam.pi0 + p.spam.piz * r[2]


def final_z(params: np.ndarray, seq: GateOp) -> np.ndarray:
    """Vectorized z component after ``seq`` for columns (x0, y0, z0[, ..., theta, eps]).

    ``params`` has shape (n, 5) or (n, 7); with five columns theta = eps = 0.
    """
    x0, y0, z0 = params[:, 0], params[:, 1], params[:, 2]
    if seq.is_identity:
        return z0
    if seq.kind == "x":
        z = -z0 if seq.power % 2 else z0
    else:
        if params.shape[1] > 5:
            angle = seq.power * (math.pi / 2 + params[:, 5])
            c, s = np.cos(angle), seq.sign * np.sin(angle)
        else:
            angle = seq.power * math.pi / 2
            c, s = math.cos(angle), seq.sign * math.sin(angle)
        z = s * y0 + c * z0 if seq.kind == "x90" else -s * x0 + c * z0
    if params.shape[1] > 6:
        z = (1.0 - params[:, 6]) ** seq.depolarizing_steps * z
    return z


def sequence_probabilities(params: np.ndarray, sequences: Sequence[GateOp]) -> np.ndarray:
    """Outcome-0 probabilities, shape (n, len(sequences)), for parameter rows.

    Columns of ``params`` are (x0, y0, z0, pi0, piz[, theta, eps]).
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    pi0, piz = params[:, 3], params[:, 4]
    out = np.empty((params.shape[0], len(sequences)))
    for k, seq in enumerate(sequences):
        out[:, k] = pi0 + piz * final_z(params, seq)
    return out
