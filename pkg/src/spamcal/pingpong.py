"""Ping-pong estimation of the X90 over-rotation.

Sequence j is X+90 followed by j repetitions of (X+90)^2, i.e. (X+90)^(2j+1).
Each curve z_j is fitted with

    z_j = a + (-1)^j [b + cos(pi/2 + 2 j theta)]

and the angle error at the calibrated amplitude is interpolated from a
cubic fit of theta against the amplitude scale A.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .model import FullParams, GateOp
from .simulator import CountRecord, ExperimentPlan, derive_seed, run_experiment

DEFAULT_J = tuple(range(10))
DEFAULT_AMPLITUDES = (0.98, 0.985, 0.99, 0.995, 1.005, 1.01, 1.015, 1.02)


@dataclass
class PingPongCurve:
    j: np.ndarray
    z: np.ndarray
    shots: int
    amplitude: float = 1.0

    def __post_init__(self):
        self.j = np.asarray(self.j, dtype=int)
        self.z = np.asarray(self.z, dtype=float)
        if self.j.shape != self.z.shape:
            raise ValueError("j and z must have the same length")
        if np.any(np.abs(self.z) > 1.0):
            raise ValueError("z_j must lie in [-1, 1]")

    @classmethod
    def from_counts(cls, counts: CountRecord, amplitude: float = 1.0) -> "PingPongCurve":
        """z_j = 2 s/n - 1 for a record produced by :func:`generate_pingpong_plan`."""
        j = []
        for seq in counts.sequences:
            if seq.kind != "x90" or seq.sign != 1 or seq.power % 2 != 1:
                raise ValueError(f"{seq.label} is not a ping-pong sequence")
            j.append((seq.power - 1) // 2)
        if len(set(counts.shots.tolist())) != 1:
            raise ValueError("all ping-pong sequences must use the same number of shots")
        return cls(j, 2.0 * counts.frequencies - 1.0, int(counts.shots[0]), amplitude)


@dataclass(frozen=True)
class PingPongFit:
    a: float
    b: float
    theta: float
    stderr: tuple
    rss: float
    converged: bool
    residuals: np.ndarray = field(repr=False, compare=False)

    @property
    def theta_stderr(self) -> float:
        return self.stderr[2]


@dataclass(frozen=True)
class AmplitudeSweepFit:
    """theta(A) = alpha + beta A + gamma A^2 + delta A^3."""

    alpha: float
    beta: float
    gamma: float
    delta: float
    theta_at_1: float
    theta_at_1_stderr: float
    rss: float

    def __call__(self, amplitude):
        a = np.asarray(amplitude, dtype=float)
        return self.alpha + self.beta * a + self.gamma * a ** 2 + self.delta * a ** 3


def pingpong_sequence(j: int) -> GateOp:
    if j < 0:
        raise ValueError("repetition count must be nonnegative")
    return GateOp.x90(1, 2 * j + 1)


def generate_pingpong_plan(j_list: Sequence[int] = DEFAULT_J, shots: int = 16384, seed: int = 0) -> ExperimentPlan:
    return ExperimentPlan(tuple(pingpong_sequence(j) for j in j_list), shots, seed)


def effective_theta(amplitude: float, theta_at_1: float, coefficient: float = 1.0) -> float:
    """Over-rotation produced by scaling the calibrated amplitude by ``amplitude``."""
    return theta_at_1 + coefficient * (math.pi / 2) * (amplitude - 1.0)


def pingpong_ansatz(j, a: float, b: float, theta: float) -> np.ndarray:
    j = np.asarray(j, dtype=float)
    sign = 1.0 - 2.0 * (j % 2)
    return a + sign * (b + np.cos(math.pi / 2 + 2.0 * j * theta))


def _grid_start(j: np.ndarray, z: np.ndarray, theta_range, n_grid: int) -> tuple:
    sign = 1.0 - 2.0 * (j % 2)
    thetas = np.linspace(theta_range[0], theta_range[1], n_grid)
    # for fixed theta the ansatz is linear in (a, b)
    design = np.column_stack([np.ones_like(sign), sign])
    pinv = np.linalg.pinv(design)
    target = z[None, :] - sign[None, :] * np.cos(math.pi / 2 + 2.0 * np.outer(thetas, j))
    ab = target @ pinv.T
    rss = np.sum((target - ab @ design.T) ** 2, axis=1)
    k = int(np.argmin(rss))
    return ab[k, 0], ab[k, 1], thetas[k]


def fit_pingpong(curve: PingPongCurve, theta_range=(-0.1, 0.1), n_grid: int = 801,
                 max_nfev: int = 2000) -> PingPongFit:
    j, z = curve.j.astype(float), curve.z
    if len(j) < 4:
        raise ValueError("need at least four points to fit three parameters")
    x0 = _grid_start(j, z, theta_range, n_grid)

    def resid(p):
        return pingpong_ansatz(j, *p) - z

    res = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    rss = float(np.sum(res.fun ** 2))
    dof = len(j) - 3
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * (rss / dof if dof > 0 else 0.0)
        stderr = tuple(float(math.sqrt(max(v, 0.0))) for v in np.diag(cov))
    except np.linalg.LinAlgError:
        stderr = (math.inf,) * 3
    a, b, theta = (float(v) for v in res.x)
    return PingPongFit(a, b, theta, stderr, rss, bool(res.success), res.fun.copy())


def fit_theta_vs_amplitude(amplitudes, thetas, sigmas=None) -> AmplitudeSweepFit:
    """Weighted cubic fit of theta against A, evaluated at A = 1.

    The fit is done in u = A - 1 for conditioning; the covariance is scaled by
    the reduced chi-square so the error bar reflects the spread of the points.
    """
    a = np.asarray(amplitudes, dtype=float)
    t = np.asarray(thetas, dtype=float)
    s = np.ones_like(t) if sigmas is None else np.asarray(sigmas, dtype=float)
    if len(np.unique(a)) < 5:
        raise ValueError("need at least five distinct amplitudes for a cubic fit")
    if np.any(s <= 0):
        raise ValueError("sigmas must be positive")
    u = a - 1.0
    design = np.column_stack([np.ones_like(u), u, u ** 2, u ** 3]) / s[:, None]
    coef, _, rank, _ = np.linalg.lstsq(design, t / s, rcond=None)
    if rank < 4:
        raise ValueError("amplitude design is rank deficient")
    resid = design @ coef - t / s
    chi2 = float(resid @ resid)
    dof = len(t) - 4
    cov = np.linalg.inv(design.T @ design) * (chi2 / dof if dof > 0 else 0.0)
    c0, c1, c2, c3 = coef
    # expand c0 + c1 (A-1) + c2 (A-1)^2 + c3 (A-1)^3 in powers of A
    alpha = c0 - c1 + c2 - c3
    beta = c1 - 2 * c2 + 3 * c3
    gamma = c2 - 3 * c3
    delta = c3
    rss = float(np.sum((design @ coef * s - t) ** 2))
    return AmplitudeSweepFit(float(alpha), float(beta), float(gamma), float(delta), float(c0),
                             float(math.sqrt(max(cov[0, 0], 0.0))), rss)


@dataclass
class AmplitudeSweep:
    curves: list
    fits: list
    sweep: AmplitudeSweepFit
    n_sequences: int
    total_shots: int


def simulate_pingpong(truth: FullParams, amplitude: float = 1.0, j_list: Sequence[int] = DEFAULT_J,
                      shots: int = 16384, seed: int = 0, coefficient: float = 1.0) -> PingPongCurve:
    """Run a ping-pong curve on the synthetic device at amplitude scale ``amplitude``."""
    scaled = replace(truth, theta=effective_theta(amplitude, truth.theta, coefficient))
    counts = run_experiment(scaled, generate_pingpong_plan(j_list, shots, seed))
    return PingPongCurve.from_counts(counts, amplitude)


def amplitude_sweep(curves: Sequence[PingPongCurve], **fit_kwargs) -> AmplitudeSweep:
    fits = [fit_pingpong(c, **fit_kwargs) for c in curves]
    sweep = fit_theta_vs_amplitude([c.amplitude for c in curves], [f.theta for f in fits],
                                   [f.theta_stderr for f in fits] if all(f.theta_stderr > 0 for f in fits) else None)
    n_seq = sum(len(c.j) for c in curves)
    return AmplitudeSweep(list(curves), fits, sweep, n_seq, int(sum(len(c.j) * c.shots for c in curves)))


def simulate_amplitude_sweep(truth: FullParams, amplitudes: Sequence[float] = DEFAULT_AMPLITUDES,
                             j_list: Sequence[int] = DEFAULT_J, shots: int = 16384, seed: int = 0,
                             coefficient: float = 1.0) -> AmplitudeSweep:
    curves = [simulate_pingpong(truth, amp, j_list, shots, derive_seed(seed, k), coefficient)
              for k, amp in enumerate(amplitudes)]
    return amplitude_sweep(curves)
