"""Mitigation quantities computed from estimated error parameters.

* pre-rotation angles that undo a coherent preparation error,
* tensor-product readout transition matrices and their constrained
  least-squares inversion,
* the linear pulse-amplitude correction for an over-rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simulator import _check_eps, apply_qubit_maps, parity_signs

MAX_QUBITS = 12
X_CORRECTION_THRESHOLD = 0.015
AMPLITUDE_ETA = 1.33


class MitigationError(ValueError):
    pass


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class PreRotation:
    """Apply R_z(-phi0) then R_y(-theta0) to bring the initial state onto +z.

    ``apply_x_correction`` is False when |x0| is below the threshold; the
    R_y rotation is then skipped on hardware to avoid adding gate noise.
    """

    phi0: float
    theta0: float
    apply_x_correction: bool

    @property
    def matrix(self) -> np.ndarray:
        return rotation_y(-self.theta0) @ rotation_z(-self.phi0)

    def apply(self, r) -> np.ndarray:
        return self.matrix @ np.asarray(r, dtype=float)


def prerotation_from_state(x0: float, y0: float, z0: float,
                           threshold: float = X_CORRECTION_THRESHOLD) -> PreRotation:
    if x0 * x0 + y0 * y0 + z0 * z0 > 1.0 + 1e-12:
        raise ValueError("initial Bloch vector is longer than 1")
    rho0 = math.hypot(x0, y0)
    phi0 = math.atan2(y0, x0) if rho0 >= 1e-12 else 0.0
    if phi0 <= -math.pi:  # atan2(-0.0, x < 0); keep phi0 in (-pi, pi]
        phi0 = math.pi
    theta0 = math.atan2(rho0, z0)
    return PreRotation(phi0, theta0, abs(x0) >= threshold)


def readout_eps(pi0: float, piz: float) -> tuple:
    """Classical bit-flip probabilities (eps0, eps1) = (1 - pi0 - piz, pi0 - piz)."""
    eps0, eps1 = 1.0 - (pi0 + piz), pi0 - piz
    tol = 1e-12
    if not (-tol <= eps0 <= 1 + tol and -tol <= eps1 <= 1 + tol):
        raise ValueError(f"pi0 +- piz must lie in [0, 1], got eps = ({eps0}, {eps1})")
    return min(max(eps0, 0.0), 1.0), min(max(eps1, 0.0), 1.0)


@dataclass(frozen=True)
class MitigationMatrix:
    """Column-stochastic map from true to observed bitstring probabilities."""

    matrix: np.ndarray
    eps_pairs: tuple

    @property
    def n_qubits(self) -> int:
        return len(self.eps_pairs)


def single_qubit_block(eps0: float, eps1: float) -> np.ndarray:
    return np.array([[1.0 - eps0, eps1], [eps0, 1.0 - eps1]])


def assemble_mitigation_matrix(eps_pairs) -> MitigationMatrix:
    eps_pairs = [tuple(map(float, e)) for e in eps_pairs]
    n = len(eps_pairs)
    if not 1 <= n <= MAX_QUBITS:
        raise MitigationError(f"dense mitigation supports 1..{MAX_QUBITS} qubits, got {n}")
    eps = _check_eps(eps_pairs, n)
    m = np.ones((1, 1))
    for e0, e1 in eps:
        m = np.kron(m, single_qubit_block(e0, e1))
    return MitigationMatrix(m, tuple(eps_pairs))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum p = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


@dataclass(frozen=True)
class MitigatedDistribution:
    probabilities: np.ndarray
    residual_norm: float
    condition_number: float
    iterations: int


def mitigate_counts(observed, m: MitigationMatrix, tol: float = 1e-14, max_iter: int = 20000,
                    max_condition: float = 1e12) -> MitigatedDistribution:
    """Least-squares inversion of readout noise on the probability simplex.

    Minimizes ||M p - f|| with f the observed frequencies, subject to p >= 0
    and sum p = 1.  The unconstrained solution is returned when it is
    already feasible; otherwise accelerated projected gradient is used.
    """
    observed = np.asarray(observed, dtype=float).reshape(-1)
    if observed.shape[0] != 2 ** m.n_qubits:
        raise MitigationError(f"{observed.shape[0]} counts for a {2 ** m.n_qubits}-outcome matrix")
    total = observed.sum()
    if not total > 0:
        raise MitigationError("total counts must be positive")
    f = observed / total
    blocks = [single_qubit_block(e0, e1) for e0, e1 in m.eps_pairs]
    # the 2-norm condition number of a Kronecker product is the product over factors
    cond = float(np.prod([np.linalg.cond(b) for b in blocks]))
    if not cond < max_condition:
        raise MitigationError(f"mitigation matrix is singular or ill-conditioned (condition {cond:.3g})")

    p = apply_qubit_maps(f, [np.linalg.inv(b) for b in blocks])
    iterations = 0
    if np.any(p < -1e-15):
        step = 1.0 / float(np.prod([np.linalg.norm(b, 2) for b in blocks])) ** 2
        blocks_t = [b.T for b in blocks]
        x = project_simplex(p)
        y, t = x.copy(), 1.0
        for iterations in range(1, max_iter + 1):
            resid = apply_qubit_maps(y, blocks) - f
            x_new = project_simplex(y - step * apply_qubit_maps(resid, blocks_t))
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            done = np.max(np.abs(x_new - x)) < tol
            x, t = x_new, t_new
            if done:
                break
        p = x
    else:
        p = np.clip(p, 0.0, None)
        p /= p.sum()
    return MitigatedDistribution(p, float(np.linalg.norm(apply_qubit_maps(p, blocks) - f)), cond, iterations)


def expectation_parity(probs) -> float:
    """sum_s p(s) (-1)^|s|: the expectation of X^N from X-basis outcome data."""
    probs = np.asarray(probs, dtype=float).reshape(-1)
    n_qubits = int(round(math.log2(len(probs))))
    if 2 ** n_qubits != len(probs):
        raise ValueError("distribution length must be a power of two")
    return float(parity_signs(n_qubits) @ probs)


def amplitude_correction(amplitude: float, theta: float, eta: float = AMPLITUDE_ETA) -> float:
    """Rescaled pulse amplitude (1 - eta theta / pi) A."""
    return (1.0 - eta * theta / math.pi) * amplitude


def bitstrings(n_qubits: int) -> list:
    return [format(i, f"0{n_qubits}b") for i in range(2 ** n_qubits)]


def counts_from_mapping(counts: dict) -> np.ndarray:
    """Dense count vector from a {bitstring: count} mapping (qubit 0 leftmost)."""
    if not counts:
        raise MitigationError("empty count mapping")
    widths = {len(k) for k in counts}
    if len(widths) != 1:
        raise MitigationError("bitstrings must all have the same length")
    n = widths.pop()
    out = np.zeros(2 ** n)
    for key, value in counts.items():
        if set(key) - {"0", "1"}:
            raise MitigationError(f"invalid bitstring {key!r}")
        out[int(key, 2)] += float(value)
    return out
