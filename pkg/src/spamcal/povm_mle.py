"""Closed-form POVM estimates when preparation and gate errors are negligible.

With the qubit assumed to start in |0> and the gates {1, X, X-90, Y90}
assumed perfect, the four outcome-0 frequencies are linear in the POVM
parameters and can be inverted directly.  Error bars follow from the normal
approximation of the binomial counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FOUR_GATES, PovmParams
from .simulator import CountRecord


@dataclass(frozen=True)
class FourProbEstimates:
    f_z: float
    f_mz: float
    f_x: float
    f_y: float
    n: int

    def __post_init__(self):
        for name in ("f_z", "f_mz", "f_x", "f_y"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("n must be at least 1")

    @classmethod
    def from_counts(cls, counts: CountRecord) -> "FourProbEstimates":
        """Pick the id, X, X-90 and Y90 sequences out of a count record."""
        sub = counts.select(FOUR_GATES)
        if len(set(sub.shots.tolist())) != 1:
            raise ValueError("the four sequences must share one shot count")
        f_z, f_mz, f_y, f_x = sub.frequencies
        return cls(float(f_z), float(f_mz), float(f_x), float(f_y), int(sub.shots[0]))


@dataclass(frozen=True)
class PovmEstimate:
    povm: PovmParams
    variances: dict
    n: int

    @property
    def std(self) -> dict:
        return {k: float(np.sqrt(v)) for k, v in self.variances.items()}

    def to_dict(self) -> dict:
        check = check_povm_constraints(self.povm)
        return {
            "schema": "spamcal.povm-mle/1",
            "parameters": {
                name: {"mean": float(getattr(self.povm, name)), "std": self.std[name]}
                for name in ("pi0", "pix", "piy", "piz")
            },
            "shots": self.n,
            "constraints_pass": check[0],
            "constraints_slack": check[1],
        }


def _binomial_var(f: float) -> float:
    return f * (1.0 - f)


def estimate_povm_mle(f: FourProbEstimates) -> PovmEstimate:
    pi0 = 0.5 * (f.f_z + f.f_mz)
    piz = 0.5 * (f.f_z - f.f_mz)
    base = _binomial_var(f.f_z) + _binomial_var(f.f_mz)
    var0 = base / (4 * f.n)
    variances = {
        "pi0": var0,
        "piz": var0,
        "pix": (4 * _binomial_var(f.f_x) + base) / (4 * f.n),
        "piy": (4 * _binomial_var(f.f_y) + base) / (4 * f.n),
    }
    return PovmEstimate(PovmParams(pi0, f.f_x - pi0, f.f_y - pi0, piz), variances, f.n)


def check_povm_constraints(p: PovmParams) -> tuple:
    """Positivity of both POVM elements.

    Returns ``(ok, slack)`` where slack is the smaller of
    pi0^2 - |pi|^2 and (1 - pi0)^2 - |pi|^2.
    """
    vec2 = p.pix ** 2 + p.piy ** 2 + p.piz ** 2
    slack = min(p.pi0 ** 2 - vec2, (1.0 - p.pi0) ** 2 - vec2)
    return bool(slack >= -1e-15 and 0.0 <= p.pi0 <= 1.0), float(slack)


def gaussian_validity(n: int, p: float, q: float = 9.0) -> bool:
    """True when both n p and n (1 - p) exceed q."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return bool(n * p > q and n * (1.0 - p) > q)
