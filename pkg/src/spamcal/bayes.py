"""Bayesian estimation by Monte Carlo integration over a uniform prior.

The posterior is represented by points drawn uniformly over a domain inside
the prior box (physicality constraints enforced by rejection) and weighted
by their likelihood.  The posterior of the gate parameters is orders of
magnitude narrower than any reasonable prior box, so by default a short
tempered importance-sampling pass first locates the posterior, and the full
sample budget is then spent on a uniform ellipsoid around it.  A uniform
prior restricted to a domain that holds all the posterior mass gives the
same posterior, so the final estimator is still a flat-weight integral.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from . import model as qm
from .simulator import CountRecord, make_generator

SAMPLE_PRESETS = {"default": 5_000_000, "max": 80_000_000}
MIN_ACCEPTANCE = 1e-4


class PriorError(ValueError):
    """The prior box is degenerate or admits almost no physical points."""


class EstimationError(RuntimeError):
    """Every sampled point is incompatible with the observed counts."""


# ---------------------------------------------------------------------------
# parameter models


def _spam_constraint(x: np.ndarray) -> np.ndarray:
    r2 = x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2
    return (r2 <= 1.0) & (x[:, 3] - x[:, 4] >= 0.0) & (x[:, 3] + x[:, 4] <= 1.0)


def _full_constraint(x: np.ndarray) -> np.ndarray:
    return _spam_constraint(x) & (np.abs(x[:, 5]) < math.pi / 2) & (x[:, 6] >= 0.0) & (x[:, 6] < 1.0)


def _polar(x: np.ndarray, ref: Optional[np.ndarray]) -> tuple:
    rho = np.hypot(x[:, 0], x[:, 1])
    phi = np.arctan2(x[:, 1], x[:, 0])
    if ref is not None and math.hypot(ref[0], ref[1]) > 1e-12:
        # unwrap around the reference direction so averages do not straddle +-pi
        phi0 = math.atan2(ref[1], ref[0])
        phi = phi0 + np.remainder(phi - phi0 + math.pi, 2 * math.pi) - math.pi
    return ("rho0", "phi0"), np.column_stack([rho, phi])


@dataclass(frozen=True)
class ParameterModel:
    """Everything the sampler needs to know about one parametrization."""

    name: str
    names: tuple
    default_bounds: tuple
    constraint: Callable[[np.ndarray], np.ndarray]
    probabilities: Callable[[np.ndarray, Sequence], np.ndarray]
    derived: Optional[Callable] = None

    @property
    def dim(self) -> int:
        return len(self.names)


SPAM_MODEL = ParameterModel(
    "spam",
    ("x0", "y0", "z0", "pi0", "piz"),
    ((-0.2, 0.2), (-0.2, 0.2), (0.8, 1.0), (0.4, 0.6), (0.35, 0.5)),
    _spam_constraint,
    qm.sequence_probabilities,
    _polar,
)

FULL_MODEL = ParameterModel(
    "full",
    ("x0", "y0", "z0", "pi0", "piz", "theta", "eps"),
    SPAM_MODEL.default_bounds + ((-0.1, 0.1), (0.0, 0.01)),
    _full_constraint,
    qm.sequence_probabilities,
    _polar,
)


def binomial_toy_model() -> ParameterModel:
    """One unknown probability p observed directly; used as an analytic check."""

    def probs(x, sequences):
        return np.repeat(x[:, :1], len(sequences), axis=1)

    return ParameterModel("toy", ("p",), ((0.0, 1.0),), lambda x: np.ones(len(x), bool), probs)


# ---------------------------------------------------------------------------
# prior box


@dataclass(frozen=True)
class PriorBox:
    names: tuple
    lower: np.ndarray
    upper: np.ndarray
    constraint: Callable[[np.ndarray], np.ndarray] = field(compare=False)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != (len(self.names),) or hi.shape != lo.shape:
            raise PriorError("bounds must have one entry per parameter")
        if np.any(hi < lo) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise PriorError("every axis needs finite bounds with lower <= upper")

    @classmethod
    def for_model(cls, model: ParameterModel, overrides: Optional[dict] = None) -> "PriorBox":
        bounds = dict(zip(model.names, model.default_bounds))
        for key, value in (overrides or {}).items():
            if key not in bounds:
                raise PriorError(f"unknown parameter {key!r} for model {model.name!r}")
            bounds[key] = tuple(value)
        lo, hi = zip(*(bounds[n] for n in model.names))
        return cls(model.names, np.array(lo), np.array(hi), model.constraint)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        inside = np.all((x >= self.lower) & (x <= self.upper), axis=1)
        return inside & self.constraint(x)

    def restrict(self, lower, upper) -> "PriorBox":
        """Sub-box clipped to this box, with the same constraint."""
        lo = np.clip(np.asarray(lower, float), self.lower, self.upper)
        hi = np.clip(np.asarray(upper, float), self.lower, self.upper)
        return PriorBox(self.names, lo, np.maximum(lo, hi), self.constraint)

    def within(self, other: "PriorBox", rtol: float = 1e-9) -> bool:
        slack = rtol * np.maximum(other.widths, 1e-300)
        return bool(np.all(self.lower >= other.lower - slack) and np.all(self.upper <= other.upper + slack))


def _rejection_sample(draw, accept, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    chunks, accepted, attempts = [], 0, 0
    rate = 1.0
    while accepted < n_samples:
        batch = int(min(max(1.25 * (n_samples - accepted) / rate, 1024), 1 << 20))
        x = draw(rng, batch)
        x = x[accept(x)]
        attempts += batch
        accepted += len(x)
        chunks.append(x)
        rate = max(accepted / attempts, MIN_ACCEPTANCE)
        if attempts >= 100_000 and accepted < MIN_ACCEPTANCE * attempts:
            raise PriorError(f"acceptance rate {accepted / attempts:.2e} is below {MIN_ACCEPTANCE}")
    return np.concatenate(chunks)[:n_samples]


def sample_prior(box: PriorBox, n_samples: int, seed: int, *key: int) -> np.ndarray:
    """Uniform points in ``box`` that satisfy its constraint, shape (n_samples, dim)."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")

    def draw(rng, batch):
        return box.lower + box.widths * rng.random((batch, box.dim))

    return _rejection_sample(draw, box.constraint, n_samples, make_generator(seed, *key))


@dataclass(frozen=True)
class EllipsoidRegion:
    """Uniform domain {center + radius * chol @ u : |u| <= 1} intersected with a prior box."""

    prior: PriorBox
    center: np.ndarray
    chol: np.ndarray
    radius: float

    def draw(self, rng: np.random.Generator, batch: int) -> np.ndarray:
        d = len(self.center)
        z = rng.standard_normal((batch, d))
        scale = rng.random(batch) ** (1.0 / d)
        scale *= self.radius / np.sqrt(np.einsum("ij,ij->i", z, z))
        z *= scale[:, None]
        x = z @ self.chol.T
        x += self.center
        return x

    def bounds(self) -> tuple:
        half = self.radius * np.linalg.norm(self.chol, axis=1)
        lo = np.clip(self.center - half, self.prior.lower, self.prior.upper)
        hi = np.clip(self.center + half, self.prior.lower, self.prior.upper)
        return lo, hi

    def sample(self, n_samples: int, seed: int, *key: int) -> np.ndarray:
        return _rejection_sample(self.draw, self.prior.contains, n_samples, make_generator(seed, *key))


# ---------------------------------------------------------------------------
# likelihood and weights


def log_likelihood(counts: CountRecord, probs) -> np.ndarray:
    """sum_k s_k ln p_k + (n_k - s_k) ln(1 - p_k), for one point or rows of points.

    Impossible observations give -inf.
    """
    probs = np.asarray(probs, dtype=float)
    scalar = probs.ndim == 1
    probs = np.atleast_2d(probs)
    if probs.shape[1] != len(counts):
        raise ValueError(f"{probs.shape[1]} probabilities for {len(counts)} sequences")
    total = np.zeros(probs.shape[0])
    with np.errstate(divide="ignore"):
        for k in range(len(counts)):
            p = np.clip(probs[:, k], 0.0, 1.0)
            s, f = counts.successes[k], counts.shots[k] - counts.successes[k]
            if s:
                total += s * np.log(p)
            if f:
                total += f * np.log1p(-p)
    return total[0] if scalar else total


def _model_loglik(x: np.ndarray, counts: CountRecord, model: ParameterModel) -> np.ndarray:
    if len(counts) == 0:
        return np.zeros(len(x))
    return log_likelihood(counts, model.probabilities(x, counts.sequences))


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    top = np.max(logw)
    if not np.isfinite(top):
        raise EstimationError("all sampled points have zero likelihood; the prior box does not match the data")
    w = np.exp(logw - top)
    return w / w.sum()


def posterior_weights(samples: np.ndarray, counts: CountRecord, model: ParameterModel) -> np.ndarray:
    """Normalized likelihood weights of uniform prior samples."""
    return _normalize_log(_model_loglik(np.atleast_2d(samples), counts, model))


def effective_sample_size(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


# ---------------------------------------------------------------------------
# summaries


@dataclass
class PosteriorSummary:
    names: tuple
    mean: np.ndarray
    cov: np.ndarray
    edges: list
    masses: list
    ess: float
    n_samples: int
    derived: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __getitem__(self, name: str) -> tuple:
        """(mean, std) of a parameter or derived quantity."""
        if name in self.derived:
            return self.derived[name]
        k = self.index(name)
        return float(self.mean[k]), float(self.std[k])

    def marginal(self, name: str) -> tuple:
        """(bin_centers, masses) for one parameter."""
        k = self.index(name)
        e = self.edges[k]
        return 0.5 * (e[1:] + e[:-1]), self.masses[k]

    def to_dict(self) -> dict:
        return {
            "schema": "spamcal.posterior/1",
            "parameters": {
                n: {"mean": float(m), "std": float(s)} for n, m, s in zip(self.names, self.mean, self.std)
            },
            "names": list(self.names),
            "mean": [float(v) for v in self.mean],
            "cov": [[float(v) for v in row] for row in self.cov],
            "derived": {k: {"mean": float(m), "std": float(s)} for k, (m, s) in self.derived.items()},
            "ess": float(self.ess),
            "n_samples": int(self.n_samples),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorSummary":
        names = tuple(d["names"])
        return cls(names, np.array(d["mean"]), np.array(d["cov"]), [], [], d["ess"], d["n_samples"],
                   {k: (v["mean"], v["std"]) for k, v in d.get("derived", {}).items()},
                   d.get("diagnostics", {}))


def _histograms(x: np.ndarray, w: np.ndarray, lower, upper, bins: int) -> np.ndarray:
    out = np.empty((x.shape[1], bins))
    for k in range(x.shape[1]):
        width = upper[k] - lower[k]
        if width > 0:
            idx = np.clip(((x[:, k] - lower[k]) / width * bins).astype(np.int64), 0, bins - 1)
        else:
            idx = np.zeros(len(x), dtype=np.int64)
        out[k] = np.bincount(idx, weights=w, minlength=bins)
    return out


def _edges(lower, upper, bins: int) -> list:
    return [np.linspace(lo, hi, bins + 1) for lo, hi in zip(lower, upper)]


def summarize(samples: np.ndarray, weights: np.ndarray, histogram_bins: int = 64,
              names: Optional[Sequence[str]] = None, box: Optional[PriorBox] = None,
              derived: Optional[dict] = None) -> PosteriorSummary:
    """Weighted mean, covariance and marginal histograms of a weighted sample."""
    x = np.asarray(samples, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    mean = w @ x
    d = x - mean
    cov = (d * w[:, None]).T @ d
    cov = 0.5 * (cov + cov.T)
    lower, upper = (box.lower, box.upper) if box is not None else (x.min(axis=0), x.max(axis=0))
    hist = _histograms(x, w, lower, upper, histogram_bins)
    der = {}
    for k, v in (derived or {}).items():
        m = float(w @ v)
        der[k] = (m, float(math.sqrt(max(w @ (v - m) ** 2, 0.0))))
    names = tuple(names) if names is not None else tuple(f"p{k}" for k in range(x.shape[1]))
    return PosteriorSummary(names, mean, cov, _edges(lower, upper, histogram_bins), list(hist),
                            effective_sample_size(w), len(w), der)


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class EstimationConfig:
    """Sampling budget and numerical knobs.

    With ``zoom`` enabled, ``n_explore`` points per stage feed a tempered
    adaptive importance sampler that locates the posterior; the final
    ``n_samples`` points are then drawn uniformly from an ellipsoid covering
    all but a ``tail`` fraction of a Gaussian with the explored covariance.
    """

    n_samples: int = SAMPLE_PRESETS["default"]
    seed: int = 0
    prior: Optional[dict] = None
    histogram_bins: int = 64
    zoom: bool = True
    n_explore: int = 100_000
    ess_target: float = 1000.0
    proposal_inflation: float = 1.5
    tail: float = 1e-6
    max_stages: int = 30
    chunk_size: int = 1 << 18
    workers: int = 1

    def __post_init__(self):
        if not 1 <= self.n_samples <= SAMPLE_PRESETS["max"]:
            raise ValueError(f"n_samples must lie in 1..{SAMPLE_PRESETS['max']}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _ess_log(logw: np.ndarray) -> float:
    w = np.exp(logw - logw.max())
    return float(w.sum() ** 2 / np.sum(w * w))


def _tempering(logl: np.ndarray, logq: np.ndarray, beta_min: float, target: float) -> float:
    """Largest beta in [beta_min, 1] keeping the ESS of exp(beta L - log q) above target."""
    if _ess_log(logl - logq) >= target:
        return 1.0
    lo, hi = math.log(beta_min), 0.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if _ess_log(math.exp(mid) * logl - logq) >= target:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def _weighted_moments(x: np.ndarray, logw: np.ndarray) -> tuple:
    w = np.exp(logw - logw.max())
    w /= w.sum()
    mean = w @ x
    d = x - mean
    cov = (d * w[:, None]).T @ d
    return mean, 0.5 * (cov + cov.T)


def _stabilized_chol(cov: np.ndarray, widths: np.ndarray) -> np.ndarray:
    jitter = (1e-9 * widths) ** 2
    return np.linalg.cholesky(cov + np.diag(jitter))


def _explore(counts: CountRecord, model: ParameterModel, prior: PriorBox, cfg: EstimationConfig):
    """Tempered adaptive importance sampling; returns posterior mean and covariance."""
    target = min(cfg.ess_target, 0.25 * cfg.n_explore)
    x = sample_prior(prior, cfg.n_explore, cfg.seed, 1, 0)
    logl = _model_loglik(x, counts, model)
    logq = np.zeros(len(x))
    beta, trace = 1e-12, []
    for stage in range(cfg.max_stages):
        ok = np.isfinite(logl)
        if not np.any(ok):
            raise EstimationError("all sampled points have zero likelihood; the prior box does not match the data")
        x, logl, logq = x[ok], logl[ok], logq[ok]
        beta = _tempering(logl, logq, beta, target)
        logw = beta * logl - logq
        mean, cov = _weighted_moments(x, logw)
        ess = _ess_log(logw)
        trace.append({"stage": stage, "beta": beta, "ess": ess})
        if beta == 1.0 and ess >= target and stage > 0:
            return mean, cov, trace, True
        chol = cfg.proposal_inflation * _stabilized_chol(cov, prior.widths)
        inv = np.linalg.inv(chol)

        def draw(rng, batch):
            return mean + rng.standard_normal((batch, prior.dim)) @ chol.T

        x = _rejection_sample(draw, prior.contains, cfg.n_explore, make_generator(cfg.seed, 1, stage + 1))
        logl = _model_loglik(x, counts, model)
        logq = -0.5 * np.sum(((x - mean) @ inv.T) ** 2, axis=1)
    return mean, cov, trace, False


def _chunk_stats(sampler, lower, upper, counts, model, seed, chunk, size, ref, bins):
    x = sampler(size, seed, 2, chunk)
    logl = _model_loglik(x, counts, model)
    top = np.max(logl)
    if not np.isfinite(top):
        return None
    w = np.exp(logl - top)
    cols = [x - ref]
    if model.derived is not None:
        cols.append(model.derived(x, ref)[1])
    y = np.concatenate(cols, axis=1)
    hist = _histograms(x, w, lower, upper, bins)
    return top, w.sum(), np.sum(w * w), w @ y, (y * w[:, None]).T @ y, hist


def _combine(parts):
    parts = [p for p in parts if p is not None]
    if not parts:
        raise EstimationError("all sampled points have zero likelihood; the prior box does not match the data")
    top = max(p[0] for p in parts)
    s0 = s0sq = 0.0
    s1 = s2 = hist = 0.0
    for m, a0, a0sq, a1, a2, h in parts:  # fixed chunk order keeps the reduction deterministic
        f = math.exp(m - top)
        s0 += f * a0
        s0sq += f * f * a0sq
        s1 = s1 + f * a1
        s2 = s2 + f * a2
        hist = hist + f * h
    return s0, s0sq, s1, s2, hist


def estimate(counts: CountRecord, model: ParameterModel, config: EstimationConfig = EstimationConfig()) -> PosteriorSummary:
    """Posterior mean, covariance and marginals of ``model`` given ``counts``."""
    prior = PriorBox.for_model(model, config.prior)
    zoom = config.zoom and bool(np.all(prior.widths > 0))
    diagnostics = {"model": model.name, "zoom": zoom}
    if zoom:
        ref, cov, trace, converged = _explore(counts, model, prior, config)
        radius = math.sqrt(stats.chi2.isf(config.tail, prior.dim))
        region = EllipsoidRegion(prior, ref, _stabilized_chol(cov, prior.widths), radius)
        sampler, (lower, upper) = region.sample, region.bounds()
        diagnostics.update(converged=converged, stages=len(trace), n_explored=len(trace) * config.n_explore,
                           final_beta=trace[-1]["beta"], radius=radius)
    else:
        ref = 0.5 * (prior.lower + prior.upper)
        sampler, lower, upper = partial(sample_prior, prior), prior.lower, prior.upper

    n_chunks = -(-config.n_samples // config.chunk_size)
    sizes = [min(config.chunk_size, config.n_samples - c * config.chunk_size) for c in range(n_chunks)]

    def work(c):
        return _chunk_stats(sampler, lower, upper, counts, model, config.seed, c, sizes[c], ref,
                            config.histogram_bins)

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(work, range(n_chunks)))
    else:
        parts = [work(c) for c in range(n_chunks)]
    s0, s0sq, s1, s2, hist = _combine(parts)

    d = model.dim
    centered = s1 / s0
    cov_all = s2 / s0 - np.outer(centered, centered)
    cov_all = 0.5 * (cov_all + cov_all.T)
    mean = ref + centered[:d]
    derived = {}
    if model.derived is not None:
        dnames = model.derived(np.zeros((1, d)), None)[0]
        for k, name in enumerate(dnames):
            derived[name] = (float(centered[d + k]), float(math.sqrt(max(cov_all[d + k, d + k], 0.0))))
    diagnostics.update(region_lower=[float(v) for v in lower], region_upper=[float(v) for v in upper])
    return PosteriorSummary(model.names, mean, cov_all[:d, :d], _edges(lower, upper, config.histogram_bins),
                            list(hist / s0), s0 * s0 / s0sq, config.n_samples, derived, diagnostics)


def estimate_spam(counts: CountRecord, config: EstimationConfig = EstimationConfig()) -> PosteriorSummary:
    """Posterior over (x0, y0, z0, pi0, piz) from calibration counts without gate errors."""
    return estimate(counts, SPAM_MODEL, config)


def estimate_full(counts: CountRecord, config: EstimationConfig = EstimationConfig()) -> PosteriorSummary:
    """Posterior over (x0, y0, z0, pi0, piz, theta, eps)."""
    return estimate(counts, FULL_MODEL, config)
