"""Command-line front end: ``spamcal --config run.json [--seed N] [--samples N] [--out DIR]``.

The config is strict JSON validated against a versioned schema.  Each run
writes ``<run_name>.<artifact>.{json,csv}`` files plus a summary and prints
one ``name = mean ± std`` line per estimated quantity.  Exit codes: 0 on
success, 2 for invalid configs or inputs, 3 when an estimation step fails.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from . import io
from .bayes import FULL_MODEL, SAMPLE_PRESETS, SPAM_MODEL, EstimationConfig, EstimationError, PriorError, estimate
from .mitigation import (
    AMPLITUDE_ETA, X_CORRECTION_THRESHOLD, MitigationError, amplitude_correction, assemble_mitigation_matrix,
    bitstrings, counts_from_mapping, expectation_parity, mitigate_counts, prerotation_from_state, readout_eps,
)
from .model import FOUR_GATES, SIX_GATES, FullParams, SpamParams, eight_gates
from .pingpong import DEFAULT_AMPLITUDES, DEFAULT_J, amplitude_sweep, simulate_amplitude_sweep
from .povm_mle import FourProbEstimates, estimate_povm_mle
from .simulator import CountRecord, ExperimentPlan, derive_seed, ghz_readout_distribution, make_generator, run_experiment

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3
SCHEMA_VERSION = 1

Seed = Annotated[int, Field(ge=0, lt=2 ** 64)]
Samples = Annotated[int, Field(ge=1, le=SAMPLE_PRESETS["max"])]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Truth(_Strict):
    x0: float = 0.0
    y0: float = 0.0
    z0: float = 1.0
    pi0: float = 0.5
    piz: float = 0.5
    theta: float = 0.0
    eps: float = 0.0

    @model_validator(mode="after")
    def _physical(self):
        self.params()
        return self

    def params(self) -> FullParams:
        return FullParams(SpamParams(self.x0, self.y0, self.z0, self.pi0, self.piz), self.theta, self.eps)


# magnitudes of a typical device: rho0 ~ 0.05, 1 - z0 ~ 0.01
DEFAULT_TRUTH = Truth(x0=0.05, y0=-0.03, z0=0.99, pi0=0.505, piz=0.485)


class _Base(_Strict):
    schema_version: Literal[1]
    run_name: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    out_dir: str = "."


class _Sampling(_Strict):
    n_samples: Samples = SAMPLE_PRESETS["default"]
    prior: dict[str, tuple[float, float]] = Field(default_factory=dict)
    histogram_bins: Annotated[int, Field(ge=1, le=4096)] = 64
    workers: Annotated[int, Field(ge=1, le=256)] = 1

    def _check_prior(self, names):
        for key, (lo, hi) in self.prior.items():
            if key not in names:
                raise ValueError(f"prior: unknown parameter {key!r}")
            if not lo <= hi:
                raise ValueError(f"prior.{key}: lower bound exceeds upper bound")


class SimulateConfig(_Base):
    mode: Literal["simulate"]
    seed: Seed = 0
    truth: Truth = Truth()
    gate_set: Literal["four", "six", "eight"] = "six"
    n_rep: Annotated[int, Field(ge=1)] = 8
    shots: Annotated[int, Field(ge=1)]


class EstimateConfig(_Base, _Sampling):
    mode: Literal["estimate-spam", "estimate-full"]
    seed: Seed = 0
    counts: str

    @model_validator(mode="after")
    def _prior_names(self):
        self._check_prior((SPAM_MODEL if self.mode == "estimate-spam" else FULL_MODEL).names)
        return self


class PovmMleConfig(_Base):
    mode: Literal["estimate-povm-mle"]
    counts: str


class QubitReadout(_Strict):
    pi0: float
    piz: float


class GhzSource(_Strict):
    n_qubits: Annotated[int, Field(ge=1, le=12)]
    phase: float = math.pi / 4
    shots: Optional[Annotated[int, Field(ge=1)]] = None


class InitialState(_Strict):
    x0: float
    y0: float
    z0: float


class GateCorrection(_Strict):
    theta: float
    amplitude: float = 1.0
    eta: float = AMPLITUDE_ETA


class MitigateConfig(_Base):
    mode: Literal["mitigate"]
    seed: Seed = 0
    counts: Annotated[Union[str, GhzSource, dict[str, float]], Field(union_mode="left_to_right")]
    readout: Optional[list[QubitReadout]] = None
    estimates: Optional[list[str]] = None
    state: Optional[InitialState] = None
    x_threshold: float = X_CORRECTION_THRESHOLD
    gate: Optional[GateCorrection] = None

    @model_validator(mode="after")
    def _one_readout_source(self):
        if (self.readout is None) == (self.estimates is None):
            raise ValueError("give exactly one of 'readout' or 'estimates'")
        return self


class PingPongConfig(_Base):
    mode: Literal["pingpong"]
    seed: Seed = 0
    curves: Optional[str] = None
    truth: Optional[Truth] = None
    amplitudes: list[float] = Field(default_factory=lambda: list(DEFAULT_AMPLITUDES))
    j: list[Annotated[int, Field(ge=0)]] = Field(default_factory=lambda: list(DEFAULT_J))
    shots: Annotated[int, Field(ge=1)] = 16384
    coupling: float = 1.0

    @model_validator(mode="after")
    def _one_source(self):
        if (self.curves is None) == (self.truth is None):
            raise ValueError("give exactly one of 'curves' (CSV path) or 'truth' (simulate)")
        return self


class ClosedLoopConfig(_Base, _Sampling):
    mode: Literal["closed-loop"]
    seed: Seed = 0
    truth: Truth = DEFAULT_TRUTH
    model: Literal["spam", "full"] = "spam"
    n_rep: Annotated[int, Field(ge=1)] = 8
    shots: Annotated[int, Field(ge=1)] = 16384
    pingpong: bool = False
    amplitudes: list[float] = Field(default_factory=lambda: list(DEFAULT_AMPLITUDES))
    j: list[Annotated[int, Field(ge=0)]] = Field(default_factory=lambda: list(DEFAULT_J))

    @model_validator(mode="after")
    def _consistent(self):
        self._check_prior((SPAM_MODEL if self.model == "spam" else FULL_MODEL).names)
        if self.pingpong and self.model != "full":
            raise ValueError("pingpong comparison needs model 'full'")
        return self


RunConfig = Annotated[
    Union[SimulateConfig, EstimateConfig, PovmMleConfig, MitigateConfig, PingPongConfig, ClosedLoopConfig],
    Field(discriminator="mode"),
]
_ADAPTER = TypeAdapter(RunConfig)


class InputError(ValueError):
    """Bad input files referenced by an otherwise valid config."""


def parse_config(raw: dict):
    return _ADAPTER.validate_python(raw)


# ---------------------------------------------------------------------------
# runners


class _Run:
    def __init__(self, cfg, base: Path, out: Path):
        self.cfg, self.base, self.out = cfg, base, out
        self.artifacts = []

    def path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base / p

    def emit(self, artifact: str, ext: str) -> Path:
        p = self.out / f"{self.cfg.run_name}.{artifact}.{ext}"
        self.artifacts.append(p.name)
        return p

    def load_json(self, rel: str):
        try:
            return io.read_json(self.path(rel))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read {rel}: {exc}") from exc

    def load_counts(self, rel: str):
        try:
            return CountRecord.from_dict(self.load_json(rel))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{rel}: {exc}") from exc


def _params_table(names, mean, std) -> dict:
    return {n: {"mean": float(m), "std": float(s)} for n, m, s in zip(names, mean, std)}


def _estimation_config(cfg, seed: int) -> EstimationConfig:
    return EstimationConfig(n_samples=cfg.n_samples, seed=seed, prior=dict(cfg.prior) or None,
                            histogram_bins=cfg.histogram_bins, workers=cfg.workers)


def _posterior_outputs(r: _Run, post) -> dict:
    io.write_json(r.emit("posterior", "json"), post.to_dict())
    for name in post.names:
        centers, masses = post.marginal(name)
        io.write_csv(r.emit(f"marginal-{name}", "csv"), ["bin_center", "mass"], zip(centers, masses))
    return _params_table(post.names, post.mean, post.std)


def _derived_table(post) -> dict:
    return {k: {"mean": m, "std": s} for k, (m, s) in post.derived.items()}


def _run_simulate(r: _Run) -> dict:
    cfg = r.cfg
    gates = {"four": FOUR_GATES, "six": SIX_GATES, "eight": eight_gates(cfg.n_rep)}[cfg.gate_set]
    counts = run_experiment(cfg.truth.params(), ExperimentPlan(gates, cfg.shots, cfg.seed))
    io.write_json(r.emit("counts", "json"), counts.to_dict())
    io.write_csv(r.emit("counts", "csv"), ["sequence", "shots", "successes", "frequency"],
                 [(s.label, int(n), int(k), float(k / n)) for s, n, k in zip(counts.sequences, counts.shots,
                                                                             counts.successes)])
    return {"parameters": {}, "sequences": len(counts)}


def _run_estimate(r: _Run) -> dict:
    cfg = r.cfg
    counts = r.load_counts(cfg.counts)
    model = SPAM_MODEL if cfg.mode == "estimate-spam" else FULL_MODEL
    post = estimate(counts, model, _estimation_config(cfg, cfg.seed))
    return {"parameters": _posterior_outputs(r, post), "derived": _derived_table(post), "ess": float(post.ess)}


def _run_povm(r: _Run) -> dict:
    counts = r.load_counts(r.cfg.counts)
    try:
        f = FourProbEstimates.from_counts(counts)
    except KeyError as exc:
        raise InputError(str(exc)) from exc
    est = estimate_povm_mle(f)
    doc = est.to_dict()
    io.write_json(r.emit("povm", "json"), doc)
    return {"parameters": doc["parameters"], "constraints_pass": doc["constraints_pass"]}


def _readout_from_estimate(doc: dict, rel: str) -> tuple:
    try:
        params = doc["parameters"]
        return float(params["pi0"]["mean"]), float(params["piz"]["mean"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"{rel}: no pi0/piz estimates") from exc


def _run_mitigate(r: _Run) -> dict:
    cfg = r.cfg
    if cfg.readout is not None:
        pairs = [(q.pi0, q.piz) for q in cfg.readout]
    else:
        pairs = [_readout_from_estimate(r.load_json(p), p) for p in cfg.estimates]
    try:
        eps = [readout_eps(pi0, piz) for pi0, piz in pairs]
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    n = len(eps)

    src = cfg.counts
    if isinstance(src, GhzSource):
        if src.n_qubits != n:
            raise InputError(f"GHZ source has {src.n_qubits} qubits but readout describes {n}")
        probs = ghz_readout_distribution(n, src.phase, eps)
        observed = probs if src.shots is None else make_generator(cfg.seed, 0).multinomial(src.shots, probs)
    else:
        mapping = r.load_json(src) if isinstance(src, str) else src
        if not isinstance(mapping, dict):
            raise InputError("counts must be a {bitstring: count} mapping")
        observed = counts_from_mapping(mapping)
        if len(observed) != 2 ** n:
            raise InputError(f"counts describe {int(math.log2(len(observed)))} qubits, readout describes {n}")

    m = assemble_mitigation_matrix(eps)
    res = mitigate_counts(observed, m)
    observed = np.asarray(observed, dtype=float)
    raw = observed / observed.sum()
    labels = bitstrings(n)
    doc = {
        "schema": "spamcal.mitigation/1",
        "eps": [list(e) for e in eps],
        "condition_number": res.condition_number,
        "residual_norm": res.residual_norm,
        "iterations": res.iterations,
        "parity_raw": expectation_parity(raw),
        "parity_mitigated": expectation_parity(res.probabilities),
        "mitigated": dict(zip(labels, res.probabilities)),
    }
    if cfg.state is not None:
        rot = prerotation_from_state(cfg.state.x0, cfg.state.y0, cfg.state.z0, cfg.x_threshold)
        doc["prerotation"] = {"phi0": rot.phi0, "theta0": rot.theta0, "apply_x_correction": rot.apply_x_correction}
    if cfg.gate is not None:
        doc["amplitude"] = amplitude_correction(cfg.gate.amplitude, cfg.gate.theta, cfg.gate.eta)
    io.write_json(r.emit("mitigated", "json"), doc)
    io.write_csv(r.emit("mitigated", "csv"), ["bitstring", "observed", "mitigated"],
                 zip(labels, raw, res.probabilities))
    return {"parameters": {}, "parity_raw": doc["parity_raw"], "parity_mitigated": doc["parity_mitigated"]}


def _sweep_doc(sweep) -> dict:
    s = sweep.sweep
    return {
        "schema": "spamcal.pingpong/1",
        "curves": [
            {"A": c.amplitude, "a": f.a, "b": f.b, "theta": f.theta, "stderr": list(f.stderr), "rss": f.rss,
             "converged": f.converged, "j": c.j, "z": c.z, "residuals": f.residuals}
            for c, f in zip(sweep.curves, sweep.fits)
        ],
        "sweep": {"alpha": s.alpha, "beta": s.beta, "gamma": s.gamma, "delta": s.delta,
                  "theta_at_1": s.theta_at_1, "theta_at_1_stderr": s.theta_at_1_stderr, "rss": s.rss},
        "n_sequences": sweep.n_sequences,
        "total_shots": sweep.total_shots,
    }


def _pingpong_outputs(r: _Run, sweep) -> dict:
    io.write_json(r.emit("pingpong", "json"), _sweep_doc(sweep))
    io.write_csv(r.emit("curves", "csv"), ["j", "z", "n", "A"], io.curves_rows(sweep.curves))
    io.write_csv(r.emit("sweep", "csv"), ["A", "theta", "stderr"],
                 [(c.amplitude, f.theta, f.theta_stderr) for c, f in zip(sweep.curves, sweep.fits)])
    return {"theta": {"mean": sweep.sweep.theta_at_1, "std": sweep.sweep.theta_at_1_stderr}}


def _run_pingpong(r: _Run) -> dict:
    cfg = r.cfg
    if cfg.curves is not None:
        try:
            curves = io.read_curves_csv(r.path(cfg.curves))
        except (OSError, ValueError, KeyError) as exc:
            raise InputError(f"{cfg.curves}: {exc}") from exc
        sweep = amplitude_sweep(curves)
    else:
        sweep = simulate_amplitude_sweep(cfg.truth.params(), cfg.amplitudes, cfg.j, cfg.shots, cfg.seed,
                                         cfg.coupling)
    return {"parameters": _pingpong_outputs(r, sweep), "n_sequences": sweep.n_sequences}


def _run_closed_loop(r: _Run) -> dict:
    cfg = r.cfg
    truth = cfg.truth.params()
    model = SPAM_MODEL if cfg.model == "spam" else FULL_MODEL
    gates = SIX_GATES if cfg.model == "spam" else eight_gates(cfg.n_rep)
    counts = run_experiment(truth, ExperimentPlan(gates, cfg.shots, derive_seed(cfg.seed, 0)))
    io.write_json(r.emit("counts", "json"), counts.to_dict())
    post = estimate(counts, model, _estimation_config(cfg, derive_seed(cfg.seed, 1)))
    table = _posterior_outputs(r, post)
    true_values = dict(zip(FULL_MODEL.names, truth.as_array()))
    covered = {n: bool(abs(m - true_values[n]) <= 3 * s) for n, m, s in zip(post.names, post.mean, post.std)}
    out = {"parameters": table, "derived": _derived_table(post),
           "truth": {n: true_values[n] for n in post.names}, "within_3sigma": covered,
           "bayes_sequences": len(gates)}
    if cfg.pingpong:
        sweep = simulate_amplitude_sweep(truth, cfg.amplitudes, cfg.j, cfg.shots, derive_seed(cfg.seed, 2))
        pp = _pingpong_outputs(r, sweep)["theta"]
        out["pingpong"] = {"theta": pp, "n_sequences": sweep.n_sequences,
                           "sequence_ratio": sweep.n_sequences / len(gates)}
        tb, sb = post["theta"]
        out["pingpong"]["agrees_with_bayes"] = bool(abs(tb - pp["mean"]) <= 3 * math.hypot(sb, pp["std"]))
    return out


_RUNNERS = {
    "simulate": _run_simulate,
    "estimate-spam": _run_estimate,
    "estimate-full": _run_estimate,
    "estimate-povm-mle": _run_povm,
    "mitigate": _run_mitigate,
    "pingpong": _run_pingpong,
    "closed-loop": _run_closed_loop,
}


def run(cfg, base_dir: Path = Path("."), out_dir: Optional[Path] = None) -> dict:
    """Execute a validated config; returns the summary document (also written to disk)."""
    out = Path(out_dir) if out_dir is not None else Path(base_dir) / cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    r = _Run(cfg, Path(base_dir), out)
    result = _RUNNERS[cfg.mode](r)
    summary_path = r.emit("summary", "json")
    summary = {"schema": "spamcal.summary/1", "run_name": cfg.run_name, "mode": cfg.mode, **result,
               "artifacts": list(r.artifacts)}
    io.write_json(summary_path, summary)
    return summary


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "invalid config:\n" + "\n".join(lines)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="spamcal", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, type=Path, help="run configuration (JSON)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--samples", type=int, help="override n_samples")
    ap.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
    args = ap.parse_args(argv)

    try:
        raw = io.read_json(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not isinstance(raw, dict):
        print("config must be a JSON object", file=sys.stderr)
        return EXIT_INVALID
    # overrides go through validation too, so they are rejected in modes without the field
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.samples is not None:
        raw["n_samples"] = args.samples
    try:
        cfg = parse_config(raw)
    except ValidationError as exc:
        print(_format_errors(exc), file=sys.stderr)
        return EXIT_INVALID

    try:
        summary = run(cfg, args.config.resolve().parent, args.out)
    except InputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (EstimationError, PriorError, MitigationError, RuntimeError, ValueError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_FAILED

    for name, v in {**summary["parameters"], **summary.get("derived", {})}.items():
        print(f"{name:>8} = {v['mean']:.6g} ± {v['std']:.2g}")
    if "parity_mitigated" in summary:
        print(f"  parity = {summary['parity_raw']:.6g} raw, {summary['parity_mitigated']:.6g} mitigated")
    if "pingpong" in summary:
        pp = summary["pingpong"]
        print(f"pingpong theta = {pp['theta']['mean']:.6g} ± {pp['theta']['std']:.2g} "
              f"({pp['n_sequences']} sequences, {pp['sequence_ratio']:g}x the Bayesian plan)")
    print(f"wrote {len(summary['artifacts'])} files")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
