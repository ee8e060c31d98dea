"""Synthetic device: binomial shot counts for calibration sequences.

Randomness comes from numpy's counter-based Philox generator keyed by a
``SeedSequence`` whose spawn key encodes the sequence index, so each
sequence has an independent stream regardless of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import FullParams, GateOp, full_sequence_probability


def make_generator(seed: int, *key: int) -> np.random.Generator:
    """Philox stream for ``seed`` split along the integer path ``key``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def derive_seed(seed: int, *key: int) -> int:
    """Independent 64-bit child seed of ``seed`` along ``key``."""
    state = np.random.SeedSequence(int(seed), spawn_key=tuple(key)).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class ExperimentPlan:
    sequences: tuple
    shots: int = 16384
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if not self.sequences:
            raise ValueError("a plan needs at least one sequence")
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class CountRecord:
    """Per-sequence shot totals and outcome-0 counts."""

    sequences: tuple
    shots: np.ndarray
    successes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sequences = tuple(self.sequences)
        self.shots = np.asarray(self.shots, dtype=np.int64).reshape(-1)
        self.successes = np.asarray(self.successes, dtype=np.int64).reshape(-1)
        if not (len(self.sequences) == len(self.shots) == len(self.successes)):
            raise ValueError("sequences, shots and successes must have equal length")
        if np.any(self.shots < 1) or np.any(self.successes < 0) or np.any(self.successes > self.shots):
            raise ValueError("counts must satisfy 0 <= s <= n with n >= 1")

    def __len__(self):
        return len(self.sequences)

    @property
    def frequencies(self) -> np.ndarray:
        return self.successes / self.shots

    def select(self, sequences: Sequence[GateOp]) -> "CountRecord":
        """Sub-record restricted to ``sequences`` (in the given order)."""
        index = {s: k for k, s in enumerate(self.sequences)}
        missing = [s.label for s in sequences if s not in index]
        if missing:
            raise KeyError(f"sequences not in record: {missing}")
        ks = [index[s] for s in sequences]
        return CountRecord(tuple(sequences), self.shots[ks], self.successes[ks], dict(self.meta))

    def drop(self, sequence: GateOp) -> "CountRecord":
        return self.select([s for s in self.sequences if s != sequence])

    def to_dict(self) -> dict:
        return {
            "schema": "spamcal.counts/1",
            "sequences": [s.label for s in self.sequences],
            "shots": [int(n) for n in self.shots],
            "successes": [int(s) for s in self.successes],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CountRecord":
        if d.get("schema") != "spamcal.counts/1":
            raise ValueError(f"unsupported counts schema {d.get('schema')!r}")
        unknown = set(d) - {"schema", "sequences", "shots", "successes", "meta"}
        if unknown:
            raise ValueError(f"unknown fields in counts record: {sorted(unknown)}")
        return cls(tuple(GateOp.parse(s) for s in d["sequences"]), d["shots"], d["successes"],
                   dict(d.get("meta", {})))


def sample_counts(p: float, n: int, seed: int, *key: int) -> int:
    """One binomial draw s ~ B(n, p)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    if n < 1:
        raise ValueError("n must be at least 1")
    return int(make_generator(seed, *key).binomial(n, p))


def run_experiment(truth: FullParams, plan: ExperimentPlan) -> CountRecord:
    shots, successes = [], []
    for k, seq in enumerate(plan.sequences):
        p = full_sequence_probability(truth, seq)
        if not -1e-12 <= p <= 1.0 + 1e-12:
            raise RuntimeError(f"model probability {p} for {seq.label} is outside [0, 1]")
        shots.append(plan.shots)
        successes.append(sample_counts(min(max(p, 0.0), 1.0), plan.shots, plan.seed, k))
    return CountRecord(plan.sequences, shots, successes, {"seed": plan.seed})


def _check_eps(eps_pairs, n_qubits: int) -> np.ndarray:
    eps = np.asarray(eps_pairs, dtype=float).reshape(-1, 2)
    if eps.shape[0] != n_qubits:
        raise ValueError(f"need {n_qubits} (eps0, eps1) pairs, got {eps.shape[0]}")
    if np.any(eps < 0) or np.any(eps > 1):
        raise ValueError("readout error probabilities must lie in [0, 1]")
    return eps


def parity_signs(n_qubits: int) -> np.ndarray:
    """(-1)^(popcount(s)) for every bitstring index s."""
    idx = np.arange(2 ** n_qubits)
    pop = np.zeros_like(idx)
    for b in range(n_qubits):
        pop += (idx >> b) & 1
    return 1.0 - 2.0 * (pop & 1)


def apply_readout_noise(probs: np.ndarray, eps_pairs) -> np.ndarray:
    """Push a distribution through independent per-qubit bit-flip channels.

    Qubit 0 is the most significant bit of the bitstring index.
    """
    n_qubits = int(round(np.log2(len(probs))))
    eps = _check_eps(eps_pairs, n_qubits)
    return apply_qubit_maps(probs, [np.array([[1.0 - e0, e1], [e0, 1.0 - e1]]) for e0, e1 in eps])


def apply_qubit_maps(vec: np.ndarray, maps) -> np.ndarray:
    """Apply the Kronecker product of 2x2 ``maps`` (qubit 0 first) to ``vec``."""
    n_qubits = len(maps)
    t = np.asarray(vec, dtype=float).reshape((2,) * n_qubits)
    for q, m in enumerate(maps):
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def ghz_readout_distribution(n_qubits: int, phase: float = np.pi / 4, eps_pairs=None) -> np.ndarray:
    """X-basis outcome distribution of (|0..0> + e^{i phase}|1..1>)/sqrt(2).

    Ideal probabilities are [1 + cos(phase) (-1)^|s|] / 2^N; readout noise is
    then applied qubit by qubit.
    """
    if not 1 <= n_qubits <= 12:
        raise ValueError("n_qubits must lie in 1..12")
    probs = (1.0 + np.cos(phase) * parity_signs(n_qubits)) / 2 ** n_qubits
    if eps_pairs is None:
        return probs
    return apply_readout_noise(probs, eps_pairs)
