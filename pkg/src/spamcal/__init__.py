"""Bayesian estimation and mitigation of single-qubit SPAM and gate errors."""

from .bayes import (
    FULL_MODEL, SPAM_MODEL, EstimationConfig, EstimationError, PosteriorSummary, PriorBox, PriorError,
    estimate, estimate_full, estimate_spam, posterior_weights,
)
from .mitigation import (
    MitigationMatrix, PreRotation, amplitude_correction, assemble_mitigation_matrix, mitigate_counts,
    prerotation_from_state,
)
from .model import (
    FOUR_GATES, SIX_GATES, BlochVector, FullParams, GateOp, PovmParams, SpamParams, eight_gates,
    sequence_probabilities,
)
from .pingpong import (
    AmplitudeSweepFit, PingPongCurve, PingPongFit, fit_pingpong, fit_theta_vs_amplitude, generate_pingpong_plan,
)
from .povm_mle import FourProbEstimates, check_povm_constraints, estimate_povm_mle
from .simulator import CountRecord, ExperimentPlan, ghz_readout_distribution, run_experiment

__version__ = "0.1.0"
