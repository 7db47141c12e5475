"""E91 key distribution with a fine-structure-dephased entangled photon source."""

from .analytic import (
    HBAR_UEV_PS,
    Phase,
    PhysicalParams,
    ProtocolAngles,
    chsh_cr,
    chsh_cr_ekert,
    corr_coefficient,
    p_corr,
    p_corr_ekert,
    prob_joint_same,
    prob_plus_minus,
    prob_plus_plus,
    theta_from_physical,
)
from .analysis import SweepRecord, SweepResult, binomial_interval, r_squared, run_sweep
from .protocol import (
    EventLog,
    MeasurementEvent,
    RunStats,
    SiftedResult,
    compute_qber,
    compute_skr,
    estimate_chsh,
    run_protocol,
    security_identity_check,
    sift,
)
from .statevector import (
    AnalyzerSetting,
    DephasedBellState,
    JointOutcome,
    build_dephased_bell,
    joint_probabilities,
    sample_outcome,
)

__version__ = "0.1.0"
