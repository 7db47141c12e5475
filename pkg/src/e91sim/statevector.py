"""Dense two-qubit statevector for the dephased Bell source.

Amplitudes are ordered |00>, |01>, |10>, |11> with qubit 0 (Alice) as the
most significant bit. Measurement along an analyzer angle ``phi`` projects
on |+_phi> = cos(phi)|0> + sin(phi)|1> and |-_phi> = -sin(phi)|0> + cos(phi)|1>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import Phase

NORM_ATOL = 1e-9

H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)
I2 = np.eye(2, dtype=complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


class NormalizationError(ValueError):
    """State norm drifted away from 1."""


def phase_gate(angle: float) -> np.ndarray:
    """diag(1, e^{i angle}); an Rz rotation with the global phase removed."""
    return np.array([[1.0, 0.0], [0.0, np.exp(1j * angle)]], dtype=complex)


def ry(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def apply_single(state: np.ndarray, gate: np.ndarray, qubit: int) -> np.ndarray:
    op = np.kron(gate, I2) if qubit == 0 else np.kron(I2, gate)
    return op @ state


def apply_two(state: np.ndarray, gate: np.ndarray) -> np.ndarray:
    return gate @ state


@dataclass(frozen=True)
class DephasedBellState:
    amplitudes: np.ndarray
    theta_fss: float

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class AnalyzerSetting:
    """Analyzer angle folded into [0, pi)."""

    angle: float

    def __post_init__(self):
        a = math.fmod(float(self.angle), math.pi)
        if a < 0.0:
            a += math.pi
        if a >= math.pi:
            a = 0.0
        object.__setattr__(self, "angle", a)

    def basis(self) -> np.ndarray:
        """Rows are the components of |+_phi> and |-_phi>."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, s], [-s, c]])


@dataclass(frozen=True)
class JointOutcome:
    alice_bit: int
    bob_bit: int

    @property
    def alice_value(self) -> int:
        return 2 * self.alice_bit - 1

    @property
    def bob_value(self) -> int:
        return 2 * self.bob_bit - 1

    @classmethod
    def from_index(cls, k: int) -> "JointOutcome":
        # order (++, +-, -+, --); "+" is bit 0
        return cls(k >> 1, k & 1)


def build_dephased_bell(theta) -> DephasedBellState:
    """Prepare (|00> + e^{-i theta}|11>)/sqrt(2) from |00>.

    Hadamard on qubit 0, CNOT 0->1, then a phase rotation by -theta on
    qubit 1.
    """
    if not isinstance(theta, Phase):
        theta = Phase(theta)
    state = np.zeros(4, dtype=complex)
    state[0] = 1.0
    state = apply_single(state, H, 0)
    state = apply_two(state, CNOT)
    state = apply_single(state, phase_gate(-theta.theta_fss), 1)
    return DephasedBellState(state, theta.theta_fss)


def _as_setting(x) -> AnalyzerSetting:
    return x if isinstance(x, AnalyzerSetting) else AnalyzerSetting(x)


def joint_probabilities(
    state: DephasedBellState, a, b
) -> tuple[float, float, float, float]:
    """(P++, P+-, P-+, P--) for analyzers ``a`` (Alice) and ``b`` (Bob)."""
    norm = state.norm
    if abs(norm - 1.0) > NORM_ATOL:
        raise NormalizationError(f"state norm {norm!r} differs from 1")
    ba = _as_setting(a).basis()
    bb = _as_setting(b).basis()
    psi = state.amplitudes
    # explicit products and sums keep exact cancellations exact (no BLAS/FMA)
    probs = []
    for i in range(2):
        for j in range(2):
            amp = (
                ba[i, 0] * bb[j, 0] * psi[0]
                + ba[i, 0] * bb[j, 1] * psi[1]
                + ba[i, 1] * bb[j, 0] * psi[2]
                + ba[i, 1] * bb[j, 1] * psi[3]
            )
            probs.append(amp.real * amp.real + amp.imag * amp.imag)
    return tuple(probs)


def cumulative_thresholds(probs) -> np.ndarray:
    """Thresholds for picking an outcome from a single uniform variate."""
    cum = np.cumsum(np.asarray(probs, dtype=float))
    cum[-1] = 1.0
    return cum


def pick_outcome(u, thresholds: np.ndarray):
    """Index of the first threshold strictly above ``u`` (scalar or array)."""
    return np.minimum(np.searchsorted(thresholds, u, side="right"), 3)


def sample_outcome(
    state: DephasedBellState, a, b, rng: np.random.Generator
) -> JointOutcome:
    probs = joint_probabilities(state, a, b)
    k = int(pick_outcome(rng.random(), cumulative_thresholds(probs)))
    return JointOutcome.from_index(k)
