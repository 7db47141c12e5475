"""Closed-form correlation probabilities, SKR and CHSH expressions for a
dephased Bell source (|HH> + e^{-i theta}|VV>)/sqrt(2).

Every function here is pure and accepts scalars or numpy arrays for the
angles. ``theta`` may be a :class:`Phase` or a bare float/array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2

#: Reduced Planck constant in micro-eV * ps.
HBAR_UEV_PS = 658.2119569

#: Fixed outer analyzer directions of the four-direction scheme.
PHI0 = 0.0
PHI3 = 3.0 * math.pi / 8.0

# tolerance used to decide whether two analyzers coincide modulo pi
_DEGENERATE_ATOL = 1e-12


@dataclass(frozen=True)
class Phase:
    """Relative phase of the |VV> term, stored in [0, 2pi)."""

    theta_fss: float

    def __post_init__(self):
        value = math.fmod(float(self.theta_fss), TWO_PI)
        if value < 0.0:
            value += TWO_PI
        # fmod of a value just below a multiple of 2pi can round up to 2pi
        if value >= TWO_PI:
            value = 0.0
        object.__setattr__(self, "theta_fss", value)

    def __float__(self):
        return self.theta_fss


@dataclass(frozen=True)
class PhysicalParams:
    """Fine structure splitting (micro-eV) and exciton lifetime (ps)."""

    fss_energy: float
    exciton_lifetime: float

    def __post_init__(self):
        if not (self.fss_energy >= 0.0):
            raise ValueError(f"fss_energy must be >= 0, got {self.fss_energy!r}")
        if not (self.exciton_lifetime >= 0.0):
            raise ValueError(
                f"exciton_lifetime must be >= 0, got {self.exciton_lifetime!r}"
            )


def _canonical_half_turn(x: float) -> float:
    # analyzer physics is pi-periodic; keep [0, pi] as given, fold the rest
    x = float(x)
    if 0.0 <= x <= math.pi:
        return x
    folded = math.fmod(x, math.pi)
    if folded < 0.0:
        folded += math.pi
    return 0.0 if folded >= math.pi else folded


@dataclass(frozen=True)
class ProtocolAngles:
    """Analyzer directions phi0=0, phi1=alpha, phi2=alpha+beta, phi3=3pi/8.

    ``alpha`` and ``beta`` are folded into [0, pi]. ``degenerate`` is true
    when the two coincident analyzers are parallel (beta = 0 mod pi).
    """

    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _canonical_half_turn(self.alpha))
        object.__setattr__(self, "beta", _canonical_half_turn(self.beta))

    @property
    def phi0(self) -> float:
        return PHI0

    @property
    def phi1(self) -> float:
        return self.alpha

    @property
    def phi2(self) -> float:
        return self.alpha + self.beta

    @property
    def phi3(self) -> float:
        return PHI3

    @property
    def directions(self) -> tuple[float, float, float, float]:
        return (self.phi0, self.phi1, self.phi2, self.phi3)

    @property
    def degenerate(self) -> bool:
        return (
            abs(self.beta) <= _DEGENERATE_ATOL
            or abs(self.beta - math.pi) <= _DEGENERATE_ATOL
        )

    @classmethod
    def ekert(cls) -> "ProtocolAngles":
        """The original photonic choice phi_l = l*pi/8."""
        return cls(math.pi / 8.0, math.pi / 8.0)


def _theta(theta):
    if isinstance(theta, Phase):
        return theta.theta_fss
    return theta


def theta_from_physical(params: PhysicalParams) -> Phase:
    """Phase S*tau/hbar accumulated between the two recombinations."""
    return Phase(params.fss_energy * params.exciton_lifetime / HBAR_UEV_PS)


def prob_joint_same(phi, theta):
    """P++ + P-- when both analyzers sit at ``phi``."""
    c = np.cos(phi)
    s = np.sin(phi)
    return c**4 + s**4 + 2.0 * s**2 * c**2 * np.cos(_theta(theta))


def prob_plus_plus(phi_a, phi_b, theta):
    ca, sa = np.cos(phi_a), np.sin(phi_a)
    cb, sb = np.cos(phi_b), np.sin(phi_b)
    return 0.5 * (
        ca**2 * cb**2 + sa**2 * sb**2 + 2.0 * sa * ca * sb * cb * np.cos(_theta(theta))
    )


def prob_plus_minus(phi_a, phi_b, theta):
    ca, sa = np.cos(phi_a), np.sin(phi_a)
    cb, sb = np.cos(phi_b), np.sin(phi_b)
    return 0.5 * (
        ca**2 * sb**2 + sa**2 * cb**2 - 2.0 * sa * ca * sb * cb * np.cos(_theta(theta))
    )


def corr_coefficient(phi_a, phi_b, theta):
    """Expectation of the product of the +/-1 outcomes, E(phi_a, phi_b)."""
    return np.cos(2 * phi_a) * np.cos(2 * phi_b) + np.sin(2 * phi_a) * np.sin(
        2 * phi_b
    ) * np.cos(_theta(theta))


def p_corr(angles: ProtocolAngles, theta):
    """Probability that a coincident-basis event yields equal key bits.

    Both coincident directions are equally likely, so this is the mean of
    :func:`prob_joint_same` at alpha and alpha+beta.
    """
    return 0.5 * (
        prob_joint_same(angles.phi1, theta) + prob_joint_same(angles.phi2, theta)
    )


def p_corr_ekert(theta):
    return (5.0 + 3.0 * np.cos(_theta(theta))) / 8.0


def chsh_cr(angles: ProtocolAngles, theta):
    """CHSH combination E01 + E23 - E03 + E21 in closed form."""
    a2 = 2.0 * angles.alpha
    ab2 = 2.0 * (angles.alpha + angles.beta)
    return (
        np.cos(_theta(theta)) * np.sin(ab2) * (INV_SQRT2 + np.sin(a2))
        + np.cos(ab2) * (np.cos(a2) - INV_SQRT2)
        + np.cos(a2)
        + INV_SQRT2
    )


def chsh_cr_from_coefficients(angles: ProtocolAngles, theta):
    """Same quantity assembled from the four correlation coefficients."""
    p0, p1, p2, p3 = angles.directions
    return (
        corr_coefficient(p0, p1, theta)
        + corr_coefficient(p2, p3, theta)
        - corr_coefficient(p0, p3, theta)
        + corr_coefficient(p2, p1, theta)
    )


def chsh_cr_ekert(theta):
    return SQRT2 * np.abs(np.cos(_theta(theta)) + 1.0)
