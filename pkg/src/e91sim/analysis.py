"""Monte-Carlo versus closed-form comparison over parameter grids."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analytic import Phase, ProtocolAngles, chsh_cr, p_corr
from .protocol import ProtocolError, run_protocol

SHANNON_QBER_LIMIT = 0.11


class AnalysisError(ValueError):
    pass


def r_squared(observed: Sequence[float], predicted: Sequence[float]) -> float:
    """Coefficient of determination of ``observed`` against ``predicted``."""
    obs = np.asarray(observed, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    if obs.shape != pred.shape:
        raise AnalysisError(f"length mismatch: {obs.shape} vs {pred.shape}")
    if obs.ndim != 1 or len(obs) < 2:
        raise AnalysisError("need at least two paired values")
    ss_tot = float(np.sum((obs - obs.mean()) ** 2))
    if ss_tot == 0.0:
        raise AnalysisError("observed values have zero variance; R^2 undefined")
    ss_res = float(np.sum((obs - pred) ** 2))
    return 1.0 - ss_res / ss_tot


def binomial_interval(successes: int, trials: int, z: float) -> tuple[float, float]:
    """Normal-approximation interval for a binomial proportion, clamped to [0, 1]."""
    if trials < 1 or not 0 <= successes <= trials:
        raise AnalysisError(f"invalid counts: {successes} of {trials}")
    if not z > 0:
        raise AnalysisError(f"z must be positive, got {z}")
    p = successes / trials
    half = z * math.sqrt(p * (1.0 - p) / trials)
    return max(0.0, p - half), min(1.0, p + half)


@dataclass
class SweepRecord:
    alpha: float
    beta: float
    theta: float
    skr_simulated: float
    skr_analytic: float
    cr_estimate: Optional[float]
    cr_analytic: float
    n_events: int
    n_coincident: int
    seed: int

    @property
    def qber_simulated(self) -> float:
        return 1.0 - self.skr_simulated


@dataclass
class SweepResult:
    grid: list[SweepRecord]
    r_squared_skr: Optional[float]
    r_squared_cr: Optional[float]
    shannon_flags: list[bool] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "records": [asdict(r) for r in self.grid],
            "r_squared_skr": self.r_squared_skr,
            "r_squared_cr": self.r_squared_cr,
            "shannon_flags": list(self.shannon_flags),
        }


def point_seed(master_seed: int, i: int, j: int, k: int) -> int:
    """Seed for grid point (i, j, k); independent of iteration order."""
    ss = np.random.SeedSequence([master_seed, i, j, k])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def _run_point(args) -> SweepRecord:
    alpha, beta, theta, n_events, seed, allow_degenerate, index = args
    angles = ProtocolAngles(alpha, beta)
    phase = Phase(theta)
    try:
        _, stats = run_protocol(angles, phase, n_events, seed, allow_degenerate)
    except ProtocolError as exc:
        exc.args = (
            f"grid point {index} (alpha={alpha!r}, beta={beta!r}, theta={theta!r}): {exc}",
        )
        raise
    return SweepRecord(
        alpha=alpha,
        beta=beta,
        theta=theta,
        skr_simulated=stats.skr,
        skr_analytic=float(p_corr(angles, phase)),
        cr_estimate=stats.cr_estimate,
        cr_analytic=float(chsh_cr(angles, phase)),
        n_events=stats.n_events,
        n_coincident=stats.n_coincident,
        seed=seed,
    )


def _safe_r2(observed, predicted) -> Optional[float]:
    try:
        return r_squared(observed, predicted)
    except AnalysisError:
        return None


def shannon_flags(records: Sequence[SweepRecord], limit: float = SHANNON_QBER_LIMIT):
    """True where the simulated QBER is below the Shannon limit."""
    return [r.qber_simulated < limit for r in records]


def run_sweep(
    alpha_values: Sequence[float],
    beta_values: Sequence[float],
    theta_values: Sequence[float],
    n_events: int,
    master_seed: int,
    allow_degenerate: bool = False,
    workers: int = 1,
) -> SweepResult:
    """Run the protocol on the alpha x beta x theta grid (row-major order).

    The CHSH R^2 compares |cr_estimate| with |cr_analytic| over the points
    where an estimate exists.
    """
    alpha_values, beta_values, theta_values = (
        [float(v) for v in seq] for seq in (alpha_values, beta_values, theta_values)
    )
    if not (alpha_values and beta_values and theta_values):
        raise AnalysisError("sweep grid is empty")
    if n_events < 1:
        raise AnalysisError(f"n_events must be >= 1, got {n_events}")
    tasks = [
        (a, b, t, n_events, point_seed(master_seed, i, j, k), allow_degenerate, (i, j, k))
        for i, a in enumerate(alpha_values)
        for j, b in enumerate(beta_values)
        for k, t in enumerate(theta_values)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            grid = list(pool.map(_run_point, tasks, chunksize=16))
    else:
        grid = [_run_point(t) for t in tasks]

    r2_skr = _safe_r2([r.skr_simulated for r in grid], [r.skr_analytic for r in grid])
    with_cr = [r for r in grid if r.cr_estimate is not None]
    r2_cr = _safe_r2(
        [abs(r.cr_estimate) for r in with_cr], [abs(r.cr_analytic) for r in with_cr]
    )
    return SweepResult(grid, r2_skr, r2_cr, shannon_flags(grid))
