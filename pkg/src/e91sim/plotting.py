"""Matplotlib figures for sweep results, written straight to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import SweepResult  # noqa: E402
from .analytic import ProtocolAngles, chsh_cr  # noqa: E402

# fixed hash salt and no date stamp keep SVG output reproducible
_SAVE_RC = {"svg.hashsalt": "e91sim", "font.size": 9}


def _save(fig, path: Path):
    with matplotlib.rc_context(_SAVE_RC):
        fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def plot_chsh(result: SweepResult, path) -> Path:
    """|CR| against theta: simulated points over the closed-form curve."""
    path = Path(path)
    recs = [r for r in result.grid if r.cr_estimate is not None]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    pairs = sorted({(r.alpha, r.beta) for r in recs})
    dense = np.linspace(0.0, 2 * np.pi, 400)
    for alpha, beta in pairs:
        angles = ProtocolAngles(alpha, beta)
        ax.plot(dense, np.abs(chsh_cr(angles, dense)), lw=1.2,
                label=f"analytic a={alpha:.3f} b={beta:.3f}")
        pts = [r for r in recs if (r.alpha, r.beta) == (alpha, beta)]
        ax.plot([r.theta for r in pts], [abs(r.cr_estimate) for r in pts], "o", ms=3,
                label="simulated")
    ax.axhline(2.0, color="0.6", ls=":", lw=0.8)
    ax.set_xlabel(r"$\theta_{FSS}$ (rad)")
    ax.set_ylabel(r"$|\langle CR \rangle|$")
    if result.r_squared_cr is not None:
        ax.set_title(f"$R^2$ = {result.r_squared_cr:.4f}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)
    return path


def plot_skr(result: SweepResult, path) -> Path:
    """Simulated SKR over (beta, theta), one panel per alpha."""
    path = Path(path)
    alphas = sorted({r.alpha for r in result.grid})
    fig, axes = plt.subplots(1, len(alphas), figsize=(4 * len(alphas), 3.5), squeeze=False)
    for ax, alpha in zip(axes[0], alphas):
        recs = [r for r in result.grid if r.alpha == alpha]
        betas = sorted({r.beta for r in recs})
        thetas = sorted({r.theta for r in recs})
        grid = np.full((len(betas), len(thetas)), np.nan)
        for r in recs:
            grid[betas.index(r.beta), thetas.index(r.theta)] = r.skr_simulated
        if len(betas) > 1 and len(thetas) > 1:
            mesh = ax.pcolormesh(thetas, betas, grid, shading="nearest", vmin=0, vmax=1,
                                 cmap="viridis")
            fig.colorbar(mesh, ax=ax, label="SKR")
        else:
            x = thetas if len(thetas) > 1 else betas
            ax.plot(x, grid.ravel(), "o", ms=3)
            ax.set_ylim(-0.05, 1.05)
        ax.set_title(f"alpha = {alpha:.4f}")
        ax.set_xlabel(r"$\theta_{FSS}$ (rad)")
        ax.set_ylabel(r"$\beta$ (rad)")
    if result.r_squared_skr is not None:
        fig.suptitle(f"$R^2$ = {result.r_squared_skr:.4f}")
    fig.tight_layout()
    _save(fig, path)
    return path


