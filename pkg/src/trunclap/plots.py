"""Report figures: radial profiles, ball covers, bound tables, eigenfunctions.

Every function takes an output path and writes a PNG through the Agg
backend, so the figures render identically on headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_radial_profile",
    "plot_cover",
    "plot_bound_table",
    "plot_eigenfunction_slice",
]

_DPI = 150


def plot_radial_profile(profile, path) -> None:
    """psi, psi', psi'' and the source xi against the radius."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    t = profile.grid
    ax1.plot(t, profile.psi, label=r"$\psi$", color="tab:blue")
    ax1.plot(t, profile.dpsi, label=r"$\psi'$", color="tab:orange")
    ax1.plot(t, profile.ddpsi, label=r"$\psi''$", color="tab:green")
    ax1.legend(loc="best")
    ax1.set_ylabel("profile")
    ax2.plot(t, profile.xi_values, color="tab:red")
    ax2.set_ylabel(r"source $\xi$")
    ax2.set_xlabel("radius t")
    p = profile.params
    ax1.set_title(f"radial profile  k={p.k}  hR={p.h * p.R:g}  a={p.a:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_cover(cover, sample_points, path) -> None:
    """Cover balls and the sampled set, projected to the first two axes."""
    fig, ax = plt.subplots(figsize=(6, 6))
    pts = np.asarray(sample_points)
    ax.plot(pts[:, 0], pts[:, 1], ".", ms=1, color="0.4", label="sample")
    for c, r in zip(cover.centers, cover.radii):
        ax.add_patch(plt.Circle((c[0], c[1]), r, fill=False,
                                color="tab:blue", lw=0.8))
    ax.plot(cover.centers[:, 0], cover.centers[:, 1], "x",
            color="tab:blue", ms=4, label="centers")
    ax.set_aspect("equal")
    ax.legend(loc="best")
    ax.set_title(f"{len(cover)} balls, mesh {cover.mesh:.3g}")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_bound_table(rows, path) -> None:
    """Cover sums and certified lower bounds across a delta refinement.

    ``rows`` is a sequence of dicts with keys delta, Q, lower_bound and
    optionally grid_mu.
    """
    deltas = [r["delta"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.loglog(deltas, [r["Q"] for r in rows], "o-", color="tab:blue")
    ax1.set_xlabel(r"$\delta$")
    ax1.set_ylabel("cover sum Q")
    ax1.invert_xaxis()
    ax2.semilogy(deltas, [r["lower_bound"] for r in rows], "o-",
                 color="tab:green", label="certified bound")
    if all("grid_mu" in r for r in rows):
        ax2.semilogy(deltas, [r["grid_mu"] for r in rows], "s--",
                     color="tab:red", label="grid eigenvalue")
    ax2.set_xlabel(r"$\delta$")
    ax2.set_ylabel("eigenvalue")
    ax2.invert_xaxis()
    ax2.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_eigenfunction_slice(gf, path, axis: int = -1) -> None:
    """Heatmap of a grid eigenfunction on its central lattice slice."""
    d = gf.domain
    full = d.full(gf.values, fill=np.nan)
    if d.dim == 3:
        full = np.take(full, full.shape[axis] // 2, axis=axis)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(full.T, origin="lower", cmap="viridis",
                   extent=(d.origin[0], d.origin[0] + full.shape[0] * d.spacing,
                           d.origin[1], d.origin[1] + full.shape[1] * d.spacing))
    fig.colorbar(im, ax=ax, label="eigenfunction")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
