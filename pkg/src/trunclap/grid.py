"""Lattice domains and the monotone wide-stencil discrete operator.

The operator is discretized as a Bellman minimum: over a finite family of
orthogonal k-tuples of lattice directions, take the smallest sum of
directional second differences, then subtract the drift term built from a
Godunov upwind gradient.  Every ingredient is nondecreasing in off-center
values, so the scheme is degenerate elliptic (monotone).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridDomain",
    "GridFunction",
    "StencilFrameSet",
    "build_frames",
    "directional_second_difference",
    "discrete_fk_minus",
    "discrete_fk_minus_parts",
    "sample_onto_grid",
]


class GridError(ValueError):
    """Invalid lattice domain or stencil input."""


@dataclass(frozen=True)
class GridDomain:
    """Masked lattice in R^n (n = 2, 3) with Dirichlet exterior datum.

    Node (i, j, ...) sits at origin + index * spacing; mask marks interior
    nodes.  The Dirichlet value is substituted at the first exterior node.
    """

    dim: int
    spacing: float
    origin: np.ndarray
    mask: np.ndarray
    boundary_value: float = 0.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GridError(f"dim must be 2 or 3, got {self.dim}")
        if self.spacing <= 0:
            raise GridError("spacing must be > 0")
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != self.dim or not m.any():
            raise GridError("mask must be a nonempty boolean lattice")
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        idx = -np.ones(m.shape, dtype=np.int64)
        idx[m] = np.arange(int(m.sum()))
        object.__setattr__(self, "_index", idx)

    @property
    def n_interior(self) -> int:
        return int(self.mask.sum())

    def coords(self) -> np.ndarray:
        """(N, dim) physical coordinates of the interior nodes."""
        ij = np.argwhere(self.mask)
        return self.origin[None, :] + ij * self.spacing

    def full(self, values: np.ndarray, fill: float | None = None) -> np.ndarray:
        out = np.full(self.mask.shape,
                      self.boundary_value if fill is None else fill)
        out[self.mask] = values
        return out

    # ---- shape constructors -------------------------------------------------

    @classmethod
    def ball(cls, radius: float, spacing: float, dim: int = 2,
             center=None, boundary_value: float = 0.0) -> "GridDomain":
        center = np.zeros(dim) if center is None else np.asarray(center, float)
        n = int(math.floor(radius / spacing)) + 1
        ax = np.arange(-n, n + 1) * spacing
        grids = np.meshgrid(*([ax] * dim), indexing="ij")
        r2 = sum((g - 0.0) ** 2 for g in grids)
        mask = r2 < radius ** 2
        origin = center - n * spacing
        return cls(dim, spacing, origin, mask, boundary_value)

    @classmethod
    def box(cls, lengths, spacing: float, corner=None,
            boundary_value: float = 0.0) -> "GridDomain":
        lengths = np.atleast_1d(np.asarray(lengths, dtype=float))
        dim = lengths.size
        corner = np.zeros(dim) if corner is None else np.asarray(corner, float)
        ns = [int(math.floor(L / spacing + 1e-9)) for L in lengths]
        mask = np.ones([max(n - 1, 1) for n in ns], dtype=bool)
        return cls(dim, spacing, corner + spacing, mask, boundary_value)

    @classmethod
    def annulus(cls, r_in: float, r_out: float, spacing: float, dim: int = 2,
                boundary_value: float = 0.0) -> "GridDomain":
        if not 0 < r_in < r_out:
            raise GridError("need 0 < r_in < r_out")
        n = int(math.floor(r_out / spacing)) + 1
        ax = np.arange(-n, n + 1) * spacing
        grids = np.meshgrid(*([ax] * dim), indexing="ij")
        r2 = sum(g ** 2 for g in grids)
        mask = (r2 < r_out ** 2) & (r2 > r_in ** 2)
        return cls(dim, spacing, np.full(dim, -n * spacing), mask, boundary_value)

    @classmethod
    def tube(cls, p0, p1, radius: float, spacing: float,
             boundary_value: float = 0.0) -> "GridDomain":
        """3-d neighborhood of a segment: points within ``radius`` of it."""
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        lo = np.minimum(p0, p1) - radius - spacing
        hi = np.maximum(p0, p1) + radius + spacing
        ns = [int(math.ceil((b - a) / spacing)) + 1 for a, b in zip(lo, hi)]
        axes = [lo[i] + np.arange(ns[i]) * spacing for i in range(3)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        seg = p1 - p0
        L2 = float(seg @ seg)
        tpar = np.clip((pts - p0) @ seg / L2, 0.0, 1.0)
        dist = np.linalg.norm(pts - (p0 + tpar[:, None] * seg), axis=1)
        mask = (dist < radius).reshape(grids[0].shape)
        return cls(3, spacing, lo, mask, boundary_value)

    @classmethod
    def from_spec(cls, spec: dict) -> "GridDomain":
        """JSON domain spec: {"dim", "spacing", "shape", "params"}."""
        dim = int(spec["dim"])
        sp = float(spec["spacing"])
        shape = spec["shape"]
        par = spec.get("params", {})
        bval = float(spec.get("boundary_value", 0.0))
        if shape == "ball":
            return cls.ball(float(par["radius"]), sp, dim, boundary_value=bval)
        if shape == "annulus":
            return cls.annulus(float(par["r_in"]), float(par["r_out"]), sp,
                               dim, boundary_value=bval)
        if shape == "box":
            return cls.box(par["lengths"], sp, boundary_value=bval)
        if shape == "mask":
            return cls(dim, sp, np.asarray(par["origin"], float),
                       np.asarray(par["mask"], bool), bval)
        raise GridError(f"unknown shape {shape!r}")


@dataclass(frozen=True)
class GridFunction:
    """Real values on the interior nodes of a domain."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.domain.n_interior,):
            raise GridError(
                f"values shape {v.shape} != ({self.domain.n_interior},)")
        if not np.all(np.isfinite(v)):
            raise GridError("grid function values must be finite")
        object.__setattr__(self, "values", v)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def export_csv(self, path):
        """Row-major dump: lattice index, coordinates, value."""
        ij = np.argwhere(self.domain.mask)
        xy = self.domain.coords()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", *[f"x{i}" for i in range(self.domain.dim)],
                        "value"])
            for row, x, v in zip(ij, xy, self.values):
                w.writerow(["-".join(map(str, row)),
                            *[repr(float(c)) for c in x], repr(float(v))])


@dataclass(frozen=True)
class StencilFrameSet:
    """Lattice directions and the orthogonal k-tuples built from them."""

    dim: int
    k: int
    width: int
    directions: tuple          # tuple of int tuples, canonical sign, gcd 1
    kframes: tuple             # tuple of tuples of direction indices

    @property
    def axis_frame(self) -> tuple:
        return self.kframes[0]


def _lattice_directions(dim: int, width: int):
    dirs = []
    for v in itertools.product(range(-width, width + 1), repeat=dim):
        if all(c == 0 for c in v):
            continue
        if math.gcd(*[abs(c) for c in v]) != 1:
            continue
        first = next(c for c in v if c != 0)
        if first < 0:
            continue  # dedup up to sign
        dirs.append(v)
    return sorted(dirs)


def build_frames(dim: int, k: int, width: int = 1) -> StencilFrameSet:
    """All orthogonal k-tuples of lattice directions with |coords| <= width.

    Deterministic ordering with the coordinate-axis tuple first.
    """
    if not (1 <= k <= dim):
        raise GridError(f"need 1 <= k <= dim, got k={k}, dim={dim}")
    if width not in (1, 2):
        raise GridError("width must be 1 or 2")
    dirs = _lattice_directions(dim, width)
    arr = np.array(dirs)
    frames = []
    for combo in itertools.combinations(range(len(dirs)), k):
        ok = all(arr[i] @ arr[j] == 0
                 for i, j in itertools.combinations(combo, 2))
        if ok:
            frames.append(combo)
    # the frame spanned by the first k coordinate axes goes first
    axis_set = {tuple(int(j == d) for j in range(dim)) for d in range(k)}
    axis_frame = next(f for f in frames
                      if {dirs[i] for i in f} == axis_set)
    rest = sorted(f for f in frames if f != axis_frame)
    return StencilFrameSet(dim, k, width, tuple(dirs),
                           (axis_frame, *rest))


def _padded(u: GridFunction, width: int) -> np.ndarray:
    d = u.domain
    full = d.full(u.values)
    return np.pad(full, width, constant_values=d.boundary_value)


def _shifted(pad: np.ndarray, e, width: int, shape) -> np.ndarray:
    sl = tuple(slice(width + c, width + c + s) for c, s in zip(e, shape))
    return pad[sl]


def directional_second_difference(u: GridFunction, x, e) -> float:
    """Centered second difference along lattice direction e at lattice index x.

    Consistent with the curvature along e / |e|^2; exterior neighbors take the
    Dirichlet datum.
    """
    d = u.domain
    x = tuple(int(c) for c in np.atleast_1d(x))
    if not d.mask[x]:
        raise GridError(f"{x} is not an interior lattice point")
    e = tuple(int(c) for c in np.atleast_1d(e))
    w = max(abs(c) for c in e)
    pad = _padded(u, w)
    core = d.full(u.values)
    xp = tuple(xi + w + ei for xi, ei in zip(x, e))
    xm = tuple(xi + w - ei for xi, ei in zip(x, e))
    norm2 = sum(c * c for c in e)
    return float((pad[xp] + pad[xm] - 2.0 * core[x])
                 / (d.spacing ** 2 * norm2))


def _second_diffs(u: GridFunction, frames: StencilFrameSet) -> np.ndarray:
    """(n_dirs, N) directional second differences on the interior."""
    d = u.domain
    pad = _padded(u, frames.width)
    shape = d.mask.shape
    out = np.empty((len(frames.directions), d.n_interior))
    uc = u.values
    sp2 = d.spacing ** 2
    for i, e in enumerate(frames.directions):
        up = _shifted(pad, e, frames.width, shape)[d.mask]
        um = _shifted(pad, tuple(-c for c in e), frames.width, shape)[d.mask]
        norm2 = sum(c * c for c in e)
        out[i] = (up + um - 2.0 * uc) / (sp2 * norm2)
    return out


def _godunov_gradient(u: GridFunction, frames: StencilFrameSet):
    """Upwind gradient magnitude and signed components (N,), (N, dim).

    Component i is max(D^-, -D^+, 0) with the sign of the active branch, the
    choice that keeps the negative drift term monotone.
    """
    d = u.domain
    pad = _padded(u, frames.width)
    shape = d.mask.shape
    comps = np.zeros((d.n_interior, d.dim))
    for i in range(d.dim):
        e = tuple(int(j == i) for j in range(d.dim))
        up = _shifted(pad, e, frames.width, shape)[d.mask]
        um = _shifted(pad, tuple(-c for c in e), frames.width, shape)[d.mask]
        dm = (u.values - um) / d.spacing
        dp = (up - u.values) / d.spacing
        mag = np.maximum.reduce([dm, -dp, np.zeros_like(dm)])
        sign = np.where(dm >= -dp, 1.0, -1.0)
        comps[:, i] = np.where(mag > 0, sign * mag, 0.0)
    return np.linalg.norm(comps, axis=1), comps


def discrete_fk_minus_parts(u: GridFunction, frames: StencilFrameSet,
                            k: int, h: float):
    """Operator values plus the minimizing frame index and upwind data.

    Returns (values, frame_idx, grad_mag, grad_comps); the extras feed the
    policy iteration of the eigensolver.
    """
    if frames.dim != u.domain.dim or frames.k != k:
        raise GridError("frame set does not match (dim, k)")
    sd = _second_diffs(u, frames)
    sums = np.stack([sd[list(f)].sum(axis=0) for f in frames.kframes])
    frame_idx = np.argmin(sums, axis=0)
    mins = sums[frame_idx, np.arange(sums.shape[1])]
    gmag, gcomp = _godunov_gradient(u, frames)
    return mins - h * gmag, frame_idx, gmag, gcomp


def discrete_fk_minus(u: GridFunction, frames: StencilFrameSet,
                      k: int, h: float) -> GridFunction:
    """Nodewise monotone discretization of the truncated-trace drift operator."""
    vals, _, _, _ = discrete_fk_minus_parts(u, frames, k, h)
    return GridFunction(u.domain, vals)


def sample_onto_grid(f, d: GridDomain) -> GridFunction:
    """Evaluate a callable (vectorized over (N, dim) points) on the lattice."""
    vals = np.asarray(f(d.coords()), dtype=float).reshape(-1)
    return GridFunction(d, vals)
