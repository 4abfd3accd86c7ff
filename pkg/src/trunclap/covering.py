"""Gauge functions, greedy ball covers, and covering-sum measure bounds.

A gauge maps a covering radius to its weight in the covering sum; the three
kinds in scope are R*t (k = 1), t^2 |log(R/t)| (k = 2) and t^2 (k >= 3).
Radii are restricted to [0, R/e], the range where every gauge is monotone.
Covers produced by :func:`greedy_cover` are certified: every point of the
sampled compact set lies inside some ball.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Gauge",
    "BallCover",
    "CompactSetSample",
    "gauge_for_k",
    "psi_eval",
    "cover_sum",
    "greedy_cover",
    "hausdorff_upper",
    "segment_sample",
    "circle_sample",
]


class CoverError(ValueError):
    """Invalid gauge/covering input."""


_KINDS = ("k1", "k2", "k3plus")


@dataclass(frozen=True)
class Gauge:
    """Covering gauge Psi with reference scale R, monotone on [0, R/e]."""

    kind: str
    R: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise CoverError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.R <= 0:
            raise CoverError(f"R must be > 0, got {self.R}")

    @property
    def max_radius(self) -> float:
        return self.R / math.e

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.max_radius * (1 + 1e-12)):
            raise CoverError(
                f"radius outside gauge domain [0, R/e] = [0, {self.max_radius}]")
        if self.kind == "k1":
            return self.R * t
        if self.kind == "k2":
            with np.errstate(divide="ignore"):
                lg = np.where(t > 0, np.abs(np.log(self.R / np.maximum(t, 1e-300))), 0.0)
            return t * t * lg
        return t * t

    def to_json(self) -> dict:
        return {"kind": self.kind, "R": self.R}

    @classmethod
    def from_json(cls, d: dict) -> "Gauge":
        return cls(kind=d["kind"], R=float(d["R"]))


def gauge_for_k(k: int, R: float) -> Gauge:
    """The gauge matched to the truncation order k."""
    if k == 1:
        return Gauge("k1", R)
    if k == 2:
        return Gauge("k2", R)
    return Gauge("k3plus", R)


def psi_eval(g: Gauge, t: float) -> float:
    return float(g(t))


@dataclass(frozen=True)
class BallCover:
    """A finite ball cover: centers (N, n) and positive radii (N,)."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        r = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if c.shape[0] != r.shape[0] or c.shape[0] == 0:
            raise CoverError("centers and radii must be nonempty and matched")
        if np.any(r <= 0):
            raise CoverError("radii must be positive")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    def __len__(self) -> int:
        return self.centers.shape[0]

    @property
    def mesh(self) -> float:
        return float(np.max(self.radii))

    def contains(self, points) -> np.ndarray:
        """Boolean mask: point lies inside some ball (closed)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.linalg.norm(p[:, None, :] - self.centers[None, :, :], axis=-1)
        return np.any(d <= self.radii[None, :] * (1 + 1e-12), axis=1)

    def to_json(self) -> dict:
        return {"balls": [{"c": list(map(float, c)), "r": float(r)}
                          for c, r in zip(self.centers, self.radii)]}

    @classmethod
    def from_json(cls, d: dict) -> "BallCover":
        balls = d["balls"]
        return cls(np.array([b["c"] for b in balls], dtype=float),
                   np.array([b["r"] for b in balls], dtype=float))


@dataclass(frozen=True)
class CompactSetSample:
    """A compact set represented by a finite eps-net of sample points.

    Every point of the underlying set is within ``sampling_gap`` of a sample.
    """

    points: np.ndarray
    sampling_gap: float

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.points, dtype=float))
        if p.shape[0] == 0:
            raise CoverError("sample must be nonempty")
        if self.sampling_gap <= 0:
            raise CoverError("sampling_gap must be > 0")
        object.__setattr__(self, "points", p)


def segment_sample(p0, p1, gap: float) -> CompactSetSample:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    n = max(int(math.ceil(length / gap)) + 1, 2)
    ts = np.linspace(0.0, 1.0, n)
    return CompactSetSample(p0[None, :] + ts[:, None] * (p1 - p0)[None, :], gap)


def circle_sample(center, rho: float, gap: float, dim: int = 2) -> CompactSetSample:
    center = np.asarray(center, dtype=float)
    n = max(int(math.ceil(2 * math.pi * rho / gap)) + 1, 8)
    th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    pts = np.zeros((n, dim))
    pts[:, 0] = rho * np.cos(th)
    pts[:, 1] = rho * np.sin(th)
    return CompactSetSample(pts + center[None, :], gap)


def cover_sum(g: Gauge, c: BallCover) -> float:
    """Sum of gauge values of the cover radii."""
    return float(np.sum(g(c.radii)))


def greedy_cover(E: CompactSetSample, delta: float) -> BallCover:
    """Cover of E by balls of radius delta via farthest-point center selection.

    Centers are sample points chosen so that all samples lie within
    delta - sampling_gap of a center; the output radius delta then covers the
    whole underlying set, not just the samples.  Deterministic: the first
    center is the lowest-index sample and ties break by lowest index.
    """
    if delta < 2 * E.sampling_gap:
        raise CoverError(
            f"delta={delta} too small: need delta >= 2*sampling_gap={2*E.sampling_gap}")
    eff = delta - E.sampling_gap
    pts = E.points
    dist = np.linalg.norm(pts - pts[0], axis=1)
    centers = [0]
    while True:
        far = float(np.max(dist))
        if far <= eff:
            break
        idx = int(np.argmax(dist))  # first occurrence: lowest index
        centers.append(idx)
        dist = np.minimum(dist, np.linalg.norm(pts - pts[idx], axis=1))
    return BallCover(pts[np.array(centers)], np.full(len(centers), float(delta)))


def hausdorff_upper(E: CompactSetSample, g: Gauge, delta_sequence) -> list[tuple[float, float]]:
    """Covering-sum upper bounds along a decreasing sequence of mesh sizes.

    Greedy covers do not realize the exact infimum, so each entry is an upper
    bound on the delta-level covering sum; the minimum over the sequence is
    the headline bound on the gauge measure.
    """
    deltas = [float(d) for d in delta_sequence]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise CoverError("delta sequence must be strictly decreasing")
    out = []
    for d in deltas:
        cov = greedy_cover(E, d)
        out.append((d, cover_sum(g, cov)))
    return out


def save_cover(path, cover: BallCover):
    with open(path, "w") as fh:
        json.dump(cover.to_json(), fh, sort_keys=True, indent=1)


def load_cover(path) -> BallCover:
    with open(path) as fh:
        return BallCover.from_json(json.load(fh))
