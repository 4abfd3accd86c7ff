"""Global strict supersolutions assembled from a ball cover.

Given a cover of a compact set by admissible balls, one radial barrier is
built per ball (with its cutoff scale equal to the ball radius) and summed:

    w(x) = ((1 + h*R) / k) * sum_i (u_i(x) - 2 ||u_i||_inf).

The sum is strictly negative, satisfies the operator inequality >= 1 inside
the cover and >= 0 elsewhere, and its sup-norm is controlled by C1 * Q with
Q the matching covering sum.  The reciprocal 1/(C1 Q) is then a certified
lower bound for the principal eigenvalue on any set inside the cover.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .covering import BallCover, CoverError, cover_sum, gauge_for_k
from .radial import (BarrierParams, CutoffS, ParameterError, RadialBarrier,
                     barrier_sup_bound, build_barrier)
from .spectral import fk_value

__all__ = [
    "SupersolutionCertificate",
    "VerificationReport",
    "assemble_supersolution",
    "verify_strict_supersolution",
    "eigen_lower_bound",
    "c1_constant",
]


def _c0_constant(k: int, hstar: float, R: float) -> float:
    """Case prefactor of the per-barrier sup-norm bound."""
    amp = math.exp(hstar * R)
    if k == 1:
        return amp * k
    if k == 2:
        return 2.0 * k * amp
    return amp * k / (k - 2)


def c1_constant(k: int, hstar: float, R: float, S: CutoffS) -> float:
    """C1 = 2 ((1 + h*R)/k) * C0 * S_hat, the sup-norm-per-Q constant."""
    return 2.0 * (1.0 + hstar * R) / k * _c0_constant(k, hstar, R) * S.moment(k)


@dataclass(frozen=True)
class SupersolutionCertificate:
    """The assembled supersolution plus the constants certifying the bound."""

    cover: BallCover
    params: BarrierParams  # a unset; per-ball scales are the cover radii
    barriers: list
    S: CutoffS
    Q: float
    C1: float
    sup_w: float  # bound on ||w||_inf, <= C1 * Q

    @property
    def scale(self) -> float:
        p = self.params
        return (1.0 + p.hstar * p.R) / p.k

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        acc = np.zeros(x.shape[0])
        for b in self.barriers:
            acc += b.value(x) - 2.0 * b.sup_norm
        return self.scale * acc

    def gradient(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        acc = np.zeros_like(x)
        for b in self.barriers:
            acc += b.gradient(x)
        return self.scale * acc

    def hessian(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        acc = np.zeros((x.shape[0], x.shape[1], x.shape[1]))
        for b in self.barriers:
            acc += b.hessian(x)
        return self.scale * acc

    def operator_values(self, x):
        """Exact operator value at each probe from the analytic Hessian sum."""
        p = self.params
        H = self.hessian(x)
        G = self.gradient(x)
        return np.array([fk_value(H[i], G[i], p.k, p.h, "minus")
                         for i in range(H.shape[0])])

    def to_json(self) -> dict:
        p = self.params
        return {
            "cover": self.cover.to_json(),
            "params": {"k": p.k, "h": p.h, "R": p.R, "hstar": p.hstar},
            "gauge": gauge_for_k(p.k, p.R).to_json(),
            "Q": self.Q,
            "C1": self.C1,
            "sup_w": self.sup_w,
            "eigen_lower": eigen_lower_bound(self),
        }


def assemble_supersolution(cover: BallCover, params: BarrierParams,
                           S: CutoffS | None = None,
                           n_core: int = 2000, n_tail: int = 2000) -> SupersolutionCertificate:
    """Build one barrier per cover ball and assemble the negative sum."""
    if S is None:
        S = CutoffS()
    p = params
    gauge = gauge_for_k(p.k, p.R)
    if np.any(cover.radii > gauge.max_radius * (1 + 1e-12)):
        raise CoverError("cover radii must be <= R/e for the matching gauge")
    barriers: list[RadialBarrier] = []
    for c, r in zip(cover.centers, cover.radii):
        bp = p.with_a(float(r))
        b = build_barrier(c, bp, S, n_core=n_core, n_tail=n_tail)
        if b.sup_norm > barrier_sup_bound(bp, S) * (1 + 1e-9):
            raise ParameterError("barrier sup-norm exceeds its analytic bound")
        barriers.append(b)
    Q = cover_sum(gauge, cover)
    C1 = c1_constant(p.k, p.hstar, p.R, S)
    sup_w = 2.0 * (1.0 + p.hstar * p.R) / p.k * sum(b.sup_norm for b in barriers)
    if sup_w > C1 * Q * (1 + 1e-9):
        raise ParameterError("assembled sup-norm exceeds C1*Q")
    return SupersolutionCertificate(cover, p, barriers, S, Q, C1, sup_w)


@dataclass(frozen=True)
class VerificationReport:
    probes: np.ndarray
    values: np.ndarray       # operator values
    w_values: np.ndarray
    inside: np.ndarray       # probe lies in the cover
    min_inside: float
    min_outside: float
    max_w: float
    passed: bool

    def export_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["probe", "inside", "operator_value", "w"])
            for i in range(self.probes.shape[0]):
                wr.writerow([json.dumps(list(map(float, self.probes[i]))),
                             int(self.inside[i]),
                             repr(float(self.values[i])),
                             repr(float(self.w_values[i]))])


def verify_strict_supersolution(cert: SupersolutionCertificate, probe_points,
                                inside_tol: float = 1e-6,
                                outside_tol: float = 1e-6) -> VerificationReport:
    """Check the operator inequality at probe points.

    Requires >= 1 - tol inside the cover and >= -tol outside, and w < 0
    everywhere.  The analytic Hessian evaluation can fail these margins only
    through quadrature/interpolation error.
    """
    probes = np.atleast_2d(np.asarray(probe_points, dtype=float))
    vals = cert.operator_values(probes)
    wv = cert.value(probes)
    inside = cert.cover.contains(probes)
    min_in = float(np.min(vals[inside])) if np.any(inside) else math.inf
    min_out = float(np.min(vals[~inside])) if np.any(~inside) else math.inf
    max_w = float(np.max(wv))
    passed = (min_in >= 1.0 - inside_tol and min_out >= -outside_tol
              and max_w < 0.0)
    return VerificationReport(probes, vals, wv, inside, min_in, min_out,
                              max_w, passed)


def eigen_lower_bound(cert: SupersolutionCertificate) -> float:
    """Certified lower bound 1/(C1 Q) for the principal eigenvalue."""
    return 1.0 / (cert.C1 * cert.Q)
