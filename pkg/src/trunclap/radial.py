"""Radial barrier construction by weighted-ODE quadrature.

Solves, on a radial grid, the problem

    (t^{k-1} e^{-h* t} psi')' = e^{-h* t} t^{k-1} xi(t),   t^{k-1} psi'(t) -> 0,

for a non-increasing, non-negative source xi, and packages the resulting
profile (psi, psi', psi'') as a barrier centered at a point of R^n.  The
profile satisfies the differential inequality

    (sum of k smallest Hessian eigenvalues of psi(|x - x0|)) - h |grad|
        >= xi(r) / (1 + h* R),

which is checked numerically by :func:`fk_residual_radial`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

__all__ = [
    "BarrierParams",
    "CutoffS",
    "RadialProfile",
    "RadialBarrier",
    "default_hstar",
    "solve_psi",
    "fk_residual_radial",
    "build_barrier",
    "barrier_sup_bound",
]


class ParameterError(ValueError):
    """Barrier parameters violate hR < k or the h*, a admissibility bounds."""


class ProfileInvariantError(RuntimeError):
    """A computed radial profile violates one of its structural invariants."""


def default_hstar(k: int, h: float, R: float) -> float:
    """Smallest admissible weight exponent: max{h, h/(k - hR)}.

    Minimizes the (1 + h*R) loss factor and the sup-bound constants.
    """
    if h * R >= k:
        raise ParameterError(f"need h*R < k, got h={h}, R={R}, k={k}")
    return max(h, h / (k - h * R)) if h > 0 else 0.0


@dataclass(frozen=True)
class BarrierParams:
    """Parameters (k, h, R, h*, a) of the radial construction."""

    k: int
    h: float
    R: float
    hstar: float | None = None
    a: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.R <= 0:
            raise ParameterError(f"R must be > 0, got {self.R}")
        if self.h < 0:
            raise ParameterError(f"h must be >= 0, got {self.h}")
        if self.h * self.R >= self.k:
            raise ParameterError(
                f"need h*R < k: h={self.h}, R={self.R}, k={self.k}")
        hs_min = default_hstar(self.k, self.h, self.R)
        if self.hstar is None:
            object.__setattr__(self, "hstar", hs_min)
        elif self.hstar < hs_min * (1 - 1e-12):
            raise ParameterError(
                f"hstar={self.hstar} below admissible minimum {hs_min}")
        if self.a is not None:
            if not (0 < self.a <= self.R / math.e * (1 + 1e-12)):
                raise ParameterError(
                    f"a={self.a} outside (0, R/e] with R={self.R}")

    def with_a(self, a: float) -> "BarrierParams":
        return BarrierParams(self.k, self.h, self.R, self.hstar, a)


def _quintic_step(s):
    """C^2 monotone step with vanishing first and second derivatives at 0, 1."""
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


class CutoffS:
    """Non-increasing cutoff: 1 on [0,1], compactly supported in [0,2).

    The default profile is the C^2 piecewise quintic 1 - q(t-1) on [1,2].
    ``moment(k)`` returns the k-appropriate integral S_hat used by the
    sup-norm bounds:

        k = 1:  int S(t) dt
        k = 2:  int t S(t) max(1, |log t|) dt
        k > 2:  int t S(t) dt
    """

    support = 2.0

    def __init__(self, profile=None, validate: bool = True):
        self._profile = profile
        if validate:
            self._validate()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self._profile is not None:
            return np.asarray(self._profile(t), dtype=float)
        return 1.0 - _quintic_step(t - 1.0)

    def _validate(self, npts: int = 10_000):
        t = np.linspace(0.0, self.support * 1.05, npts)
        v = self(t)
        if np.any(v < -1e-12):
            raise ParameterError("cutoff must be non-negative")
        if np.any(np.diff(v) > 1e-12):
            raise ParameterError("cutoff must be non-increasing")
        if np.max(np.abs(self(np.linspace(0, 1, 101)) - 1.0)) > 1e-12:
            raise ParameterError("cutoff must equal 1 on [0,1]")
        if np.any(np.abs(v[t >= self.support]) > 1e-12):
            raise ParameterError("cutoff must vanish beyond its support")

    def moment(self, k: int) -> float:
        return self._moment_cached(int(k))

    @lru_cache(maxsize=None)
    def _moment_cached(self, k: int) -> float:
        if k == 1:
            val, _ = quad(lambda t: float(self(t)), 0.0, self.support,
                          points=[1.0], epsabs=1e-12, epsrel=1e-12)
        elif k == 2:
            def f(t):
                return float(self(t)) * t * max(1.0, abs(math.log(t)))
            val, _ = quad(f, 0.0, self.support, points=[math.exp(-1.0), 1.0],
                          epsabs=1e-12, epsrel=1e-12, limit=200)
        else:
            val, _ = quad(lambda t: float(self(t)) * t, 0.0, self.support,
                          points=[1.0], epsabs=1e-12, epsrel=1e-12)
        return float(val)


@dataclass(frozen=True)
class RadialProfile:
    """Sampled (t, psi, psi', psi'') solution of the weighted ODE."""

    params: BarrierParams
    grid: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    ddpsi: np.ndarray
    xi_values: np.ndarray
    xi0: float

    def validate(self, tol: float = 1e-8):
        p = self.params
        t = self.grid
        if np.any(self.dpsi < -tol):
            raise ProfileInvariantError("psi' must be non-negative")
        lim = abs(t[0] ** (p.k - 1) * self.dpsi[0])
        if self.xi0 > 0 and lim > 1e-6 * self.xi0 + tol:
            raise ProfileInvariantError(
                f"t^(k-1) psi' does not vanish at the origin: {lim:.3e}")
        slack = self.ddpsi - (1.0 + p.hstar * p.R) * self.dpsi / t
        if np.any(slack > tol):
            raise ProfileInvariantError(
                f"psi'' exceeds (1 + h*R) psi'/t by {np.max(slack):.3e}")
        low = t * self.xi_values / p.k - self.dpsi
        if np.any(low > tol):
            raise ProfileInvariantError(
                f"psi' falls below t xi / k by {np.max(low):.3e}")

    def export_csv(self, path, residual: np.ndarray | None = None):
        """Columns: t, psi, dpsi, ddpsi, xi, residual."""
        if residual is None:
            residual = fk_residual_radial(self)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "psi", "dpsi", "ddpsi", "xi", "residual"])
            for row in zip(self.grid, self.psi, self.dpsi, self.ddpsi,
                           self.xi_values, residual):
                w.writerow([repr(float(v)) for v in row])


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(7)


def _gl(a, b):
    """Gauss-Legendre nodes/weights on [a, b], broadcast over interval arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return (mid[..., None] + half[..., None] * _GL_NODES,
            half[..., None] * _GL_WEIGHTS)


def solve_psi(params: BarrierParams, xi, grid) -> RadialProfile:
    """Quadrature solution of the weighted radial ODE on a grid in (0, R].

    ``xi`` must be a vectorized callable, non-increasing and non-negative.
    psi' comes from the integral representation, psi from nested quadrature
    of psi', and psi'' from the expanded ODE identity
    psi'' = xi + h* psi' - (k-1) psi'/t (avoids cancellation).
    """
    k, hs, R = params.k, params.hstar, params.R
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ParameterError("grid must be a 1-d array with >= 2 points")
    if np.any(np.diff(t) <= 0) or t[0] <= 0 or t[-1] > R * (1 + 1e-12):
        raise ParameterError("grid must be strictly increasing in (0, R]")

    xi_vals = np.asarray(xi(t), dtype=float)
    if np.any(xi_vals < -1e-12):
        raise ParameterError("xi must be non-negative on the grid")
    if np.any(np.diff(xi_vals) > 1e-10 * max(1.0, float(xi_vals[0]))):
        raise ParameterError("xi must be non-increasing on the grid")
    xi0 = float(np.asarray(xi(np.array([0.0])))[0])

    a_ref = params.a if params.a is not None else t[-1]
    t_series = 1e-6 * a_ref  # below this, use the psi' ~ xi(0) t / k series

    def integrand(s):
        return np.exp(-hs * s) * s ** (k - 1) * np.asarray(xi(s), dtype=float)

    def dpsi_at(s, inner_acc):
        """psi'(s) given the accumulated inner integral at s."""
        out = np.exp(hs * s) * inner_acc / s ** (k - 1)
        small = s < t_series
        if np.any(small):
            out = np.where(small, xi0 * s / k, out)
        return out

    nodes = np.concatenate(([0.0], t))
    # inner integral I(t_i) = int_0^{t_i} e^{-h*s} s^{k-1} xi(s) ds
    pts, wts = _gl(nodes[:-1], nodes[1:])
    seg = np.sum(wts * integrand(pts), axis=-1)
    inner = np.cumsum(seg)

    dpsi = dpsi_at(t, inner)

    # psi(t_i) by quadrature of psi'; inner integral advanced to each outer node
    opts, owts = _gl(nodes[:-1], nodes[1:])           # (N, 7)
    ipts, iwts = _gl(nodes[:-1, None] + 0.0 * opts, opts)  # (N, 7, 7)
    inner_at_opts = np.concatenate(([0.0], inner[:-1]))[:, None] \
        + np.sum(iwts * integrand(ipts), axis=-1)
    psi_seg = np.sum(owts * dpsi_at(opts, inner_at_opts), axis=-1)
    psi = np.cumsum(psi_seg)

    ddpsi = xi_vals + hs * dpsi - (k - 1) * dpsi / t

    prof = RadialProfile(params, t, psi, dpsi, ddpsi, xi_vals, xi0)
    prof.validate()
    return prof


def fk_residual_radial(profile: RadialProfile, h: float | None = None) -> np.ndarray:
    """Operator value minus xi/(1 + h*R) at each grid radius.

    Uses the analytic Hessian structure of a radial function: eigenvalues
    psi'' (multiplicity 1) and psi'/r (multiplicity n-1), so the truncated
    trace is psi'' + (k-1) psi'/r when psi'' <= psi'/r and k psi'/r otherwise.
    Must be >= -1e-8 everywhere for a valid profile.
    """
    p = profile.params
    if h is None:
        h = p.h
    t, dp, ddp = profile.grid, profile.dpsi, profile.ddpsi
    ratio = dp / t
    pk = np.where(ddp <= ratio, ddp + (p.k - 1) * ratio, p.k * ratio)
    fk = pk - h * np.abs(dp)
    return fk - profile.xi_values / (1.0 + p.hstar * p.R)


def _barrier_grid(a: float, R: float, n_core: int = 2500, n_tail: int = 2500):
    """Dense grid resolving [0, 2a] (where xi varies) and the tail out to R."""
    split = min(2.0 * a, R)
    core = np.geomspace(1e-8 * R, split, n_core)
    if split < R:
        tail = np.linspace(split, R, n_tail)[1:]
        return np.concatenate((core, tail))
    return core


@dataclass(frozen=True)
class RadialBarrier:
    """A built barrier u(x) = psi(|x - center|), evaluable on the closed ball.

    Vanishes only at the center; sup-norm is psi(R) since psi is
    non-decreasing.
    """

    center: np.ndarray
    profile: RadialProfile
    _psi: CubicSpline
    _dpsi: CubicSpline
    _ddpsi: CubicSpline

    @property
    def params(self) -> BarrierParams:
        return self.profile.params

    @property
    def sup_norm(self) -> float:
        return float(self.profile.psi[-1])

    def _radii(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x - self.center
        r = np.linalg.norm(d, axis=1)
        R = self.params.R
        if np.any(r > R * (1 + 1e-9)):
            raise ParameterError("evaluation point outside the barrier ball")
        return x, d, np.minimum(r, R)

    def value(self, x):
        _, _, r = self._radii(x)
        return self._psi(r)

    def gradient(self, x):
        x, d, r = self._radii(x)
        out = np.zeros_like(x)
        pos = r > 0
        out[pos] = (self._dpsi(r[pos]) / r[pos])[:, None] * d[pos]
        return out

    def hessian(self, x):
        x, d, r = self._radii(x)
        n = x.shape[1]
        out = np.empty((x.shape[0], n, n))
        eye = np.eye(n)
        pos = r > 0
        if np.any(pos):
            rp, dp = r[pos], d[pos]
            unit = dp / rp[:, None]
            rr = unit[:, :, None] * unit[:, None, :]
            ddp = self._ddpsi(rp)
            rat = self._dpsi(rp) / rp
            out[pos] = (ddp - rat)[:, None, None] * rr + rat[:, None, None] * eye
        if np.any(~pos):
            out[~pos] = self._ddpsi(0.0) * eye
        return out


def build_barrier(x0, params: BarrierParams, S: CutoffS,
                  n_core: int = 2500, n_tail: int = 2500) -> RadialBarrier:
    """Barrier centered at x0 with source xi(t) = k S(t/a), sampled densely."""
    if params.a is None:
        raise ParameterError("build_barrier requires params.a")
    a, k = params.a, params.k
    grid = _barrier_grid(a, params.R, n_core, n_tail)
    prof = solve_psi(params, lambda t: k * S(np.asarray(t) / a), grid)

    # extend splines through t = 0 with the series values
    t0 = np.concatenate(([0.0], prof.grid))
    psi0 = np.concatenate(([0.0], prof.psi))
    dpsi0 = np.concatenate(([0.0], prof.dpsi))
    ddpsi0 = np.concatenate(([prof.xi0 / k], prof.ddpsi))
    return RadialBarrier(
        center=np.asarray(x0, dtype=float),
        profile=prof,
        _psi=CubicSpline(t0, psi0),
        _dpsi=CubicSpline(t0, dpsi0),
        _ddpsi=CubicSpline(t0, ddpsi0),
    )


def barrier_sup_bound(params: BarrierParams, S: CutoffS) -> float:
    """Closed-form sup-norm bound for the built barrier.

    k = 1:  e^{h*R} k S_hat R a
    k = 2:  2 k e^{h*R} S_hat a^2 log(R/a)
    k > 2:  e^{h*R} k / (k-2) S_hat a^2
    """
    if params.a is None:
        raise ParameterError("sup bound requires params.a")
    k, hs, R, a = params.k, params.hstar, params.R, params.a
    shat = S.moment(k)
    amp = math.exp(hs * R)
    if k == 1:
        return amp * k * shat * R * a
    if k == 2:
        return 2.0 * k * amp * shat * a * a * math.log(R / a)
    return amp * k / (k - 2) * shat * a * a
