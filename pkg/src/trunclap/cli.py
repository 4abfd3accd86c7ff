"""Command-line drivers for the truncated-Laplacian toolbox.

Every subcommand writes deterministic artifacts (JSON / CSV, optional PNG
figures) into an output directory together with a manifest recording the
parameters, an input hash, package versions and tolerances.  No timestamps
are embedded anywhere, so identical invocations produce byte-identical
results.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, covering, eigen, grid, radial, spectral, supersol

__all__ = ["main"]


def _setup_threads() -> None:
    """Pin BLAS thread counts (TRUNCLAP_THREADS) for reproducible timing."""
    n = os.environ.get("TRUNCLAP_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _hash_params(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_manifest(outdir: Path, command: str, params: dict,
                    tolerances: dict | None = None) -> None:
    import matplotlib
    import scipy

    _json_dump({
        "command": command,
        "params": params,
        "inputs_sha256": _hash_params(params),
        "tolerances": tolerances or {},
        "versions": {
            "trunclap": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
    }, outdir / "manifest.json")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_sample(path: str) -> covering.CompactSetSample:
    """Compact-set sample from JSON: segment, circle, or explicit points."""
    spec = json.loads(Path(path).read_text())
    kind = spec.get("type")
    if kind == "segment":
        return covering.segment_sample(spec["p0"], spec["p1"],
                                       gap=float(spec["gap"]))
    if kind == "circle":
        return covering.circle_sample(spec["center"], float(spec["rho"]),
                                      gap=float(spec["gap"]),
                                      dim=int(spec.get("dim", 2)))
    if kind == "points":
        return covering.CompactSetSample(np.asarray(spec["points"], float),
                                         float(spec["gap"]))
    raise SystemExit(f"error: unknown sample type {kind!r}")


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


# ---- subcommands ------------------------------------------------------------


def cmd_pk_eval(args) -> int:
    matrix = np.asarray(json.loads(args.matrix), dtype=float)
    val = spectral.pk_minus(matrix, args.k)
    if args.gradient is not None:
        g = np.asarray(json.loads(args.gradient), dtype=float)
        val = spectral.fk_value(matrix, g, args.k, args.h, sign="minus")
    print(f"{val:.12g}")
    return 0


def cmd_barrier(args) -> int:
    out = _outdir(args)
    params = radial.BarrierParams(args.k, args.hR / args.R, args.R,
                                  hstar=args.hstar, a=args.a)
    S = radial.CutoffS()
    barrier = radial.build_barrier(np.zeros(3), params, S)
    profile = barrier.profile
    resid = radial.fk_residual_radial(profile)
    summary = {
        "k": args.k, "hR": args.hR, "R": args.R, "a": params.a,
        "hstar": params.hstar,
        "sup_norm": barrier.sup_norm,
        "sup_bound": radial.barrier_sup_bound(params, S),
        "min_residual": float(np.min(resid)),
    }
    profile.export_csv(out / "profile.csv")
    _json_dump(summary, out / "barrier.json")
    if args.figures:
        from . import plots
        plots.plot_radial_profile(profile, out / "profile.png")
    _write_manifest(out, "barrier", vars_of(args),
                    {"residual_floor": -1e-8})
    return 0


def cmd_cover(args) -> int:
    out = _outdir(args)
    E = _load_sample(args.set)
    cover = covering.greedy_cover(E, args.delta)
    g = covering.gauge_for_k(args.k, R=args.R)
    covering.save_cover(out / "cover.json", cover)
    _json_dump({
        "delta": args.delta, "balls": len(cover),
        "mesh": cover.mesh, "Q": covering.cover_sum(g, cover),
        "gauge": g.to_json(),
    }, out / "cover_summary.json")
    if args.figures:
        from . import plots
        plots.plot_cover(cover, E.points, out / "cover.png")
    _write_manifest(out, "cover", vars_of(args))
    return 0


def _certificate(E, k: float, hR: float, R: float, delta: float):
    cover = covering.greedy_cover(E, delta)
    params = radial.BarrierParams(k, hR / R, R)
    S = radial.CutoffS()
    cert = supersol.assemble_supersolution(cover, params, S)
    return cover, cert


def _probe_cloud(E: covering.CompactSetSample, spread: float) -> np.ndarray:
    """Deterministic probes: the sample itself plus jittered shells."""
    rng = np.random.default_rng(20250826)
    jitter = rng.normal(scale=spread, size=(len(E.points), E.points.shape[1]))
    return np.vstack([E.points, E.points + jitter])


def cmd_certify(args) -> int:
    out = _outdir(args)
    E = _load_sample(args.set)
    cover, cert = _certificate(E, args.k, args.hR, args.R, args.delta)
    probes = _probe_cloud(E, 0.5 * args.delta)
    # each barrier is only defined on its own ball of radius R
    dist = np.linalg.norm(probes[:, None] - cover.centers[None], axis=-1)
    probes = probes[np.max(dist, axis=1) <= args.R]
    report = supersol.verify_strict_supersolution(cert, probes)
    _json_dump(cert.to_json(), out / "certificate.json")
    report.export_csv(out / "verification.csv")
    _json_dump({"passed": report.passed,
                "min_inside": report.min_inside,
                "min_outside": report.min_outside,
                "eigen_lower_bound": supersol.eigen_lower_bound(cert)},
               out / "verify_summary.json")
    if args.figures:
        from . import plots
        plots.plot_cover(cover, E.points, out / "cover.png")
    _write_manifest(out, "certify", vars_of(args),
                    {"inside_tol": 1e-6, "outside_tol": 1e-6})
    return 0 if report.passed else 3


def _domain_from_args(args) -> grid.GridDomain:
    if args.domain:
        return grid.GridDomain.from_spec(json.loads(Path(args.domain)
                                                    .read_text()))
    shape = args.shape
    if shape == "ball":
        return grid.GridDomain.ball(args.R, args.spacing, dim=args.dim)
    if shape == "box":
        return grid.GridDomain.box([args.R] * args.dim, args.spacing)
    if shape == "annulus":
        return grid.GridDomain.annulus(args.inner, args.R, args.spacing,
                                       dim=args.dim)
    raise SystemExit(f"error: unknown shape {shape!r}")


def cmd_eig(args) -> int:
    out = _outdir(args)
    d = _domain_from_args(args)
    frames = grid.build_frames(d.dim, args.k, args.width)
    if args.method == "inverse_power":
        est = eigen.principal_eigenvalue(d, args.k, args.h, frames=frames,
                                         tol=args.tol)
    elif args.method == "flow_bisection":
        est = eigen.flow_bisection(d, args.k, args.h, frames=frames,
                                   c_interval=(args.c_lo, args.c_hi),
                                   tol=args.tol, return_estimate=True)
    elif args.method == "shooting":
        est = eigen.radial_shooting_oracle(args.R, args.dim, args.k, args.h,
                                           return_estimate=True)
    else:
        raise SystemExit(f"error: unknown method {args.method!r}")
    _json_dump(est.to_json(), out / "eigen.json")
    if est.eigenfunction is not None:
        est.eigenfunction.export_csv(out / "eigenfunction.csv")
        if args.figures:
            from . import plots
            plots.plot_eigenfunction_slice(est.eigenfunction,
                                           out / "eigenfunction.png")
    _write_manifest(out, "eig", vars_of(args), {"tol": args.tol})
    return 0


def cover_neighborhood(cover: covering.BallCover,
                       spacing: float) -> grid.GridDomain:
    """Lattice domain whose interior nodes lie inside the cover union."""
    dim = cover.centers.shape[1]
    lo = (cover.centers - cover.radii[:, None]).min(axis=0) - 2 * spacing
    hi = (cover.centers + cover.radii[:, None]).max(axis=0) + 2 * spacing
    ns = np.ceil((hi - lo) / spacing).astype(int) + 1
    axes = [lo[i] + spacing * np.arange(ns[i]) for i in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    mask = cover.contains(pts).reshape(tuple(ns))
    return grid.GridDomain(dim, spacing, lo, mask)


def cmd_verify_bound(args) -> int:
    out = _outdir(args)
    E = _load_sample(args.set)
    deltas = _parse_floats(args.deltas)
    rows = []
    for delta in deltas:
        cover, cert = _certificate(E, args.k, args.hR, args.R, delta)
        row = {"delta": delta, "Q": cert.Q,
               "lower_bound": supersol.eigen_lower_bound(cert)}
        if args.grid_mu:
            d = cover_neighborhood(cover, delta / 5.0)
            est = eigen.principal_eigenvalue(d, args.k, args.hR / args.R,
                                             tol=1e-3)
            row["grid_mu"] = est.mu
        rows.append(row)
    fields = list(rows[0].keys())
    with open(out / "bound_table.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) for k, v in row.items()})
    ok = all(rows[i]["lower_bound"] < rows[i].get("grid_mu", math.inf)
             for i in range(len(rows)))
    _json_dump({"rows": rows, "bound_below_grid": ok},
               out / "bound_summary.json")
    if args.figures:
        from . import plots
        plots.plot_bound_table(rows, out / "bounds.png")
    _write_manifest(out, "verify-bound", vars_of(args))
    return 0 if ok else 3


def cmd_annulus(args) -> int:
    out = _outdir(args)
    rho = 3.0 * math.pi / 2.0
    h = args.k / rho
    rows = []
    for eps in _parse_floats(args.eps):
        d = grid.GridDomain.annulus(rho - eps, rho + eps, args.spacing,
                                    dim=2)
        frames = grid.build_frames(2, args.k, args.width)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            est = eigen.principal_eigenvalue(d, args.k, h, frames=frames,
                                             tol=args.tol)
        rows.append({"eps": eps, "mu": est.mu, "nodes": d.n_interior})
    with open(out / "annulus.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["eps", "mu", "nodes"])
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) for k, v in row.items()})
    _json_dump({"rows": rows,
                "strictly_decreasing": all(
                    rows[i]["mu"] > rows[i + 1]["mu"]
                    for i in range(len(rows) - 1))},
               out / "annulus_summary.json")
    _write_manifest(out, "annulus", vars_of(args), {"tol": args.tol})
    return 0


def cmd_scale_check(args) -> int:
    out = _outdir(args)
    rows = []
    base = None
    for s in [1.0] + _parse_floats(args.scales):
        R = args.R * s
        h = args.hR / R
        d = grid.GridDomain.ball(R, R / args.resolution, dim=2)
        est = eigen.principal_eigenvalue(d, args.k, h, tol=args.tol)
        E = covering.segment_sample([-0.5 * R, 0.0], [0.5 * R, 0.0],
                                    gap=args.delta * s / 100.0)
        _, cert = _certificate(E, args.k, args.hR, R, args.delta * s)
        row = {"s": s, "mu": est.mu,
               "lower_bound": supersol.eigen_lower_bound(cert)}
        if base is None:
            base = row
        row["mu_times_s2"] = row["mu"] * s * s
        row["bound_times_s2"] = row["lower_bound"] * s * s
        rows.append(row)
    with open(out / "scale_table.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) for k, v in row.items()})
    _json_dump({"rows": rows}, out / "scale_summary.json")
    _write_manifest(out, "scale-check", vars_of(args), {"tol": args.tol})
    return 0


def cmd_report_constants(args) -> int:
    if args.hR >= args.k:
        raise SystemExit(f"error: need hR < k, got hR={args.hR} k={args.k}")
    params = radial.BarrierParams(args.k, args.hR / args.R, args.R)
    S = radial.CutoffS()
    c0 = supersol._c0_constant(args.k, params.hstar, args.R)
    shat = S.moment(args.k)
    report = {
        "k": args.k, "hR": args.hR, "R": args.R,
        "hstar": {
            "value": params.hstar,
            "provenance": "smallest admissible drift amplification "
                          "max{h, h/(k - hR)}",
        },
        "one_plus_hstarR": {
            "value": 1.0 + params.hstar * args.R,
            "provenance": "second-derivative control of the radial profile: "
                          "psi'' <= (1 + h*R) psi'/t",
        },
        "C0": {
            "value": c0,
            "provenance": "case prefactor of the per-ball sup-norm bound "
                          "(k=1 linear gauge, k=2 logarithmic, k>2 quadratic)",
        },
        "S_hat": {
            "value": shat,
            "provenance": "cutoff moment: integral of S (k=1), of t*S*"
                          "max(1,|log t|) (k=2), of t*S (k>2)",
        },
        "C1_hat": {
            "value": c0 * shat,
            "provenance": "product C0 * S_hat",
        },
        "C1": {
            "value": supersol.c1_constant(args.k, params.hstar, args.R, S),
            "provenance": "sup-norm-per-cover-sum constant "
                          "2 ((1 + h*R)/k) C0 S_hat; the certified "
                          "eigenvalue lower bound is 1/(C1 Q)",
        },
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        out = _outdir(args)
        (out / "constants.json").write_text(text + "\n")
        _write_manifest(out, "report-constants", vars_of(args))
    else:
        print(text)
    return 0


# ---- parser -----------------------------------------------------------------


def vars_of(args) -> dict:
    skip = {"func", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="trunclap",
        description="Certified principal-eigenvalue machinery for the "
                    "truncated Laplacian with drift.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        sp.set_defaults(func=fn)
        return sp

    sp = add("pk-eval", cmd_pk_eval,
             help="evaluate the partial trace (and the full operator)")
    sp.add_argument("--matrix", required=True, help="JSON row-major matrix")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--h", type=float, default=0.0)
    sp.add_argument("--gradient", help="JSON gradient vector")

    sp = add("barrier", cmd_barrier, help="radial barrier profile + bounds")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--hR", type=float, required=True)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--a", type=float)
    sp.add_argument("--hstar", type=float)
    sp.add_argument("--out", required=True)
    sp.add_argument("--figures", action="store_true")

    sp = add("cover", cmd_cover, help="greedy ball cover of a sampled set")
    sp.add_argument("--set", required=True, help="sample spec JSON file")
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--figures", action="store_true")

    sp = add("certify", cmd_certify,
             help="assemble + verify a supersolution certificate")
    sp.add_argument("--set", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--hR", type=float, required=True)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--figures", action="store_true")

    sp = add("eig", cmd_eig, help="discrete principal eigenvalue")
    sp.add_argument("--domain", help="GridDomain spec JSON file")
    sp.add_argument("--shape", choices=["ball", "box", "annulus"])
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--inner", type=float, default=0.5)
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--spacing", type=float, default=1.0 / 32.0)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--h", type=float, default=0.0)
    sp.add_argument("--width", type=int, default=1)
    sp.add_argument("--method", default="inverse_power",
                    choices=["inverse_power", "flow_bisection", "shooting"])
    sp.add_argument("--c-lo", type=float, default=0.0)
    sp.add_argument("--c-hi", type=float, default=50.0)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--out", required=True)
    sp.add_argument("--figures", action="store_true")

    sp = add("verify-bound", cmd_verify_bound,
             help="certified bound across a delta refinement")
    sp.add_argument("--set", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--hR", type=float, required=True)
    sp.add_argument("--R", type=float, default=1.2)
    sp.add_argument("--deltas", required=True)
    sp.add_argument("--grid-mu", action="store_true",
                    help="also solve the grid eigenvalue near the cover")
    sp.add_argument("--out", required=True)
    sp.add_argument("--figures", action="store_true")

    sp = add("annulus", cmd_annulus, help="thin-annulus eigenvalue family")
    sp.add_argument("--eps", required=True)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--spacing", type=float, default=0.05)
    sp.add_argument("--width", type=int, default=1)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--out", required=True)

    sp = add("scale-check", cmd_scale_check,
             help="1/s^2 covariance of eigenvalue and certified bound")
    sp.add_argument("--scales", default="0.5,2")
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--hR", type=float, default=0.0)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--delta", type=float, default=0.1)
    sp.add_argument("--resolution", type=float, default=32.0)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--out", required=True)

    sp = add("report-constants", cmd_report_constants,
             help="proof constants for a parameter choice")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--hR", type=float, required=True)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--out")

    return p


def main(argv=None) -> int:
    _setup_threads()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (spectral.SpectralError, radial.ParameterError,
            radial.ProfileInvariantError, covering.CoverError,
            grid.GridError, eigen.PolicyIterationError,
            eigen.BracketError) as exc:
        print(json.dumps({"error": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
