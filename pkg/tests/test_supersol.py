"""Supersolution assembly, constants, and strictness verification."""

import math

import numpy as np
import pytest

from trunclap.covering import BallCover, CoverError, gauge_for_k, greedy_cover, segment_sample
from trunclap.radial import BarrierParams, CutoffS, ParameterError
from trunclap.supersol import (
    assemble_supersolution,
    c1_constant,
    eigen_lower_bound,
    verify_strict_supersolution,
)


def small_certificate(k=2, h=0.0, R=1.0, delta=0.12, gap=None):
    gap = gap or delta / 10
    E = segment_sample([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], gap=gap)
    cover = greedy_cover(E, delta)
    return assemble_supersolution(cover, BarrierParams(k, h, R),
                                  n_core=600, n_tail=600), E


class TestConstants:
    def test_c1_hand_formulas(self):
        S = CutoffS()
        R = 1.0
        # k = 1, h* = 0:  C1 = 2 * (1/1) * e^0 * 1 * S_hat
        assert c1_constant(1, 0.0, R, S) == pytest.approx(2.0 * S.moment(1))
        # k = 2, h* = 0:  C0 = 2k = 4, C1 = 2 * (1/2) * 4 * S_hat
        assert c1_constant(2, 0.0, R, S) == pytest.approx(4.0 * S.moment(2))
        # k = 4, h* = 0:  C0 = k/(k-2) = 2, C1 = 2 * (1/4) * 2 * S_hat
        assert c1_constant(4, 0.0, R, S) == pytest.approx(S.moment(4))
        # drift inflates through e^{h*R} and (1 + h*R)
        hs = 0.5
        assert c1_constant(1, hs, R, S) == pytest.approx(
            2.0 * (1 + hs * R) * math.exp(hs * R) * S.moment(1))


class TestAssembly:
    def test_certificate_invariants(self):
        cert, E = small_certificate()
        assert cert.Q > 0
        assert cert.sup_w <= cert.C1 * cert.Q * (1 + 1e-9)
        assert eigen_lower_bound(cert) == pytest.approx(1.0 / (cert.C1 * cert.Q))
        # w is strictly negative on the sampled set
        assert np.max(cert.value(E.points)) < 0

    def test_rejects_oversized_radii(self):
        cover = BallCover(np.zeros((1, 2)), np.array([0.9]))  # > R/e
        with pytest.raises(CoverError):
            assemble_supersolution(cover, BarrierParams(1, 0.0, 1.0))

    def test_gradient_hessian_match_finite_differences(self):
        cert, _ = small_certificate(delta=0.2)
        x = np.array([0.37, 0.02, -0.01])
        eps = 1e-5
        g = cert.gradient([x])[0]
        H = cert.hessian([x])[0]
        for i in range(3):
            e = np.zeros(3)
            e[i] = eps
            fd = (cert.value([x + e])[0] - cert.value([x - e])[0]) / (2 * eps)
            assert fd == pytest.approx(g[i], abs=1e-6)
            fg = (cert.gradient([x + e])[0] - cert.gradient([x - e])[0]) / (2 * eps)
            assert np.max(np.abs(fg - H[i])) < 2e-5

    def test_json_contains_bound(self):
        cert, _ = small_certificate(delta=0.2)
        d = cert.to_json()
        assert d["eigen_lower"] == pytest.approx(eigen_lower_bound(cert))
        assert d["gauge"] == gauge_for_k(2, 1.0).to_json()


class TestVerification:
    def test_passes_on_sample_and_shell(self):
        cert, E = small_certificate()
        rng = np.random.default_rng(3)
        shell = E.points + rng.normal(scale=0.05, size=E.points.shape)
        # every barrier is only defined on its own ball of radius R
        dist = np.linalg.norm(
            shell[:, None] - cert.cover.centers[None], axis=-1)
        keep = np.max(dist, axis=1) < cert.params.R * 0.999
        probes = np.vstack([E.points, shell[keep]])
        rep = verify_strict_supersolution(cert, probes)
        assert rep.passed
        assert rep.min_inside >= 1.0 - 1e-6
        assert rep.min_outside >= -1e-6
        assert rep.max_w < 0

    def test_report_csv(self, tmp_path):
        cert, E = small_certificate(delta=0.2)
        rep = verify_strict_supersolution(cert, E.points[:5])
        out = tmp_path / "report.csv"
        rep.export_csv(out)
        lines = out.read_text().splitlines()
        assert lines[0].startswith("probe,")
        assert len(lines) == 6

    def test_fails_when_probes_demand_too_much(self):
        cert, E = small_certificate(delta=0.2)
        rep = verify_strict_supersolution(cert, E.points, inside_tol=-1.0)
        assert not rep.passed


class TestRefinement:
    def test_bound_grows_as_delta_shrinks(self):
        bounds = []
        for delta in (0.2, 0.1, 0.05):
            cert, _ = small_certificate(delta=delta)
            bounds.append(eigen_lower_bound(cert))
        assert bounds[0] < bounds[1] < bounds[2]
