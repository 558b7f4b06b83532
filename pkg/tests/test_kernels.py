"""Closed-form and adaptive-quadrature oracles for the integral operators."""

import math

import numpy as np
import pytest
import torch
from scipy import integrate

from tfpide.kernels import (
    KernelDescriptor,
    fredholm_quadratic_probe,
    fredholm_quadratic_st,
    fredholm_weak_singular,
    fredholm_weak_singular_split,
    volterra_double_exp,
    volterra_double_probe,
    volterra_quadruple_3d,
    volterra_quadruple_probe,
    weak_singular_time_factor_tensors,
)
from tfpide.model import build_model, evaluate


@pytest.fixture(scope="module")
def fredholm_model():
    return build_model(
        domain=[(-np.pi / 2, np.pi / 2)], horizon=1.0, rank=4, seed=10, mu=0.6, hidden=(10, 10)
    )


@pytest.fixture(scope="module")
def unit_model():
    return build_model(domain=[(0.0, 1.0)], horizon=1.0, rank=4, seed=11, mu=0.5, hidden=(10, 10))


@pytest.fixture(scope="module")
def model3d():
    return build_model(
        domain=[(0.0, np.pi)] * 3, horizon=1.0, rank=3, seed=12, mu=1.3, hidden=(8, 8)
    )


class TestKernelDescriptor:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            KernelDescriptor("fredholm_cubic")

    def test_bad_sizes_rejected(self):
        with pytest.raises(ValueError):
            KernelDescriptor("none", subintervals=0)


class TestFredholmQuadratic:
    def test_zero_coefficients(self, fredholm_model):
        saved = fredholm_model.c.clone()
        try:
            fredholm_model.set_c(np.zeros(fredholm_model.rank))
            out = fredholm_quadratic_st(fredholm_model, np.array([0.3]), np.array([0.5]))
            assert np.all(out == 0.0)
        finally:
            fredholm_model.c = saved

    def test_odd_probe_vanishes(self):
        out = fredholm_quadratic_probe(
            lambda s, t: t * np.cos(s), np.array([0.2]), np.array([0.7])
        )
        assert np.max(np.abs(out)) < 1e-14
        out = fredholm_quadratic_probe(lambda s, t: t * s, np.array([0.2]), np.array([0.7]))
        assert np.max(np.abs(out)) < 1e-14

    def test_shifted_probe_against_adaptive(self):
        xs = np.array([-0.9, 0.0, 0.4])
        ts = np.array([0.3, 1.0])
        got = fredholm_quadratic_probe(lambda s, t: t * (s + np.pi / 2), xs, ts)
        for qi, x in enumerate(xs):
            for ri, t in enumerate(ts):
                ref, _ = integrate.quad(
                    lambda s: s * t * (t * (s + np.pi / 2)) ** 2, -np.pi / 2, np.pi / 2
                )
                ref *= 0.5 * np.cos(x)
                assert got[qi, ri] == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_model_form_matches_probe_form(self, fredholm_model):
        xs = np.array([-1.0, 0.1, 1.2])
        ts = np.array([0.25, 0.8])
        got = fredholm_quadratic_st(fredholm_model, xs, ts)

        def u(s, t):
            pts = [(np.array([sv]), tv) for sv, tv in zip(np.broadcast_to(s, np.broadcast_shapes(s.shape, t.shape)).ravel(), np.broadcast_to(t, np.broadcast_shapes(s.shape, t.shape)).ravel())]
            return evaluate(fredholm_model, pts).reshape(np.broadcast_shapes(s.shape, t.shape))

        want = fredholm_quadratic_probe(u, xs, ts)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-13)


class TestWeakSingular:
    def test_zero_probe(self):
        out = fredholm_weak_singular(lambda s: np.zeros_like(s), 0.5, np.array([0.3, 0.7]))
        assert np.all(out == 0.0)

    def test_linear_moment_closed_form(self):
        # mu=1, q=1: int |t-s|^(-1/2) s ds = 4/3 t^(3/2) + 2t sqrt(1-t) + 2/3 (1-t)^(3/2)
        t = 0.25
        got = fredholm_weak_singular(lambda s: np.ones_like(s), 1.0, np.array([t]))
        want = 4.0 / 3.0 * t**1.5 + 2.0 * t * math.sqrt(1 - t) + 2.0 / 3.0 * (1 - t) ** 1.5
        assert got[0] == pytest.approx(want, rel=1e-12)
        assert got[0] == pytest.approx(1.032692, abs=5e-7)

    def test_flat_kernel_closed_form(self):
        got = fredholm_weak_singular(lambda s: np.ones_like(s), 0.0, np.array([0.5]))
        assert got[0] == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-12)

    def test_adaptive_oracle_smooth_probe(self):
        mu = 0.7
        probe = lambda s: np.exp(s) * (1 + s)
        ts = np.array([0.15, 0.4, 0.65, 0.9])
        got = fredholm_weak_singular(probe, mu, ts)
        for t, g in zip(ts, got):
            ref, _ = integrate.quad(
                lambda s: abs(t - s) ** -0.5 * s**mu * np.exp(s) * (1 + s),
                0.0,
                1.0,
                points=[t],
                limit=200,
            )
            assert g == pytest.approx(ref, rel=1e-9)

    def test_split_parts_nonnegative_for_nonnegative_probe(self):
        left, right = fredholm_weak_singular_split(
            lambda s: 1.0 + s**2, 0.3, np.array([0.2, 0.5, 0.8])
        )
        assert np.all(left >= 0.0) and np.all(right >= 0.0)

    def test_model_tensor_form_matches_probe(self, unit_model):
        from tfpide.nets import forward_jet_batch

        ts = np.array([0.3, 0.6])
        with torch.no_grad():
            got = weak_singular_time_factor_tensors(unit_model, torch.tensor(ts)).numpy()
        rule = unit_model.norm_rules[-1]
        vals = np.stack([j.value for j in forward_jet_batch(unit_model.temporal_subnet, rule.nodes)])
        norms = np.sqrt(rule.weights @ vals**2)
        for j in range(unit_model.rank):

            def probe(s, j=j):
                flat = np.asarray(s, dtype=float).ravel()
                jets = forward_jet_batch(unit_model.temporal_subnet, flat)
                return (np.array([jet.value[j] for jet in jets]) / norms[j]).reshape(np.shape(s))

            want = fredholm_weak_singular(probe, unit_model.mu, ts)
            assert got[:, j] == pytest.approx(want, rel=1e-10, abs=1e-12)


class TestVolterraDouble:
    def test_zero_coefficients(self, unit_model):
        saved = unit_model.c.clone()
        try:
            unit_model.set_c(np.zeros(unit_model.rank))
            out = volterra_double_exp(unit_model, np.array([0.5]), np.array([0.5]))
            assert np.all(out == 0.0)
        finally:
            unit_model.c = saved

    def test_constant_probe_closed_form(self):
        got = volterra_double_probe(lambda s, tau: np.ones(np.broadcast_shapes(s.shape, tau.shape)), np.array([1.0]), np.array([1.0]))
        want = 0.5 * (math.e - 1.0)
        assert got[0, 0] == pytest.approx(want, rel=1e-12)
        assert got[0, 0] == pytest.approx(0.8591409142295225, rel=1e-6)

    def test_bilinear_probe_closed_form(self):
        got = volterra_double_probe(lambda s, tau: s * tau, np.array([1.0]), np.array([1.0]))
        want = (math.e - 2.0) / 3.0
        assert got[0, 0] == pytest.approx(want, rel=1e-12)

    def test_adaptive_oracle(self):
        x, t = 0.8, 0.6
        got = volterra_double_probe(lambda s, tau: np.cos(s) + tau, np.array([x]), np.array([t]))
        ref, _ = integrate.dblquad(
            lambda s, tau: tau * np.exp(x - s) * (np.cos(s) + tau), 0, t, 0, x
        )
        assert got[0, 0] == pytest.approx(ref, rel=1e-9)

    def test_model_form_matches_probe_form(self, unit_model):
        xs = np.array([0.3, 0.9])
        ts = np.array([0.4, 1.0])
        got = volterra_double_exp(unit_model, xs, ts)

        def u(s, tau):
            shape = np.broadcast_shapes(s.shape, tau.shape)
            sv = np.broadcast_to(s, shape).ravel()
            tv = np.broadcast_to(tau, shape).ravel()
            return evaluate(unit_model, [(np.array([a]), b) for a, b in zip(sv, tv)]).reshape(shape)

        want = volterra_double_probe(u, xs, ts)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


class TestVolterraQuadruple:
    def test_zero_coefficients(self, model3d):
        saved = model3d.c.clone()
        try:
            model3d.set_c(np.zeros(model3d.rank))
            out = volterra_quadruple_3d(
                model3d, [np.array([1.0]), np.array([0.5]), np.array([1.0])], np.array([1.0])
            )
            assert np.all(out == 0.0)
        finally:
            model3d.c = saved

    def test_constant_probe_closed_form(self):
        got = volterra_quadruple_probe(
            lambda p, q, s, tau: np.ones_like(p), np.array([1.0, 0.5, 1.0]), 1.0
        )
        assert got == pytest.approx(0.0625, rel=1e-12)

    def test_antisymmetric_kernel_vanishes_for_equal_limits(self):
        got = volterra_quadruple_probe(
            lambda p, q, s, tau: np.ones_like(p), np.array([0.7, 0.7, 1.0]), 0.9
        )
        assert abs(got) < 1e-15

    def test_separable_probe_closed_form(self):
        x1, x2, x3, t = 0.9, 0.4, 1.1, 0.8
        got = volterra_quadruple_probe(lambda p, q, s, tau: p * q * s * tau, np.array([x1, x2, x3]), t)
        want = (
            (t**3 / 3.0)
            * (x3**2 / 2.0)
            * ((x1**3 / 3.0) * (x2**2 / 2.0) - (x1**2 / 2.0) * (x2**3 / 3.0))
        )
        assert got == pytest.approx(want, rel=1e-12)

    def test_model_form_matches_probe_form(self, model3d):
        # same (small) rule sizes on both sides so the quadratures coincide
        axes = [np.array([2.0, 2.8]), np.array([1.1]), np.array([2.5])]
        ts = np.array([0.7])
        with torch.no_grad():
            from tfpide.kernels import volterra_quadruple_factors

            fac = volterra_quadruple_factors(
                model3d,
                [torch.tensor(a) for a in axes],
                torch.tensor(ts),
                subintervals=2,
                points_per=4,
            )
            cg = fac["G"] * model3d.c[None, :]
            got = (
                torch.einsum("aj,bj,cj,tj->abct", fac["A1"], fac["B2"], fac["F3"], cg)
                - torch.einsum("aj,bj,cj,tj->abct", fac["C1"], fac["E2"], fac["F3"], cg)
            ).numpy()

        def u(p, q, s, tau):
            shape = p.shape
            pts = [
                (np.array([a, b, c]), d)
                for a, b, c, d in zip(p.ravel(), q.ravel(), s.ravel(), tau.ravel())
            ]
            return evaluate(model3d, pts).reshape(shape)

        for ai, a in enumerate(axes[0]):
            want = volterra_quadruple_probe(
                u, np.array([a, axes[1][0], axes[2][0]]), float(ts[0]), subintervals=2, points_per=4
            )
            assert got[ai, 0, 0, 0] == pytest.approx(want, rel=1e-9, abs=1e-12)
