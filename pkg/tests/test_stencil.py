import math

import numpy as np
import pytest

from tfl.quadrature import Box, WeightSpec, box_weight_integral
from tfl.special import upper_incomplete_gamma
from tfl.stencil import SchemeParams, build_stencil

from oracles import oracle_stencil_1d, oracle_stencil_nd


class TestSchemeParams:
    def test_mesh_and_counts(self):
        p = SchemeParams(2, 0.5, 0.5, 8, domain=((-1.0, 1.0), (-0.5, 0.5)))
        assert p.L == 2.0
        assert p.h == 0.25
        assert p.counts == (8, 4)
        assert p.interior_dims == (7, 3)

    def test_default_domain(self):
        p = SchemeParams(3, 0.5, 0.0, 4)
        assert p.domain == (((-1.0, 1.0),) * 3)

    def test_validation(self):
        with pytest.raises(ValueError):
            SchemeParams(1, 0.5, 0.0, 1)
        with pytest.raises(ValueError):
            SchemeParams(1, 0.5, 0.0, 8, gamma=0.4)
        with pytest.raises(ValueError):
            SchemeParams(2, 0.5, 0.0, 8, domain=((0.0, 1.0),))


class TestStencil1D:
    def test_power_law_closed_forms(self):
        # alpha=1, lam=0, gamma=2, h=1: nu=1 so every integrand is 1
        p = SchemeParams(1, 1.0, 0.0, 4, domain=((-2.0, 2.0),))
        st = build_stencil(p)
        assert st.offdiag[1] == pytest.approx(1.5, rel=1e-14)
        assert st.offdiag[2] == pytest.approx(0.25, rel=1e-14)
        assert st.offdiag[3] == pytest.approx(1.0 / 9.0, rel=1e-14)
        # boundary entry integrates only up to L
        assert st.offdiag[4] == pytest.approx(1.0 / 32.0, rel=1e-14)

    def test_center_row_sum_identity(self):
        # a_0 + 2 sum a_n = -2 lam^alpha * Gamma(-alpha, lam L) for lam > 0
        p = SchemeParams(1, 0.5, 0.5, 64)
        st = build_stencil(p)
        lhs = st.center + 2.0 * math.fsum(st.offdiag[1:])
        rhs = -2.0 * 0.5**0.5 * upper_incomplete_gamma(-0.5, 0.5 * p.L)
        assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_signs_and_decay(self):
        st = build_stencil(SchemeParams(1, 0.5, 0.5, 64))
        assert (st.offdiag[1:] > 0).all()
        assert st.center < 0
        diffs = np.diff(st.offdiag[2:])  # strictly decreasing from m = 2
        assert (diffs < 0).all()

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    @pytest.mark.parametrize("lam", [0.0, 0.5, 5.0])
    def test_matches_oracle(self, alpha, lam):
        p = SchemeParams(1, alpha, lam, 32)
        st = build_stencil(p)
        ref = oracle_stencil_1d(p)
        np.testing.assert_allclose(st.kernel(), ref, rtol=1e-12)

    def test_lambda0_power_rule_reduction(self):
        # lam = 0 entries equal the closed-form power-law coefficients
        p = SchemeParams(1, 0.7, 0.0, 32)
        st = build_stencil(p)
        nu, gamma, h = p.gamma - p.alpha, p.gamma, p.h
        for m in range(2, p.N):
            expect = (((m + 1) * h) ** nu - ((m - 1) * h) ** nu) / (
                nu * 2.0 * m**gamma * h**gamma
            )
            assert st.offdiag[m] == pytest.approx(expect, rel=1e-12)

    def test_dilation_scaling(self):
        # doubling L and h at fixed N and lam = 0 scales entries by 2^-alpha
        alpha = 0.6
        st1 = build_stencil(SchemeParams(1, alpha, 0.0, 16, domain=((-1.0, 1.0),)))
        st2 = build_stencil(SchemeParams(1, alpha, 0.0, 16, domain=((-2.0, 2.0),)))
        np.testing.assert_allclose(st2.offdiag[1:], 2.0**-alpha * st1.offdiag[1:], rtol=1e-12)
        assert st2.center == pytest.approx(2.0**-alpha * st1.center, rel=1e-12)


class TestStencil2D:
    def test_permutation_symmetry(self):
        st = build_stencil(SchemeParams(2, 0.5, 0.5, 8))
        np.testing.assert_allclose(st.offdiag, st.offdiag.T, rtol=1e-13)

    def test_entry_against_brute_force(self):
        # nested adaptive quadrature of the defining integral for a_12
        p = SchemeParams(2, 0.5, 0.5, 8)
        st = build_stencil(p)
        h, expo = p.h, p.gamma - 2.0 - p.alpha
        T = box_ref_entry(2, (1, 2), p.N, h, expo, p.lam)
        I00 = box_ref_entry(2, (0, 0), p.N, h, expo, p.lam, element=True)
        xi = h * math.hypot(1.0, 2.0)
        oracle = 1.0 / (4.0 * xi**2) * (T + 0.0 * I00)  # cbar_12 = 0
        assert st.offdiag[1, 2] == pytest.approx(oracle, rel=1e-9)

    def test_gamma_below_two_drops_corrections(self):
        # floor(gamma/2) = 0, so a_11 is the pure T-region term
        p = SchemeParams(2, 0.5, 0.5, 8, gamma=1.8)
        st = build_stencil(p)
        spec = WeightSpec(2, p.alpha, p.gamma, p.lam)
        h = p.h
        T = box_weight_integral(spec, Box((0.0, 0.0), (2 * h, 2 * h)))
        expect = T / (4.0 * (h * math.sqrt(2.0)) ** 1.8)
        assert st.offdiag[1, 1] == pytest.approx(expect, rel=1e-11)

    def test_full_oracle_small(self):
        p = SchemeParams(2, 1.5, 0.5, 6)
        kern = build_stencil(p).kernel()
        ref = oracle_stencil_nd(p)
        np.testing.assert_allclose(kern, ref, rtol=1e-9)

    def test_center_recomputation(self):
        st = build_stencil(SchemeParams(2, 0.5, 0.5, 8))
        from tfl.quadrature import exterior_integral

        a = st.offdiag
        expect = (
            -2.0 * (math.fsum(a[1:, 0]) + math.fsum(a[0, 1:]))
            - 4.0 * math.fsum(a[1:, 1:].ravel())
            - 4.0 * exterior_integral(2, st.params.L, st.params.alpha, st.params.lam)
        )
        assert st.center == pytest.approx(expect, rel=1e-13)


class TestStencil3D:
    def test_permutation_symmetry(self):
        st = build_stencil(SchemeParams(3, 1.5, 0.5, 4))
        a = st.offdiag
        np.testing.assert_allclose(a, a.transpose(1, 0, 2), rtol=1e-13)
        np.testing.assert_allclose(a, a.transpose(2, 1, 0), rtol=1e-13)

    def test_entry_against_brute_force(self):
        p = SchemeParams(3, 1.5, 0.5, 4)
        st = build_stencil(p)
        ref = oracle_stencil_nd(p)
        assert st.offdiag[1, 1, 1] == pytest.approx(ref[1, 1, 1], rel=1e-8)

    def test_single_zero_index_correction_sign(self):
        # sigma = 2 entries add (5/3) of the origin-element integral
        p = SchemeParams(3, 1.5, 0.5, 4)
        st = build_stencil(p)
        spec = p.weight_spec()
        h = p.h
        T = box_weight_integral(spec, Box((0.0, 0.0, 0.0), (2 * h, h, h)))
        I0 = box_weight_integral(spec, Box((0.0,) * 3, (h,) * 3))
        expect = 4.0 / (8.0 * h**2) * (T + (5.0 / 3.0) * I0)
        assert st.offdiag[1, 0, 0] == pytest.approx(expect, rel=1e-11)
        assert st.offdiag[1, 0, 0] > 4.0 / (8.0 * h**2) * T


def box_ref_entry(d, k, N, h, expo, lam, element=False):
    """T-region (or single-element) integral via the test-side oracle."""
    from oracles import box_ref

    if element:
        lo = tuple(i * h for i in k)
        hi = tuple((i + 1) * h for i in k)
    else:
        lo = tuple(max(i - 1, 0) * h for i in k)
        hi = tuple(min(i + 1, N) * h for i in k)
    return box_ref(lo, hi, expo, lam, 1e-11)
