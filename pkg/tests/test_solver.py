import numpy as np
import pytest

from tfl.operator import GridFunction, build_operator
from tfl.solver import (
    AllenCahnSpec,
    CGConfig,
    CGError,
    GrayScottSpec,
    TimeStepperState,
    cg_solve,
    circulant_preconditioner,
    cn_step,
    run_allen_cahn,
    run_gray_scott,
    solve_poisson,
)
from tfl.stencil import SchemeParams


class _ZeroReaction:
    kappas = (1.0,)

    def rates(self, fields):
        return (np.zeros_like(fields[0]),)


class TestCG:
    def test_consistency(self):
        p = SchemeParams(2, 1.0, 0.5, 16)
        op = build_operator(p)
        rng = np.random.default_rng(0)
        v = rng.standard_normal(op.shape)
        rhs = op.apply_raw(v)
        x, iters, res = cg_solve(op.apply_raw, rhs, CGConfig(rel_tol=1e-12))
        assert np.max(np.abs(x - v)) <= 1e-9 * np.max(np.abs(v))
        assert res <= 1e-12

    def test_zero_rhs(self):
        p = SchemeParams(1, 0.5, 0.5, 16)
        op = build_operator(p)
        x, iters, res = cg_solve(op.apply_raw, np.zeros(op.shape))
        assert np.all(x == 0.0)
        assert iters == 0

    def test_matches_dense_direct_solve(self):
        p = SchemeParams(1, 1.5, 0.5, 64)
        op = build_operator(p)
        rng = np.random.default_rng(1)
        rhs = rng.standard_normal(op.shape)
        direct = np.linalg.solve(op.dense_matrix(), rhs)
        x, _, _ = cg_solve(op.apply_raw, rhs, CGConfig(rel_tol=1e-13))
        assert np.max(np.abs(x - direct)) <= 1e-8 * np.max(np.abs(direct))

    def test_preconditioned_agrees(self):
        p = SchemeParams(2, 1.8, 0.5, 32)
        op = build_operator(p)
        rng = np.random.default_rng(2)
        rhs = rng.standard_normal(op.shape)
        plain, it_plain, _ = cg_solve(op.apply_raw, rhs, CGConfig(rel_tol=1e-12))
        pre, it_pre, _ = cg_solve(
            op.apply_raw, rhs, CGConfig(rel_tol=1e-12),
            precond=circulant_preconditioner(op),
        )
        assert np.max(np.abs(plain - pre)) <= 1e-8 * np.max(np.abs(plain))
        assert it_pre < it_plain

    def test_energy_error_monotone(self):
        # the A-norm of the CG error is non-increasing
        p = SchemeParams(1, 1.5, 0.5, 64)
        op = build_operator(p)
        rng = np.random.default_rng(3)
        v = rng.standard_normal(op.shape)
        rhs = op.apply_raw(v)
        energies = []

        def cb(it, x, relres):
            e = x - v
            energies.append(float(np.vdot(e, op.apply_raw(e))))

        cg_solve(op.apply_raw, rhs, CGConfig(rel_tol=1e-12), callback=cb)
        energies = np.array(energies)
        assert np.all(np.diff(energies) <= energies[:-1] * 1e-12 + 1e-14)

    def test_nonconvergence_error(self):
        p = SchemeParams(2, 1.8, 0.5, 32)
        op = build_operator(p)
        rng = np.random.default_rng(4)
        rhs = rng.standard_normal(op.shape)
        with pytest.raises(CGError) as err:
            cg_solve(op.apply_raw, rhs, CGConfig(rel_tol=1e-12, max_iter=3))
        assert err.value.iterations == 3
        assert err.value.residual > 1e-12


class TestPoisson:
    def test_zero_rhs(self):
        p = SchemeParams(2, 0.5, 0.5, 8)
        u = solve_poisson(p, GridFunction.zeros(p))
        assert np.all(u.values == 0.0)

    def test_matches_dense(self):
        p = SchemeParams(1, 1.5, 0.5, 128)
        op = build_operator(p)
        rng = np.random.default_rng(5)
        f = GridFunction(p, rng.standard_normal(op.shape))
        u = solve_poisson(p, f, CGConfig(rel_tol=1e-13), operator=op)
        direct = np.linalg.solve(op.dense_matrix(), f.values)
        assert np.max(np.abs(u.values - direct)) <= 1e-8 * np.max(np.abs(direct))

    def test_shape_mismatch(self):
        p = SchemeParams(2, 0.5, 0.5, 8)
        op = build_operator(p)
        with pytest.raises(ValueError):
            solve_poisson(SchemeParams(2, 0.5, 0.5, 16), GridFunction.zeros(p), operator=op)


class TestCNStep:
    def test_zero_reaction_richardson_ratio(self):
        # global O(dt^2): halving dt shrinks the defect by ~4
        p = SchemeParams(2, 1.5, 0.5, 32)
        op = build_operator(p)
        u0 = GridFunction.sample(p, lambda x, y: np.exp(-4.0 * (x**2 + y**2)))
        cfg = CGConfig(rel_tol=1e-13)

        def march(dt, t_end=0.8):
            s = TimeStepperState(0.0, (u0.copy(),))
            for _ in range(int(round(t_end / dt))):
                s = cn_step(op, s, dt, _ZeroReaction(), cfg)
            return s.fields[0].values

        c1, c2, c3 = march(0.2), march(0.1), march(0.05)
        ratio = np.linalg.norm(c1 - c2) / np.linalg.norm(c2 - c3)
        assert 3.5 <= ratio <= 4.5

    def test_zero_reaction_dissipates(self):
        p = SchemeParams(2, 1.5, 0.5, 16)
        op = build_operator(p)
        s = TimeStepperState(0.0, (GridFunction.sample(p, lambda x, y: x * np.exp(-y**2)),))
        for _ in range(5):
            nxt = cn_step(op, s, 0.1, _ZeroReaction())
            assert np.linalg.norm(nxt.fields[0].values) <= np.linalg.norm(s.fields[0].values)
            s = nxt

    def test_gray_scott_trivial_fixed_point(self):
        p = SchemeParams(2, 1.8, 5.0, 16, domain=((0.0, 2.5), (0.0, 2.5)))
        op = build_operator(p)
        zero = GridFunction.zeros(p)
        s = TimeStepperState(0.0, (zero.copy(), zero.copy()))
        s = cn_step((op, op), s, 0.5, GrayScottSpec())
        assert np.all(s.fields[0].values == 0.0)
        assert np.all(s.fields[1].values == 0.0)

    def test_allen_cahn_equilibrium(self):
        p = SchemeParams(2, 1.9, 0.2, 16, domain=((0.0, 1.0), (0.0, 1.0)))
        op = build_operator(p)
        s = TimeStepperState(0.0, (GridFunction.zeros(p),))
        s = cn_step(op, s, 0.01, AllenCahnSpec(0.03, p.alpha))
        assert np.all(s.fields[0].values == 0.0)

    def test_dt_validation(self):
        p = SchemeParams(1, 0.5, 0.5, 8)
        op = build_operator(p)
        s = TimeStepperState(0.0, (GridFunction.zeros(p),))
        with pytest.raises(ValueError):
            cn_step(op, s, 0.0, _ZeroReaction())


class TestRuns:
    def test_allen_cahn_symmetry_preserved(self):
        # initial data symmetric under (x, y) -> (y, x) stays symmetric
        p = SchemeParams(2, 1.9, 0.2, 64, domain=((0.0, 1.0), (0.0, 1.0)))
        snaps = run_allen_cahn(p, 0.03, 5e-4, 10 * 5e-4, [10 * 5e-4])
        u = snaps[0][1][0].values
        assert np.max(np.abs(u - u.T)) <= 1e-8

    def test_allen_cahn_amplitude_bound(self):
        p = SchemeParams(2, 1.9, 0.2, 64, domain=((0.0, 1.0), (0.0, 1.0)))
        snaps = run_allen_cahn(p, 0.03, 5e-4, 0.05, [0.01, 0.03, 0.05])
        for _, (u,) in snaps:
            assert np.max(np.abs(u.values)) <= 1.05

    def test_gray_scott_unperturbed_stays_trivial(self):
        p = SchemeParams(2, 1.8, 5.0, 32, domain=((0.0, 2.5), (0.0, 2.5)))
        snaps = run_gray_scott(p, 0.5, 50.0, [50.0], perturb_box=None)
        u, v = snaps[0][1]
        assert np.max(np.abs(u.values - 1.0)) <= 1e-10
        assert np.max(np.abs(v.values)) <= 1e-10

    def test_gray_scott_mirror_symmetry(self):
        p = SchemeParams(2, 1.8, 5.0, 64, domain=((0.0, 2.5), (0.0, 2.5)))
        snaps = run_gray_scott(p, 0.5, 5.0, [5.0], perturb_box=((1.201, 1.299),) * 2)
        u, v = snaps[0][1]
        for f in (u.values, v.values):
            assert np.max(np.abs(f - f.T)) <= 1e-8
