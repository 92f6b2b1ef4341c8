import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wardrop_logit.dynamics import (
    LogitParams,
    contraction_certificate,
    contraction_pair_test,
    integrate,
    jacobian_aggregate,
    jacobian_aggregate_fd,
    logit_choice,
    rhs_aggregate_simple,
    rhs_route,
    write_trajectory_csv,
)
from wardrop_logit.errors import ContractionViolated, NonFinite, NotSimple
from wardrop_logit.game import Population, RoutingGame, collapse_to_parallel, random_state
from wardrop_logit.graph import RoutingMultigraph

finite_costs = arrays(np.float64, st.integers(1, 6), elements=st.floats(-1e3, 1e3))


class TestLogitChoice:
    def test_zero_eta_uniform(self):
        np.testing.assert_allclose(logit_choice([3.0, -7.0], 0.0, 1.0), [0.5, 0.5])

    def test_equal_costs(self):
        np.testing.assert_allclose(logit_choice([2.0, 2.0], 123.0, 1.0), [0.5, 0.5])

    def test_huge_eta_no_overflow(self):
        out = logit_choice([1.0, 1.0 + 1e-3, 50.0], 1e9, 2.0)
        assert np.all(np.isfinite(out))
        np.testing.assert_array_equal(out, [2.0, 0.0, 0.0])

    def test_rows(self):
        out = logit_choice([[0.0, 0.0], [0.0, math.log(3.0)]], 1.0, [2.0, 4.0])
        np.testing.assert_allclose(out, [[1.0, 1.0], [3.0, 1.0]])

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            logit_choice([1.0, np.inf], 1.0)

    @settings(max_examples=200, deadline=None)
    @given(finite_costs, st.floats(0, 100), st.floats(0, 1e3))
    def test_normalized(self, c, eta, tau):
        out = logit_choice(c, eta, tau)
        assert (out >= 0).all()
        assert out.sum() == pytest.approx(tau, rel=1e-12, abs=1e-300)

    @settings(max_examples=200, deadline=None)
    @given(finite_costs, st.floats(0, 10), st.floats(-1e3, 1e3))
    def test_shift_invariant(self, c, eta, k):
        np.testing.assert_allclose(logit_choice(c + k, eta), logit_choice(c, eta), rtol=1e-9, atol=1e-12)


class TestRouteField:
    def test_zero_eta(self, ex2):
        z = random_state(ex2, 4)
        np.testing.assert_allclose(rhs_route(ex2, z, 0.0), ex2.tau[:, None] / 4 - z)

    def test_example1_hand_values(self, ex1):
        # both populations on edge 1: f = (2, 0), pop1 costs (3, 0)
        dz = rhs_route(ex1, [[1, 0], [1, 0]], 1.0)
        assert dz[0, 0] == pytest.approx(math.exp(-3) / (math.exp(-3) + 1) - 1)
        # split populations: f = (1, 1), pop1 costs (2, 2)
        dz = rhs_route(ex1, [[1, 0], [0, 1]], 1.0)
        assert dz[0, 0] == pytest.approx(-0.5)

    def test_fixed_point_zero(self, ex1):
        np.testing.assert_allclose(rhs_route(ex1, [[0.5, 0.5], [0.5, 0.5]], 7.0), 0.0, atol=1e-15)


class TestAggregateField:
    def test_sum_identity(self, ex3):
        rng = np.random.default_rng(0)
        for _ in range(20):
            f = rng.uniform(0, 10, 3)
            assert rhs_aggregate_simple(ex3, f, 2.0).sum() == pytest.approx(10.0 - f.sum())

    def test_zero_eta_uniform_split(self, ex1):
        np.testing.assert_allclose(rhs_aggregate_simple(ex1, [0.0, 0.0], 0.0), [1.0, 1.0])

    def test_residual_vanishes_at_uniform_point(self, ex1):
        for eta in (1.0, 10.0, 100.0):
            np.testing.assert_allclose(rhs_aggregate_simple(ex1, [1.0, 1.0], eta), 0.0, atol=1e-14)

    def test_not_simple(self, ex2):
        with pytest.raises(NotSimple):
            rhs_aggregate_simple(ex2, np.zeros(4), 1.0)

    def test_matches_route_field(self, ex3):
        pg = collapse_to_parallel(ex3)
        z = random_state(pg, 9)
        np.testing.assert_allclose(rhs_aggregate_simple(ex3, z.sum(axis=0), 2.0), rhs_route(pg, z, 2.0).sum(axis=0))


def _single_route_game(tau=2.0):
    g = RoutingMultigraph(["o", "d"], [("e1", "o", "d")], "o", "d")
    return RoutingGame(g, [Population("p", tau, {"e1": [1, 3]})])


class TestIntegrate:
    def test_single_route_closed_form(self):
        game = _single_route_game()
        traj = integrate(game, [[0.5]], LogitParams(eta=3.0, step=0.01, horizon=5.0))
        assert traj.times[-1] == pytest.approx(5.0)
        exact = 2.0 + (0.5 - 2.0) * math.exp(-5.0)
        assert traj.final[0, 0] == pytest.approx(exact, abs=1e-6)

    def test_uniform_spacing(self, ex1):
        traj = integrate(ex1, [[1, 0], [0, 1]], LogitParams(eta=5, horizon=1.0))
        assert traj.times[0] == 0.0
        np.testing.assert_allclose(np.diff(traj.times), 0.01)
        assert len(traj) == 101

    def test_example1_converges_to_half(self, ex1):
        traj = integrate(ex1, [[1, 0], [0, 1]], LogitParams(eta=5.0))
        np.testing.assert_allclose(traj.final, 0.5, atol=1e-6)

    def test_conservation_example3(self, ex3):
        traj = integrate(ex3, random_state(ex3, 11), LogitParams(eta=2.0, horizon=20.0))
        sums = traj.states.sum(axis=2)
        assert np.abs(sums - 5.0).max() < 1e-8 * 5.0
        assert traj.states.min() >= -1e-9

    def test_aggregate_mode_matches_general(self, ex3):
        z0 = random_state(ex3, 2)
        params = LogitParams(eta=2.0, horizon=5.0)
        agg = integrate(ex3, z0, params, which="aggregate")
        gen = integrate(collapse_to_parallel(ex3), z0, params)
        np.testing.assert_allclose(agg.states, gen.states.sum(axis=1), atol=1e-12)

    def test_stop_at_rest(self, ex1):
        traj = integrate(ex1, [[0.5, 0.5], [0.5, 0.5]], LogitParams(eta=5), stop_at_rest=True)
        assert traj.converged and len(traj) == 10

    def test_params_validation(self):
        with pytest.raises(ValueError):
            LogitParams(eta=-1)
        with pytest.raises(ValueError):
            LogitParams(step=0.1, horizon=0.01)


def _fd_oracle(game, f, eta, h=1e-6):
    """Independent central differences through the public field."""
    f = np.asarray(f, dtype=float)
    cols = []
    for j in range(len(f)):
        e = np.zeros_like(f)
        e[j] = h
        cols.append((rhs_aggregate_simple(game, f + e, eta) - rhs_aggregate_simple(game, f - e, eta)) / (2 * h))
    return np.stack(cols, axis=1)


class TestJacobian:
    def test_zero_eta_minus_identity(self, ex3):
        np.testing.assert_array_equal(jacobian_aggregate(ex3, [1.0, 2.0, 3.0], 0.0), -np.eye(3))

    @pytest.mark.parametrize("eta", [0.5, 2.0, 5.0])
    def test_column_sums_and_metzler(self, ex1, ex3, eta):
        rng = np.random.default_rng(int(eta * 10))
        for game in (ex1, ex3):
            n = 2 if game is ex1 else 3
            for _ in range(20):
                J = jacobian_aggregate(game, rng.uniform(0.1, game.total_throughput, n), eta)
                np.testing.assert_allclose(J.sum(axis=0), -1.0, atol=1e-8)
                assert J[~np.eye(n, dtype=bool)].min() >= -1e-10

    def test_against_finite_differences(self, ex3):
        rng = np.random.default_rng(7)
        for _ in range(20):
            f = rng.uniform(0.5, 9.5, 3)
            J = jacobian_aggregate(ex3, f, 2.0)
            assert np.abs(J - _fd_oracle(ex3, f, 2.0)).max() < 1e-4
            assert np.abs(J - jacobian_aggregate_fd(ex3, f, 2.0)).max() < 1e-4


class TestCertificate:
    def test_example1(self, ex1):
        cert = contraction_certificate(ex1, 5.0)
        assert cert.metzler_ok and cert.max_column_sum_error < 1e-8

    def test_example3(self, ex3):
        assert contraction_certificate(ex3, 2.0).metzler_ok

    def test_zero_eta(self, series):
        from wardrop_logit.graph import series_decompose

        part = series.restrict(series_decompose(series.graph)[1])
        cert = contraction_certificate(part, 0.0)
        assert cert.holds() and cert.min_offdiag == 0.0

    def test_explicit_points(self, ex1):
        cert = contraction_certificate(ex1, 1.0, sample_points=[[0.0, 0.0], [2.0, 0.0]])
        assert cert.n_points == 2

    def test_not_simple(self, ex2):
        with pytest.raises(NotSimple):
            contraction_certificate(ex2, 1.0)


class TestPairContraction:
    def test_identical(self, ex3):
        z = random_state(ex3, 1)
        rep = contraction_pair_test(ex3, z, z, LogitParams(eta=2.0, horizon=5.0))
        assert not rep.distances.any()

    def test_example1(self, ex1):
        rep = contraction_pair_test(ex1, [[1, 0], [1, 0]], [[0, 1], [0, 1]], LogitParams(eta=5.0, horizon=10.0))
        assert (rep.distances <= rep.bounds).all()

    def test_violation_reported(self, ex1, monkeypatch):
        # a field that pushes trajectories apart must trip the check
        import wardrop_logit.dynamics as dyn

        monkeypatch.setattr(dyn, "_route_field", lambda game, z, eta: z - game.tau[:, None] / game.R)
        with pytest.raises(ContractionViolated) as info:
            contraction_pair_test(ex1, [[1, 0], [1, 0]], [[0, 1], [0, 1]], LogitParams(eta=1.0, horizon=1.0))
        assert info.value.time > 0


def test_trajectory_csv(ex3):
    traj = integrate(ex3, random_state(ex3, 0), LogitParams(eta=2.0, horizon=0.05))
    buf = io.StringIO()
    write_trajectory_csv(ex3, traj, buf)
    lines = buf.getvalue().split("\n")
    assert lines[0] == (
        "t,z[p=1][r=0],z[p=1][r=1],z[p=1][r=2],z[p=2][r=0],z[p=2][r=1],z[p=2][r=2],"
        "f[e=e1],f[e=e2],f[e=e3],f[e=e4]"
    )
    assert len(lines) == len(traj) + 2 and lines[-1] == ""
    row = [float(x) for x in lines[1].split(",")]
    assert row[7] == pytest.approx(row[1] + row[4])
    assert row[8] == row[10]
