import numpy as np
import pytest

from semilab.asymptotics import fk_kernel
from semilab.stochastic import BLOCK, seed_ks_check, simulate_fk, verify_kernel


def test_no_killing_no_exit_is_one():
    est = simulate_fk(None, 1.0, None, [0.0], 1.0, None, 1e-2, 4000, seed=1)
    assert est.mean == 1.0 and est.se == 0.0


def test_matches_closed_form():
    lam, mu, x, t = 1.0, 0.5, 0.5, 0.5
    kill = lambda X: lam * (X[:, 0] ** 2 + mu * X[:, 0])
    est = simulate_fk(None, 1.0, kill, [x], t, None, 1e-3, 40_000, seed=3)
    assert abs(est.mean - fk_kernel(lam, mu, x, t)) < 3 * est.se


def test_se_scales_with_paths():
    kill = lambda X: X[:, 0] ** 2
    a = simulate_fk(None, 1.0, kill, [0.3], 0.5, None, 5e-3, 20_000, seed=5)
    b = simulate_fk(None, 1.0, kill, [0.3], 0.5, None, 5e-3, 40_000, seed=6)
    assert a.se / b.se == pytest.approx(np.sqrt(2), rel=0.05)


def test_ball_monotonicity():
    vals = [simulate_fk(None, 1.0, None, [0.0], 0.5, ([0.0], r), 5e-3, 10_000, seed=2).mean
            for r in (2.0, 1.0, 0.5)]
    assert vals[0] >= vals[1] >= vals[2]
    assert vals[2] < 0.5


def test_reproducible_across_workers():
    kill = lambda X: X[:, 0] ** 2
    n = 2 * BLOCK + 100
    a = simulate_fk(None, 1.0, kill, [0.1], 0.2, None, 2e-3, n, seed=9, workers=1)
    b = simulate_fk(None, 1.0, kill, [0.1], 0.2, None, 2e-3, n, seed=9, workers=3)
    assert a.mean == b.mean and a.se == b.se


def test_argument_checks():
    with pytest.raises(ValueError, match="dt"):
        simulate_fk(None, 1.0, None, [0.0], 0.1, dt=0.01)
    with pytest.raises(ValueError, match="n_paths"):
        simulate_fk(None, 1.0, None, [0.0], 1.0, n_paths=10)


def test_coupled_halving_is_tight():
    kill = lambda X: X[:, 0] ** 2 + 0.5 * X[:, 0]
    fine, coarse = simulate_fk(None, 1.0, kill, [0.0], 0.5, None, 5e-4, 20_000, seed=4, coupled=True)
    assert coarse.dt == 2 * fine.dt
    assert abs(fine.mean - coarse.mean) < coarse.se


def test_verify_kernel_small_grid():
    tab = verify_kernel(0.5, 0.0, [0.0], [0.01, 1.0], n_paths=20_000, seed=11)
    assert tab.rows[0].mc_mean == pytest.approx(1.0, abs=0.01)
    assert tab.rows[1].closed_form == pytest.approx(1 / np.sqrt(np.cosh(1.0)))
    assert tab.max_abs_z <= 3
    assert tab.max_halving_shift < 1


def test_ks_across_seeds():
    assert seed_ks_check(1.0, 0.5, 0.0, 0.25, range(10), n_paths=5000, dt=2.5e-3) > 0.01
