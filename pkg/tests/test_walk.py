import numpy as np
import pytest

from rwre import rng, walk
from rwre.environment import Environment, Expl, TableMixture, UniformDrift
from rwre.hypercube import analyze
from rwre.lattice import UnitHypercube

FORWARD = TableMixture(((1.0, (1.0, 0.0, 0.0, 0.0)),))


def test_deterministic_drift_hits_target():
    env = Environment(FORWARD, 0)
    traj = walk.run(env, (0, 0), walk.StopSpec.hit({(5, 0)}, 100), 7)
    assert len(traj) == 5 and traj.terminated_by == "hit"
    assert traj.final() == (5, 0)
    assert np.array_equal(traj.positions()[:, 0], np.arange(6))


def test_horizon_validation_and_budget():
    with pytest.raises(ValueError):
        walk.StopSpec.hit({(1, 0)}, 0)
    env = Environment(FORWARD, 0)
    traj = walk.run(env, (0, 0), walk.StopSpec.hit({(9, 9)}, 1), 7)
    assert len(traj) == 1 and traj.terminated_by == "budget"


def test_exit_time_zero_when_starting_outside():
    env = Environment(FORWARD, 0)
    square = set(UnitHypercube((0, 0)).corners)
    traj = walk.run(env, (5, 5), walk.StopSpec.exit_of(square, 10), 3)
    assert len(traj) == 0 and traj.terminated_by == "exited"


def test_uniform_square_mean_exit_is_two():
    env = Environment(UniformDrift(2), 42)
    square = set(UnitHypercube((0, 0)).corners)

    def inside(X):
        return np.all((X >= 0) & (X <= 1), axis=1)

    keys = walk.walk_keys(3, 20_000)
    res = walk.run_until_batch(env, np.array([0, 0]), keys, 1000, inside=inside)
    assert res.censored() == 0
    m = res.steps_taken.mean()
    # geometric(1/2): mean 2, var 2
    assert abs(m - 2.0) < 4 * np.sqrt(2.0 / len(keys))
    assert not inside(res.final).any()
    # single-walk runner agrees with the batch semantics
    traj = walk.run(env, (0, 0), walk.StopSpec.exit_of(square, 1000), 11)
    assert traj.terminated_by == "exited" and not inside(traj.positions()[-1:])[0]


def test_first_of_stops_at_earliest_condition():
    env = Environment(FORWARD, 0)
    spec = walk.StopSpec.first_of([walk.StopSpec.hit({(2, 0)}, 50),
                                   walk.StopSpec.exit_of(lambda s: s[0] < 7, 50)])
    traj = walk.run(env, (0, 0), spec, 1)
    assert traj.terminated_by == "hit" and traj.final() == (2, 0)
    spec2 = walk.StopSpec.first_of([walk.StopSpec.hit({(99, 0)}, 50),
                                    walk.StopSpec.exit_of(lambda s: s[0] < 3, 50)])
    traj2 = walk.run(env, (0, 0), spec2, 1)
    assert traj2.terminated_by == "exited" and traj2.final() == (3, 0)


def test_reproducibility_identical_trajectories():
    env = Environment(Expl(2, 0.25), 12)
    s1 = walk.run(env, (0, 0), walk.StopSpec.hit({(50, 50)}, 5000), 9)
    s2 = walk.run(env, (0, 0), walk.StopSpec.hit({(50, 50)}, 5000), 9)
    assert np.array_equal(s1.steps, s2.steps)
    s3 = walk.run(env, (0, 0), walk.StopSpec.hit({(50, 50)}, 5000), 10)
    assert not np.array_equal(s1.steps, s3.steps)


def test_expl_projected_increments():
    # the drift projection takes a +1 step with probability 1 - eps at every site
    env = Environment(Expl(2, 0.2), 4)
    keys = walk.walk_keys(6, 50)
    res = walk.run_fixed_batch(env, np.zeros(2, dtype=np.int64), 2000, keys,
                               record_steps=True)
    ups = (res.steps < 2).mean()
    n = res.steps.size
    assert abs(ups - 0.8) < 4 * np.sqrt(0.8 * 0.2 / n)
    # no autocorrelation in the sign sequence (iid increments)
    s = (res.steps[0] < 2).astype(float)
    c = np.corrcoef(s[:-1], s[1:])[0, 1]
    assert abs(c) < 4 / np.sqrt(len(s))


def test_hit_before_return_certain_step():
    env = Environment(FORWARD, 0)
    est = walk.hit_before_return(env, (0, 0), {(1, 0)}, (0, 0), 100, 500, 5)
    assert est.p_hat == 1.0 and est.n_censored == 0


def test_hit_before_return_matches_exact_escape():
    env = Environment(UniformDrift(2), 17)
    cube = UnitHypercube((0, 0))
    targets = set()
    for c in cube.corners:
        from rwre.lattice import boundary_towards
        targets |= boundary_towards(c, set(cube.corners))
    est = walk.hit_before_return(env, (0, 0), targets, (0, 0), 2000, 40_000, 23)
    want = 6.0 / 7.0
    se = np.sqrt(want * (1 - want) / 40_000)
    assert abs(est.p_hat - want) < 4 * se


def test_hit_before_return_unreachable_target():
    law1 = TableMixture(((1.0, (0.5, 0.5)),))     # symmetric on Z
    env = Environment(law1, 3)
    est = walk.hit_before_return(env, (0,), {(-2,)}, (-1,), 5000, 2000, 9)
    assert est.n_hit == 0 and est.p_hat == 0.0


def test_hit_before_return_rejects_start_in_target():
    env = Environment(UniformDrift(2), 1)
    with pytest.raises(ValueError):
        walk.hit_before_return(env, (0, 0), {(0, 0)}, (0, 0), 10, 10, 1)


def test_mc_exit_matches_exact_mean_exit():
    env = Environment(Expl(2, 0.25), 91)
    cube = UnitHypercube((0, 0))
    ana = analyze(env, cube, 2)

    def inside(X):
        return np.all((X >= 0) & (X <= 1), axis=1)

    keys = walk.walk_keys(77, 40_000)
    res = walk.run_until_batch(env, np.array([0, 0]), keys, 5000, inside=inside)
    want = ana.mean_exit[0, 0]
    var = ana.moments[0, 2, 0] - want ** 2
    assert abs(res.steps_taken.mean() - want) < 4 * np.sqrt(var / len(keys))


def test_trajectory_csv(tmp_path):
    env = Environment(FORWARD, 0)
    traj = walk.run(env, (0, 0), walk.StopSpec.hit({(3, 0)}, 10), 1)
    path = tmp_path / "traj.csv"
    walk.trajectory_to_csv(traj, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "step,x_1,x_2"
    assert lines[1] == "0,0,0" and lines[-1] == "3,3,0"
