import numpy as np
import numpy.testing as npt
import pytest
from scipy import stats

from hamnav.navigator import (
    Navigator,
    Scenario,
    ScenarioError,
    TELEMETRY_COLUMNS,
    load_telemetry,
    run_scenario,
    save_telemetry,
    save_verdict,
    telemetry_column as col,
)
from hamnav.scenarios import corridor_world, straight_corridor_world
from hamnav.world import Box, ObstacleSet, Sphere


@pytest.fixture(scope="module")
def corridor_run():
    return run_scenario(corridor_world())


def test_telemetry_column_layout():
    assert len(TELEMETRY_COLUMNS) == 36
    assert col("t") == 0
    assert col("dE") == 26
    assert col("d_p_obs") == 28


def test_straight_corridor_reaches_goal():
    telemetry, verdict = run_scenario(straight_corridor_world())
    assert verdict.status == "success"
    assert verdict.final_goal_distance < 0.05
    sigma = telemetry[:, col("sigma")]
    assert sigma.max() >= 1.0 - 1e-12
    assert np.all(np.diff(sigma) >= 0)  # monotone progress, no replans here
    assert verdict.min_margin >= -1e-6


def test_goal_fixed_point():
    scn = straight_corridor_world()
    telemetry, verdict = run_scenario(scn)
    nav = Navigator(scn)
    # restart at the converged terminal state: it should stay put
    nav.x = telemetry[-1, 1:19].copy()
    nav.x[:3] = scn.goal
    nav.x[12:] = 0.0
    nav.g = scn.goal.copy()
    p0 = nav.x[:3].copy()
    for _ in range(200):
        nav.step()
    assert np.linalg.norm(nav.x[:3] - p0) < 1e-3


def test_start_inside_obstacle_rejected():
    scn = straight_corridor_world()
    scn.obstacles = ObstacleSet([Sphere(scn.start, 0.5)])
    with pytest.raises(ScenarioError):
        Navigator(scn)


def test_margin_nonnegative_along_run():
    telemetry, _ = run_scenario(straight_corridor_world())
    assert telemetry[:, col("dE")].min() >= -1e-6


def test_governor_speed_tracks_safe_radius(corridor_run):
    # adaptivity: the governor slows down when the certified ball shrinks
    telemetry, verdict = corridor_run
    assert verdict.status == "success"
    dE = telemetry[:, col("dE")]
    radius = np.sqrt(np.maximum(dE, 0.0) / 1.1)
    g = telemetry[:, col("gx"):col("gz") + 1]
    gdot = np.linalg.norm(np.diff(g, axis=0), axis=1) / 0.01
    rho = stats.spearmanr(gdot, radius[1:]).statistic
    assert rho > 0.3


def test_sigma_monotone_between_replans(corridor_run):
    telemetry, _ = corridor_run
    sigma = telemetry[:, col("sigma")]
    drops = np.flatnonzero(np.diff(sigma) < -1e-12)
    # the cursor only resets when a replan swaps the path underneath it
    for k in drops:
        assert sigma[k + 1] == 0.0 or sigma[k + 1] < sigma[k]
    # within epochs (between resets) progress is monotone
    start = 0
    for k in list(drops) + [len(sigma) - 1]:
        seg = sigma[start:k + 1]
        assert np.all(np.diff(seg) >= -1e-12)
        start = k + 1


def test_determinism_byte_identical_telemetry(tmp_path):
    scn = straight_corridor_world()
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    save_telemetry(a, run_scenario(scn)[0])
    save_telemetry(b, run_scenario(straight_corridor_world())[0])
    assert a.read_bytes() == b.read_bytes()


def test_telemetry_roundtrip(tmp_path):
    telemetry, verdict = run_scenario(straight_corridor_world())
    path = tmp_path / "telemetry.txt"
    save_telemetry(path, telemetry)
    loaded = load_telemetry(path)
    npt.assert_array_equal(loaded, telemetry)
    vpath = tmp_path / "verdict.txt"
    save_verdict(vpath, verdict)
    text = vpath.read_text()
    assert "status: success" in text
    assert "min_obstacle_distance:" in text


def test_local_safe_ball_stays_clear_of_obstacles():
    # sampled points of the certified ball lie strictly inside free space
    scn = straight_corridor_world()
    scn.obstacles = ObstacleSet([Sphere([3.0, 1.2, 1.5], 0.6)])
    nav = Navigator(scn)
    rng = np.random.default_rng(0)
    for _ in range(400):
        row = nav.step()
        de = row[col("dE")]
        radius = np.sqrt(max(de, 0.0) / (1.0 + scn.eps))
        if radius <= 0.0:
            continue
        dirs = rng.normal(size=(8, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        for d in dirs:
            # the certificate is measured against sensed geometry, so allow
            # the sensing resolution as slack
            assert scn.obstacles.distance(nav.g + radius * d) > -1e-9
        if nav.goal_reached():
            break


def test_replanning_avoids_newly_seen_wall():
    scn = straight_corridor_world()
    scn.obstacles = ObstacleSet([
        Box([3.0, -1.5, 0.0], [3.4, 0.9, 3.0]),
    ])
    scn.grid_lo = np.array([-1.0, -2.0, 0.0])
    scn.grid_hi = np.array([7.0, 2.5, 3.0])
    scn.duration = 90.0
    telemetry, verdict = run_scenario(scn)
    assert verdict.status == "success"
    assert verdict.min_obstacle_distance > 0.0
