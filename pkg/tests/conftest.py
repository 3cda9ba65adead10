"""Shared fixtures: each preset scenario is run once per session and reused."""

import pytest

import pinchsim as ps


@pytest.fixture(scope="session")
def scenario_runs(tmp_path_factory):
    """Factory returning (config, summary) per scenario, cached for the session."""
    cache = {}
    out = tmp_path_factory.mktemp("runs")

    def get(name, bias_deg=None, duration=None, dt=None):
        key = (name, tuple(bias_deg) if bias_deg else None, duration, dt)
        if key not in cache:
            cfg = ps.builtin_scene(name)
            tag = name if bias_deg is None else f"{name}_biased"
            if dt is not None:
                cfg.dt = dt
                tag += "_fine"
            cfg.log_path = str(out / f"{tag}.csv")
            if bias_deg is not None:
                cfg.sensor["bias_angle_deg"] = list(bias_deg)
            if duration is not None:
                cfg.duration = duration
            cache[key] = (cfg, ps.run(cfg))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def cube_run(scenario_runs):
    return scenario_runs("cube")


@pytest.fixture(scope="session")
def trapezoid_run(scenario_runs):
    return scenario_runs("trapezoid")


@pytest.fixture(scope="session")
def sphere_run(scenario_runs):
    return scenario_runs("sphere")


@pytest.fixture(scope="session")
def cube_fd10_run(scenario_runs):
    return scenario_runs("cube_fd10")


@pytest.fixture(scope="session")
def perturbed_cube_run(scenario_runs):
    return scenario_runs("perturbed_cube")


@pytest.fixture(scope="session")
def offset_trapezoid_runs(tmp_path_factory):
    """Trapezoid grasp that latches off-center, with and without sensor bias.

    The stock preset latches dead-center, where a constant sensed-frame bias
    provably cancels out of the control law (every biased term is multiplied
    by a rolling angle that stays zero).  Offsetting the finger bases makes
    the grasp roll back into alignment, so the bias has dynamics to act on.
    The rolling transient decays slowly, hence the longer horizon and the
    coarser (still stable) step; the post-settle hold lets the
    position-level residuals decay well under tolerance.
    """
    out = tmp_path_factory.mktemp("offset_runs")
    runs = {}
    for tag, bias in (("plain", None), ("biased", (30.0, 15.0))):
        cfg = ps.builtin_scene("trapezoid")
        for f, shift in zip(cfg.fingers, (0.0025, -0.0025)):
            f["base_pos"][0] += shift
        cfg.dt = 5e-4
        cfg.duration = 110.0
        cfg.settle_hold = 40.0
        cfg.log_path = str(out / f"trapezoid_offset_{tag}.csv")
        if bias is not None:
            cfg.sensor["bias_angle_deg"] = list(bias)
        runs[tag] = (cfg, ps.run(cfg))
    return runs
