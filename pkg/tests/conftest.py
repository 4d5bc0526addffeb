"""Shared fixtures. The closed-loop scenario runs are expensive (each
simulates several seconds of the full perceive-classify-actuate loop),
so each canned scenario is run exactly once per session and shared by
the behavioral and acceptance tests."""

import dataclasses

import pytest

import tacgrip as tg
from tacgrip.episode import run_grasp
from tacgrip.scenario import (poke_scenario, slip_scenario, static_scenario,
                              timeout_scenario)


@pytest.fixture(scope="session")
def static_run():
    return run_grasp(static_scenario())


@pytest.fixture(scope="session")
def poke_run():
    return run_grasp(poke_scenario())


@pytest.fixture(scope="session")
def slip_run():
    return run_grasp(slip_scenario())


@pytest.fixture(scope="session")
def timeout_run():
    return run_grasp(timeout_scenario())


@pytest.fixture(scope="session")
def nominal_model():
    return tg.SensorModel()


@pytest.fixture(scope="session")
def reference_frame(nominal_model):
    """Noise-free render of the untouched marker grid."""
    quiet = dataclasses.replace(nominal_model, noise_sigma=0.0)
    return tg.render_frame(tg.displace_markers(quiet, None), quiet,
                           finger_id=1, seq=0)
