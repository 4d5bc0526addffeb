import dataclasses
import math

import numpy as np
import pytest

import tacgrip as tg
from tacgrip.density import _density_at_points
from tacgrip.pgm import read_pgm
from tacgrip.sensor_sim import ContactStimulus, SensorModel, displace_markers


def test_depth_zero_is_identity(nominal_model):
    nominal = displace_markers(nominal_model, None)
    touched = displace_markers(
        nominal_model, ContactStimulus(x=320.0, y=240.0, depth=0.0,
                                       radius=40.0, timestamp=2.0))
    assert np.array_equal(nominal.centroids, touched.centroids)


def test_displacement_magnitude_matches_envelope(nominal_model):
    stim = ContactStimulus(x=320.0, y=240.0, depth=2.0, radius=40.0,
                           timestamp=1.0)
    before = displace_markers(nominal_model, None).centroids
    after = displace_markers(nominal_model, stim).centroids
    r = np.hypot(before[:, 0] - stim.x, before[:, 1] - stim.y)
    moved = np.hypot(after[:, 0] - before[:, 0], after[:, 1] - before[:, 1])
    expect = nominal_model.displacement_gain_k * stim.depth \
        * np.exp(-r ** 2 / (2.0 * stim.radius ** 2))
    assert np.allclose(moved, expect, atol=1e-9)


def test_displacement_is_radially_outward(nominal_model):
    stim = ContactStimulus(x=310.0, y=250.0, depth=2.0, radius=40.0,
                           timestamp=1.0)
    before = displace_markers(nominal_model, None).centroids
    after = displace_markers(nominal_model, stim).centroids
    r_before = np.hypot(before[:, 0] - stim.x, before[:, 1] - stim.y)
    r_after = np.hypot(after[:, 0] - stim.x, after[:, 1] - stim.y)
    assert np.all(r_after >= r_before - 1e-12)


def test_marker_on_stimulus_center_stays(nominal_model):
    # the radial direction is undefined at r = 0; such a marker stays put
    nominal = displace_markers(nominal_model, None).centroids
    cx, cy = nominal[17]
    stim = ContactStimulus(x=float(cx), y=float(cy), depth=3.0, radius=40.0,
                           timestamp=1.0)
    after = displace_markers(nominal_model, stim).centroids
    assert after[17, 0] == cx and after[17, 1] == cy


def test_symmetric_stimulus_keeps_pattern_symmetric(nominal_model):
    # stimulus on the grid's center of symmetry: the displaced pattern
    # must mirror about it, and the density minimum must stay within one
    # grid spacing of the stimulus
    nominal = displace_markers(nominal_model, None).centroids
    cx = nominal[:, 0].mean()
    cy = nominal[:, 1].mean()
    stim = ContactStimulus(x=cx, y=cy, depth=2.0, radius=40.0, timestamp=1.0)
    after = displace_markers(nominal_model, stim).centroids
    mirrored = np.column_stack([2 * cx - after[:, 0], 2 * cy - after[:, 1]])
    a = after[np.lexsort((after[:, 0], after[:, 1]))]
    b = mirrored[np.lexsort((mirrored[:, 0], mirrored[:, 1]))]
    assert np.allclose(a, b, atol=1e-9)

    span = np.arange(-20.0, 20.5, 0.5)
    gx, gy = np.meshgrid(cx + span, cy + span)
    d = _density_at_points(after, gx.ravel(), gy.ravel(), 15.0)
    k = int(d.argmin())
    off = math.hypot(gx.ravel()[k] - cx, gy.ravel()[k] - cy)
    assert off <= nominal_model.spacing


def test_density_at_center_strictly_decreases_with_depth(nominal_model):
    center = (320.0, 240.0)
    values = []
    for depth in (0.5, 1.0, 2.0):
        stim = ContactStimulus(x=center[0], y=center[1], depth=depth,
                               radius=40.0, timestamp=1.0)
        ms = displace_markers(nominal_model, stim)
        values.append(_density_at_points(ms.centroids,
                                         np.array([center[0]]),
                                         np.array([center[1]]), 15.0)[0])
    assert values[0] > values[1] > values[2]


def test_shear_moves_recovered_center_monotonically(nominal_model):
    # recovered center shift tracks shear * envelope-at-center, and grows
    # with |shear|
    base = ContactStimulus(x=320.0, y=240.0, depth=3.0, radius=40.0,
                           timestamp=1.0)
    span = np.arange(-30.0, 30.5, 0.25)
    shifts = []
    for shear in (0.0, 6.0, 12.0):
        stim = dataclasses.replace(base, shear_x=shear)
        ms = displace_markers(nominal_model, stim)
        gx, gy = np.meshgrid(base.x + span, base.y + span)
        d = _density_at_points(ms.centroids, gx.ravel(), gy.ravel(), 15.0)
        k = int(d.argmin())
        shifts.append(gx.ravel()[k] - base.x)
    assert shifts[0] < shifts[1] < shifts[2]
    # envelope at the center is 1, so the shift should be near the shear
    assert abs(shifts[1] - 6.0) <= 3.0
    assert abs(shifts[2] - 12.0) <= 3.0


def test_render_deterministic(nominal_model):
    ms = displace_markers(nominal_model, None)
    a = tg.render_frame(ms, nominal_model, finger_id=1, seq=3)
    b = tg.render_frame(ms, nominal_model, finger_id=1, seq=3)
    assert np.array_equal(a.pixels, b.pixels)


def test_noise_stream_keyed_by_finger_and_seq(nominal_model):
    ms = displace_markers(nominal_model, None)
    a = tg.render_frame(ms, nominal_model, finger_id=1, seq=3)
    b = tg.render_frame(ms, nominal_model, finger_id=1, seq=4)
    c = tg.render_frame(ms, nominal_model, finger_id=2, seq=3)
    assert not np.array_equal(a.pixels, b.pixels)
    assert not np.array_equal(a.pixels, c.pixels)


def test_empty_markerset_renders_background(nominal_model):
    quiet = dataclasses.replace(nominal_model, noise_sigma=0.0)
    frame = tg.render_frame(tg.MarkerSet(np.empty((0, 2))), quiet)
    assert np.all(frame.pixels == quiet.background)


def test_darkest_pixel_at_disk_center(nominal_model):
    # the anti-aliased disk core is a plateau at marker_intensity; the
    # center pixel attains the global minimum and the far field does not
    quiet = dataclasses.replace(nominal_model, noise_sigma=0.0)
    frame = tg.render_frame(tg.MarkerSet(np.array([[320.0, 240.0]])), quiet)
    assert frame.pixels[240, 320] == frame.pixels.min()
    assert frame.pixels[240, 320] == pytest.approx(quiet.marker_intensity)
    assert frame.pixels[0, 0] == quiet.background


def test_model_invariants():
    with pytest.raises(ValueError):
        SensorModel(spacing=7.0, marker_radius=4.0)  # spacing <= 2r
    with pytest.raises(ValueError):
        SensorModel(grid_rows=40, spacing=15.0)  # grid runs off the frame
    with pytest.raises(ValueError):
        ContactStimulus(x=0.0, y=0.0, depth=-1.0, radius=40.0)
    with pytest.raises(ValueError):
        ContactStimulus(x=0.0, y=0.0, depth=1.0, radius=0.0)


def test_write_frames_and_truth_sidecar(tmp_path, nominal_model):
    stim = ContactStimulus(x=320.0, y=240.0, depth=2.0, radius=40.0,
                           timestamp=0.0)
    sets = [displace_markers(nominal_model, None),
            displace_markers(nominal_model, stim)]
    tg.write_frames(tmp_path, nominal_model, sets, finger_id=1)
    img = read_pgm(tmp_path / "frame_1_000000.pgm")
    assert img.shape == (nominal_model.height, nominal_model.width)
    truth = (tmp_path / "truth_1.csv").read_text().strip().splitlines()
    assert truth[0] == "seq,marker,x,y"
    assert len(truth) == 1 + 2 * len(sets[0])
    seq, marker, x, y = truth[1].split(",")
    assert (int(seq), int(marker)) == (0, 0)
    assert math.isclose(float(x), sets[0].centroids[0, 0], abs_tol=1e-6)
