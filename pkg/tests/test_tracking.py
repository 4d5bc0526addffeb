import numpy as np
import pytest

from tacgrip.density import KdeConfig
from tacgrip.errors import NonMonotonicTimeError
from tacgrip.tracking import (ContactTrack, read_track_csv,
                              rebuild_displacements, track_displacement,
                              write_track_csv)


CFG = KdeConfig(pixel_scale_s=0.1)


def test_three_four_five_triangle():
    track = ContactTrack()
    track_displacement(track, (100, 100), 0.0, CFG)
    track_displacement(track, (103, 104), 0.1, CFG)
    assert track.displacements == [pytest.approx(0.5, abs=1e-12)]
    assert track.disp_timestamps == [0.1]


def test_identical_centers_zero_displacement():
    track = ContactTrack()
    track_displacement(track, (55.5, 60.25), 0.0, CFG)
    track_displacement(track, (55.5, 60.25), 0.1, CFG)
    assert track.displacements == [0.0]


def test_single_entry_has_no_displacement():
    track = track_displacement(ContactTrack(), (10, 20), 0.0, CFG)
    assert len(track) == 1
    assert track.displacements == []
    assert track.latest_displacement is None


def test_time_must_advance():
    track = ContactTrack()
    track_displacement(track, (0, 0), 1.0, CFG)
    with pytest.raises(NonMonotonicTimeError):
        track_displacement(track, (1, 1), 1.0, CFG)
    with pytest.raises(NonMonotonicTimeError):
        track_displacement(track, (1, 1), 0.5, CFG)
    # the failed appends must not corrupt the track
    assert len(track) == 1


def test_rigid_translation_invariance():
    rng = np.random.default_rng(7)
    pts = rng.uniform(0, 640, (20, 2))
    shift = np.array([123.4, -56.7])
    a, b = ContactTrack(), ContactTrack()
    for i, p in enumerate(pts):
        track_displacement(a, tuple(p), i * 0.1 + 0.1, CFG)
        track_displacement(b, tuple(p + shift), i * 0.1 + 0.1, CFG)
    assert a.displacements == pytest.approx(b.displacements, abs=1e-9)


def test_csv_round_trip(tmp_path):
    track = ContactTrack(finger_id=2)
    for i, c in enumerate([(10, 20), (13, 24), (13, 24), (20, 20)]):
        track_displacement(track, c, 0.033 * (i + 1), CFG)
    path = tmp_path / "track.csv"
    write_track_csv(track, path)
    back = read_track_csv(path, finger_id=2)
    assert back.finger_id == 2
    assert back.centers == track.centers
    assert back.timestamps == pytest.approx(track.timestamps, abs=1e-6)
    assert back.displacements == pytest.approx(track.displacements, abs=1e-9)
    assert back.disp_timestamps == pytest.approx(track.disp_timestamps,
                                                 abs=1e-6)


def test_read_rejects_foreign_csv(tmp_path):
    path = tmp_path / "junk.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        read_track_csv(path)


def test_rebuild_displacements_matches_online():
    track = ContactTrack()
    for i, c in enumerate([(0, 0), (3, 4), (6, 8), (6, 8)]):
        track_displacement(track, c, float(i + 1), CFG)
    online = list(track.displacements)
    rebuilt = rebuild_displacements(track, CFG)
    assert rebuilt.displacements == online
    assert rebuilt.disp_timestamps == [2.0, 3.0, 4.0]
