import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trackqa import annotate as an
from trackqa import homography as hg
from trackqa.align import AlignmentResult, FrameAlignment, to_canonical
from trackqa.annotate import BBox, CanonicalTrajectory, Trajectory
from trackqa.smooth import SmootherSpec


def identity_alignment(n):
    frames = [FrameAlignment(0, "first", hg.Homography.identity(), hg.Homography.identity())]
    for i in range(1, n):
        frames.append(
            FrameAlignment(i, "keypoint", hg.Homography.identity(), hg.Homography.identity())
        )
    return AlignmentResult(frames)


def translating_alignment(n, step=(-5.0, 0.0)):
    frames = [FrameAlignment(0, "first", hg.Homography.identity(), hg.Homography.identity())]
    for i in range(1, n):
        cum = hg.Homography.translation(step[0] * i, step[1] * i)
        frames.append(FrameAlignment(i, "keypoint", hg.Homography.translation(*step), cum))
    return AlignmentResult(frames)


def test_bbox_validation_and_center():
    with pytest.raises(ValueError):
        BBox(0, 0, 0, 5)
    b = BBox(10, 20, 4, 6)
    assert b.center == (12.0, 23.0)
    assert BBox.from_center(12, 23, 4, 6) == b


def test_annotation_file_roundtrip(tmp_path):
    traj = Trajectory([BBox(1.5, 2, 3, 4), None, BBox(10, 20, 30, 40)])
    p = tmp_path / "ann.txt"
    an.write_annotations(traj, p)
    back = an.read_annotations(p)
    assert back.boxes[0] == BBox(1.5, 2, 3, 4)
    assert back.boxes[1] is None
    assert back.boxes[2] == BBox(10, 20, 30, 40)


def test_annotation_file_accepts_whitespace(tmp_path):
    p = tmp_path / "ann.txt"
    p.write_text("1 2 3 4\n5,6,7,8\n")
    traj = an.read_annotations(p)
    assert traj.boxes[0] == BBox(1, 2, 3, 4)
    assert traj.boxes[1] == BBox(5, 6, 7, 8)


def test_absence_file(tmp_path):
    p = tmp_path / "ann.txt"
    p.write_text("1,2,3,4\n5,6,7,8\n")
    a = tmp_path / "absence.txt"
    a.write_text("0\n1\n")
    traj = an.read_annotations(p, a)
    assert traj.boxes[1] is None and traj.occluded[1]


def test_reproject_identity_alignment():
    canon = CanonicalTrajectory([(10.0, 20.0), (11.0, 21.0), None])
    out = an.reproject(canon, identity_alignment(3))
    assert out[0] == (10.0, 20.0)
    assert out[1] == (11.0, 21.0)
    assert out[2] is None


def test_reproject_roundtrip_through_canonical():
    n = 10
    traj = Trajectory([BBox(5.0 * i + 10, 20, 8, 8) for i in range(n)])
    alignment = translating_alignment(n)
    canon = to_canonical(alignment, traj)
    # motion cancellation: canonical center is constant
    for p in canon.points:
        assert p == pytest.approx((14.0, 24.0), abs=1e-9)
    back = an.reproject(canon, alignment)
    for b, c in zip(traj.boxes, back):
        assert c == pytest.approx(b.center, abs=1e-6)


def test_distances_basics():
    traj = Trajectory([BBox.from_center(60, 80, 2, 2), BBox.from_center(1, 1, 2, 2), None])
    centers = [(0.0, 0.0), (1.0, 1.0), (5.0, 5.0)]
    d = an.distances(traj, centers)
    assert d[0] == pytest.approx(100.0)
    assert d[1] == pytest.approx(0.0)
    assert d[2] is None


def test_flag_outliers_strict_inequality():
    report = an.flag_outliers([100.0, 100.1, None], 100.0)
    assert report.flagged == [False, True, False]
    assert report.evaluated == 2
    assert report.outliers == 1


def test_flag_outliers_all_absent():
    report = an.flag_outliers([None, None], 100.0)
    assert report.outliers == 0 and report.evaluated == 0


def test_flag_outliers_rejects_bad_threshold():
    with pytest.raises(ValueError):
        an.flag_outliers([1.0], 0.0)


def test_success_rate_exact_match():
    traj = Trajectory([BBox.from_center(3, 4, 2, 2)] * 5)
    centers = [b.center for b in traj.boxes]
    d = an.distances(traj, centers)
    curve = an.success_rate_curve(d, [1.0, 10.0])
    assert all(r == 1.0 for _, r in curve)


def test_success_rate_counts():
    curve = an.success_rate_curve([5.0, 15.0, 25.0], [10.0, 20.0, 30.0])
    assert [r for _, r in curve] == pytest.approx([1 / 3, 2 / 3, 1.0])


@given(st.lists(st.floats(0, 500), min_size=1, max_size=50))
def test_success_rate_monotone(dists):
    grid = [1.0, 5.0, 25.0, 125.0]
    curve = an.success_rate_curve(list(dists), grid)
    rates = [r for _, r in curve]
    assert rates == sorted(rates)


def test_success_rate_errors():
    with pytest.raises(ValueError):
        an.success_rate_curve([1.0], [])
    with pytest.raises(ValueError):
        an.success_rate_curve([None], [10.0])


def test_correct_no_outliers_is_identity():
    traj = Trajectory([BBox.from_center(10 + i, 20, 4, 4) for i in range(10)])
    centers = [b.center for b in traj.boxes]
    res = an.correct(traj, centers, 100.0)
    assert res.corrected.boxes == traj.boxes
    assert res.replaced_fraction == 0.0


def test_correct_single_outlier():
    n = 100
    boxes = [BBox.from_center(50.0, 50.0, 10, 6) for _ in range(n)]
    boxes[17] = BBox.from_center(250.0, 50.0, 10, 6)
    traj = Trajectory(boxes)
    centers = [(50.0, 50.0)] * n
    res = an.correct(traj, centers, 100.0)
    assert res.replaced_mask == [i == 17 for i in range(n)]
    assert res.replaced_fraction == pytest.approx(0.01)
    fixed = res.corrected.boxes[17]
    assert fixed.center == (50.0, 50.0)
    assert (fixed.w, fixed.h) == (10, 6)


def test_correct_never_resizes():
    rng = np.random.default_rng(0)
    boxes = [BBox.from_center(*rng.uniform(0, 200, 2), 7, 9) for _ in range(50)]
    traj = Trajectory(boxes)
    centers = [tuple(rng.uniform(0, 200, 2)) for _ in range(50)]
    res = an.correct(traj, centers, 10.0)
    for a, b in zip(traj.boxes, res.corrected.boxes):
        assert (a.w, a.h) == (b.w, b.h)


def test_flag_and_replace_masks_agree():
    rng = np.random.default_rng(1)
    boxes = [BBox.from_center(*rng.uniform(0, 200, 2), 5, 5) for _ in range(80)]
    boxes[3] = None
    traj = Trajectory(boxes)
    centers = [tuple(rng.uniform(0, 200, 2)) for _ in range(80)]
    d = an.distances(traj, centers)
    for tau in (10.0, 50.0, 120.0):
        flags = an.flag_outliers(d, tau).flagged
        mask = an.correct(traj, centers, tau).replaced_mask
        assert flags == mask


def test_replaced_stats_monotone_and_vanishing():
    rng = np.random.default_rng(2)
    boxes = [BBox.from_center(*rng.uniform(0, 200, 2), 5, 5) for _ in range(60)]
    traj = Trajectory(boxes)
    centers = [tuple(c + rng.normal(0, 15, 2)) for c in (b.center for b in boxes)]
    stats = an.replaced_stats(traj, centers, [5.0, 10.0, 20.0, 30.0, 1e9])
    fracs = [f for _, f in stats]
    assert fracs == sorted(fracs, reverse=True)
    assert fracs[-1] == 0.0


def test_extrapolate_fully_annotated_is_identity():
    n = 20
    traj = Trajectory([BBox.from_center(10.0 + i, 20.0, 4, 4) for i in range(n)])
    out = an.extrapolate_missing(traj, identity_alignment(n), SmootherSpec(method="lowess"))
    assert out.boxes == traj.boxes


def test_extrapolate_linear_motion_every_5th():
    n = 41
    boxes = [
        BBox.from_center(10.0 + 2.0 * i, 30.0 + 1.0 * i, 6, 8) if i % 5 == 0 else None
        for i in range(n)
    ]
    traj = Trajectory(boxes)
    out = an.extrapolate_missing(traj, identity_alignment(n), SmootherSpec(method="lowess"))
    for i in range(n):
        b = out.boxes[i]
        assert b is not None
        assert b.center[0] == pytest.approx(10.0 + 2.0 * i, abs=0.5)
        assert b.center[1] == pytest.approx(30.0 + 1.0 * i, abs=0.5)
        assert (b.w, b.h) == (6, 8)


def test_extrapolate_skips_failed_and_occluded():
    n = 20
    boxes = [BBox.from_center(10.0 + i, 20.0, 4, 4) if i % 2 == 0 else None for i in range(n)]
    occluded = [i == 3 for i in range(n)]
    traj = Trajectory(boxes, occluded)
    alignment = identity_alignment(n)
    alignment.frames[7] = FrameAlignment(7, "failed")
    out = an.extrapolate_missing(traj, alignment, SmootherSpec(method="lowess"))
    assert out.boxes[3] is None  # occluded
    assert out.boxes[7] is None  # failed alignment
    assert out.boxes[5] is not None


def test_length_mismatch_errors():
    traj = Trajectory([BBox(0, 0, 1, 1)])
    with pytest.raises(an.LengthMismatchError):
        an.distances(traj, [(0.0, 0.0), (1.0, 1.0)])
    with pytest.raises(an.LengthMismatchError):
        an.reproject(CanonicalTrajectory([(0.0, 0.0)]), identity_alignment(3))
