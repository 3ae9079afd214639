import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmamp.motion import (
    FEATURE_DIM,
    ClipFormatError,
    MotionClip,
    ReferenceSet,
    ReplayBuffer,
    RetargetError,
    RunningMeanStd,
    buffer_store,
    disc_features,
    generate_reference,
    has_backswing,
    interior_maxima,
    load_clip,
    load_dataset,
    retarget,
    sample_transitions,
    windup_clips,
    write_clip,
)
from hmamp.sim import SimConfig
from hmamp.sim.kinematics import chain_points

CFG = SimConfig()


def _fk_clip(qs, dt=0.02, name="fk"):
    pts = chain_points(qs, CFG)
    points = {"hip": pts["base"], "elbow": pts["elbow"], "wrist": pts["wrist"], "hand": pts["ee"],
              "xg": pts["ee"], "xf": pts["head"], "xm": pts["aux"]}
    return MotionClip(dt * np.arange(len(qs)), points, name=name)


def _joint_path(n=20):
    s = np.linspace(0, 1, n)[:, None]
    return np.array(CFG.home_q) + s * np.array([0.3, -0.2, 0.4]) + 0.05 * np.sin(6 * s)


# clip files --------------------------------------------------------------

def test_clip_round_trip_is_bit_exact(tmp_path):
    clip = _fk_clip(_joint_path(20))
    write_clip(tmp_path / "a.csv", clip)
    loaded = load_clip(tmp_path / "a.csv")
    assert len(loaded) == 20
    write_clip(tmp_path / "b.csv", loaded)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    for k in clip.points:
        assert np.array_equal(clip.points[k], loaded.points[k])


def test_duplicate_timestamp_names_the_line(tmp_path):
    write_clip(tmp_path / "a.csv", _fk_clip(_joint_path(5)))
    lines = (tmp_path / "a.csv").read_text().splitlines()
    fields = lines[4].split(",")
    fields[0] = lines[3].split(",")[0]
    lines[4] = ",".join(fields)
    (tmp_path / "a.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(ClipFormatError, match=r"a\.csv:5:"):
        load_clip(tmp_path / "a.csv")


def test_malformed_row_and_missing_column(tmp_path):
    write_clip(tmp_path / "a.csv", _fk_clip(_joint_path(5)))
    text = (tmp_path / "a.csv").read_text().splitlines()
    (tmp_path / "bad.csv").write_text("\n".join(text[:3] + ["0.1,oops"] + text[4:]) + "\n")
    with pytest.raises(ClipFormatError, match=r"bad\.csv:4:"):
        load_clip(tmp_path / "bad.csv")
    header = text[0].replace(",xm_y", "")
    rows = [",".join(r.split(",")[:-1]) for r in text[1:]]
    (tmp_path / "cols.csv").write_text("\n".join([header] + rows) + "\n")
    with pytest.raises(ClipFormatError, match="xm_y"):
        load_clip(tmp_path / "cols.csv")


def test_dataset_directory_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "missing")
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path)


# retargeting -------------------------------------------------------------

def test_fk_then_retarget_recovers_joints():
    qs = _joint_path(25)
    motion = retarget(_fk_clip(qs), config=CFG)
    assert motion.q.shape == qs.shape  # 50 Hz input: resampling keeps every frame
    assert np.max(np.abs(motion.q - qs)) <= 1e-6


def test_reversed_clip_gives_reversed_trajectory():
    qs = _joint_path(25)
    clip = _fk_clip(qs)
    fwd = retarget(clip, config=CFG)
    back = retarget(clip.reversed(), config=CFG, q_init=qs[-1])
    assert np.max(np.abs(back.q - fwd.q[::-1])) <= 1e-6


def test_resampling_to_control_rate():
    qs = _joint_path(31)
    motion = retarget(_fk_clip(qs, dt=1 / 60), config=CFG)
    assert np.allclose(np.diff(motion.t), CFG.dt)
    assert len(motion.t) == int(np.floor(0.5 / CFG.dt + 1e-9)) + 1


def test_unreachable_frame_is_reported():
    qs = _joint_path(5)
    clip = _fk_clip(qs)
    clip.points["xf"][3] = [5.0, 0.0]
    with pytest.raises(RetargetError, match="frame 3"):
        retarget(clip, config=CFG)


def test_empty_clip_cannot_be_retargeted():
    empty = MotionClip(np.zeros(0), {k: np.zeros((0, 2)) for k in
                                     ("hip", "elbow", "wrist", "hand", "xg", "xf", "xm")})
    with pytest.raises(RetargetError):
        retarget(empty)


# synthetic references ----------------------------------------------------

def test_no_backswing_descends_monotonically():
    clip = generate_reference(0.8, 0.0, 0.6, CFG)
    assert np.all(np.diff(clip.points["xf"][:, 1]) <= 0)


def test_backswing_has_one_interior_peak_above_start():
    y = generate_reference(0.8, 0.4, 0.8, CFG).points["xf"][:, 1]
    assert len(interior_maxima(y, above=y[0])) == 1
    assert has_backswing(y)


def test_generated_clip_passes_pipeline(tmp_path):
    clip = generate_reference(0.8, 0.4, 0.8, CFG)
    write_clip(tmp_path / "ref.csv", clip)
    motion = retarget(load_clip(tmp_path / "ref.csv"), config=CFG)
    head = chain_points(motion.q, CFG)["head"]
    assert has_backswing(head[:, 1])


def test_reference_rejects_long_clips():
    with pytest.raises(ValueError):
        generate_reference(0.8, 0.4, 1.5, CFG)


def test_windup_set_shapes():
    clips = windup_clips(CFG)
    assert len(clips) == 5 and all(c.duration < 1.0 for c in clips)
    ref = ReferenceSet.from_clips(clips, CFG)
    assert ref.transitions.shape[1] == FEATURE_DIM
    assert all(has_backswing(p[:, 1]) for p in ref.head_paths)


@pytest.mark.parametrize("heights, expected", [([0, 1, 0], [1]), ([0, 1, 1, 0], [1]),
                                               ([0, 1, 2], []), ([2, 1, 2, 1, 2], [2]),
                                               ([1, 1], [])])
def test_interior_maxima(heights, expected):
    assert interior_maxima(heights) == expected


# features and normalization ----------------------------------------------

@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3))
def test_identical_states_give_equal_halves(q):
    f = disc_features(np.array(q), np.array(q), CFG)
    assert f.shape == (FEATURE_DIM,)
    assert np.array_equal(f[:4], f[4:])


def test_normalized_stream_is_centred():
    rng = np.random.default_rng(0)
    rms = RunningMeanStd(3)
    data = rng.normal([5.0, -2.0, 0.1], [3.0, 0.5, 10.0], size=(10_000, 3))
    for batch in np.array_split(data, 40):
        rms.update(batch)
    assert np.all(np.abs(rms.normalize(data).mean(axis=0)) <= 0.1)
    assert np.allclose(rms.normalize(data).std(axis=0), 1.0, atol=0.05)


# sampling and the replay buffer ------------------------------------------

def test_single_transition_source_repeats_it():
    row = np.arange(FEATURE_DIM, dtype=float)[None]
    out = sample_transitions(row, 7, np.random.default_rng(0))
    assert out.shape == (7, FEATURE_DIM) and np.all(out == row)


def test_sampling_is_uniform_chi_square():
    data = np.arange(10, dtype=float)[:, None] * np.ones(FEATURE_DIM)
    draws = sample_transitions(data, 100_000, np.random.default_rng(1))[:, 0].astype(int)
    counts = np.bincount(draws, minlength=10)
    chi2 = np.sum((counts - 10_000) ** 2 / 10_000)
    assert chi2 < 27.88  # 99.9th percentile of chi-square with 9 dof


def test_seeded_sampling_reproducible():
    data = np.random.default_rng(0).normal(size=(30, FEATURE_DIM))
    a = sample_transitions(data, 50, np.random.default_rng(5))
    b = sample_transitions(data, 50, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_empty_sources_rejected():
    with pytest.raises(ValueError):
        sample_transitions(np.zeros((0, FEATURE_DIM)), 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_transitions(ReplayBuffer(5), 3, np.random.default_rng(0))


def test_buffer_of_one_returns_stored_transition():
    buf = ReplayBuffer(capacity=1)
    q = np.array([CFG.home_q, np.array(CFG.home_q) + 0.1])
    buffer_store(buf, q, CFG)
    out = sample_transitions(buf, 4, np.random.default_rng(0))
    assert np.all(out == disc_features(q[0], q[1], CFG))


def test_buffer_fifo_eviction():
    c = 50
    buf = ReplayBuffer(capacity=c)
    rows = np.arange(c + 10, dtype=float)[:, None] * np.ones(FEATURE_DIM)
    for k in range(0, c + 10, 7):
        buf.add(rows[k:k + 7])
    assert len(buf) == c
    assert np.array_equal(buf.transitions, rows[10:])
    draws = buf.sample(2000, np.random.default_rng(0))
    assert draws[:, 0].min() >= 10


@settings(max_examples=50)
@given(st.integers(1, 20), st.lists(st.integers(0, 15), max_size=10))
def test_buffer_never_exceeds_capacity(capacity, chunks):
    buf = ReplayBuffer(capacity=capacity)
    total = 0
    for n in chunks:
        buf.add(np.full((n, FEATURE_DIM), float(total)) + np.arange(n)[:, None])
        total += n
        assert len(buf) == min(total, capacity)


def test_empty_trajectory_is_noop():
    buf = ReplayBuffer(capacity=5)
    buffer_store(buf, np.zeros((1, 3)), CFG)
    buffer_store(buf, np.zeros((0, 3)), CFG)
    assert len(buf) == 0
