"""Reference motions: clip files, retargeting, synthetic wind-up strikes,
discriminator features, and the replay buffer of policy transitions."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sim.config import SimConfig
from .sim.kinematics import IKError, chain_points, solve_ik, tool_angle

__all__ = [
    "CLIP_COLUMNS",
    "ClipFormatError",
    "RetargetError",
    "MotionClip",
    "RetargetMap",
    "RobotMotion",
    "ReferenceSet",
    "ReplayBuffer",
    "RunningMeanStd",
    "FEATURE_DIM",
    "load_clip",
    "write_clip",
    "load_dataset",
    "retarget",
    "generate_reference",
    "WINDUP_SET",
    "windup_clips",
    "disc_features",
    "sample_transitions",
    "buffer_store",
    "interior_maxima",
    "has_backswing",
]

CLIP_COLUMNS = ("t", "hip_x", "hip_y", "elbow_x", "elbow_y", "wrist_x", "wrist_y",
                "hand_x", "hand_y", "xg_x", "xg_y", "xf_x", "xf_y", "xm_x", "xm_y")
_POINTS = ("hip", "elbow", "wrist", "hand", "xg", "xf", "xm")
FEATURE_DIM = 8


class ClipFormatError(ValueError):
    pass


class RetargetError(ValueError):
    pass


@dataclass
class MotionClip:
    """Time-stamped human and tool keypoints, one row per video frame."""

    t: np.ndarray
    points: dict  # name -> (T, 2); names as in ``_POINTS``
    name: str = ""

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.points = {k: np.asarray(v, dtype=np.float64).reshape(-1, 2) for k, v in self.points.items()}
        missing = [k for k in _POINTS if k not in self.points]
        if missing:
            raise ClipFormatError(f"clip lacks keypoints {missing}")
        if any(len(v) != len(self.t) for v in self.points.values()):
            raise ClipFormatError("keypoint tracks and timestamps differ in length")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            bad = int(np.argmax(np.diff(self.t) <= 0)) + 1
            raise ClipFormatError(f"timestamps not strictly increasing at frame {bad}")

    def __len__(self):
        return len(self.t)

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0

    def reversed(self):
        t = self.t[-1] - self.t[::-1]
        return MotionClip(t + self.t[0], {k: v[::-1].copy() for k, v in self.points.items()},
                          self.name + "-reversed")


def load_clip(path):
    """Parse a clip CSV; errors name the offending line (1-based)."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ClipFormatError(f"{path}: empty file") from None
        missing = [c for c in CLIP_COLUMNS if c not in header]
        if missing:
            raise ClipFormatError(f"{path}:1: missing columns {missing}")
        col = [header.index(c) for c in CLIP_COLUMNS]
        prev_t = -np.inf
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ClipFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(row[c]) for c in col]
            except ValueError as exc:
                raise ClipFormatError(f"{path}:{lineno}: {exc}") from None
            if not np.all(np.isfinite(vals)):
                raise ClipFormatError(f"{path}:{lineno}: non-finite value")
            if vals[0] <= prev_t:
                raise ClipFormatError(f"{path}:{lineno}: timestamp {vals[0]} does not increase")
            prev_t = vals[0]
            rows.append(vals)
    if not rows:
        raise ClipFormatError(f"{path}: no frames")
    a = np.array(rows)
    pts = {name: a[:, 1 + 2 * i:3 + 2 * i] for i, name in enumerate(_POINTS)}
    return MotionClip(a[:, 0], pts, name=path.stem)


def write_clip(path, clip):
    """Write the canonical CSV form (``repr`` floats, so loading is exact)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLIP_COLUMNS)
        for i in range(len(clip)):
            row = [clip.t[i]]
            for name in _POINTS:
                row.extend(clip.points[name][i])
            w.writerow([repr(float(v)) for v in row])


def load_dataset(directory):
    """All ``*.csv`` clips under ``directory`` (sorted by name)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"motion dataset directory {directory} does not exist")
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"motion dataset directory {directory} holds no *.csv clips")
    return [load_clip(f) for f in files]


@dataclass(frozen=True)
class RetargetMap:
    """Which robot point each human/tool keypoint drives.

    The human hip is the anchor: every frame is translated so the hip sits
    on the robot base joint, then scaled by ``scale``.
    """

    anchor: str = "hip"
    pairs: tuple = (("elbow", "elbow"), ("wrist", "wrist"), ("hand", "ee"),
                    ("xg", "ee"), ("xf", "head"), ("xm", "aux"))
    scale: float = 1.0


@dataclass
class RobotMotion:
    """Joint-space trajectory sampled on a uniform grid."""

    t: np.ndarray
    q: np.ndarray
    name: str = ""


def retarget(clip, map=RetargetMap(), config=SimConfig(), dt=None, q_init=None):
    """Per-frame damped least-squares IK, then linear resampling to ``dt``.

    Each frame is solved starting from the previous frame's solution (the
    first from the home pose). Returns a :class:`RobotMotion`.
    """
    if len(clip) == 0:
        raise RetargetError("cannot retarget an empty clip")
    dt = config.dt if dt is None else dt
    q = np.array(config.home_q if q_init is None else q_init, dtype=np.float64)
    anchor = clip.points[map.anchor]
    qs = np.empty((len(clip), 3))
    for i in range(len(clip)):
        targets = [(robot, (clip.points[human][i] - anchor[i]) * map.scale)
                   for human, robot in map.pairs]
        try:
            q = solve_ik(targets, config, q)
        except IKError as exc:
            raise RetargetError(f"frame {i}: {exc}") from None
        qs[i] = q
    qs = np.unwrap(qs, axis=0)
    t0, t1 = clip.t[0], clip.t[-1]
    n = int(np.floor((t1 - t0) / dt + 1e-9)) + 1
    grid = t0 + dt * np.arange(n)
    out = np.column_stack([np.interp(grid, clip.t, qs[:, j]) for j in range(3)])
    return RobotMotion(grid, out, clip.name)


def _smooth_rise(u):
    return np.sin(0.5 * np.pi * u) ** 2


def generate_reference(amplitude, backswing_fraction, duration, config=SimConfig(),
                       nail_pos=None, fps=60.0, overshoot=0.01, name=None):
    """Synthetic human-style strike: wind up, then accelerate onto the nail.

    The hammer head starts at the home pose. During the first
    ``backswing_fraction`` of the clip it moves up and slightly back while
    the handle tilts up by ``amplitude`` rad; the remaining time it swings
    down with growing speed to ``overshoot`` below the nail head, ending
    with a level handle. With ``backswing_fraction = 0`` the head descends
    monotonically.
    """
    if not 0.0 < duration <= 1.0:
        raise ValueError("reference clips last at most one second")
    if not 0.0 <= backswing_fraction < 1.0:
        raise ValueError("backswing_fraction must lie in [0, 1)")
    if nail_pos is None:
        (xlo, xhi), (ylo, yhi) = config.nail_position_range
        nail_pos = (0.5 * (xlo + xhi), 0.5 * (ylo + yhi))
    home = np.array(config.home_q)
    start = chain_points(home, config)["head"]
    phi0 = float(tool_angle(home, config))
    end = np.array([nail_pos[0], nail_pos[1] - overshoot])
    lift = config.hammer_length * np.sin(amplitude)
    b = backswing_fraction

    n = int(np.floor(duration * fps + 1e-9)) + 1
    t = np.arange(n) / fps
    s = t / duration
    x = np.empty(n)
    y = np.empty(n)
    phi = np.empty(n)
    top = start + np.array([-0.3 * lift, lift])
    for i, si in enumerate(s):
        if b > 0 and si <= b:
            u = _smooth_rise(si / b)
            x[i], y[i] = start + u * (top - start)
            phi[i] = phi0 + amplitude * u
        else:
            sig = (si - b) / (1.0 - b)
            p0 = top if b > 0 else start
            a0 = phi0 + (amplitude if b > 0 else 0.0)
            x[i] = p0[0] + (end[0] - p0[0]) * (3 * sig**2 - 2 * sig**3)
            y[i] = p0[1] + (end[1] - p0[1]) * sig**2
            phi[i] = a0 + (phi0 - a0) * sig**2
    q = home.copy()
    qs = np.empty((n, 3))
    for i in range(n):
        q = solve_ik([("head", (x[i], y[i])), ("angle", phi[i])], config, q)
        qs[i] = q
    pts = chain_points(qs, config)
    points = {"hip": pts["base"], "elbow": pts["elbow"], "wrist": pts["wrist"], "hand": pts["ee"],
              "xg": pts["ee"], "xf": pts["head"], "xm": pts["aux"]}
    if name is None:
        name = f"ref-a{amplitude:.2f}-b{b:.2f}-T{duration:.2f}"
    return MotionClip(t, points, name=name)


# (amplitude rad, backswing fraction, duration s, nail x as a fraction of its range)
WINDUP_SET = ((0.7, 0.40, 0.70, 0.5), (0.9, 0.45, 0.80, 0.2), (0.6, 0.35, 0.60, 0.8),
              (0.8, 0.40, 0.75, 0.0), (1.0, 0.50, 0.90, 1.0))


def windup_clips(config=SimConfig(), params=WINDUP_SET):
    """The default synthetic reference set: a few wind-up strikes of varied
    amplitude, timing and nail position."""
    (xlo, xhi), (ylo, yhi) = config.nail_position_range
    clips = []
    for k, (amp, b, dur, fx) in enumerate(params):
        nail = (xlo + fx * (xhi - xlo), 0.5 * (ylo + yhi))
        clips.append(generate_reference(amp, b, dur, config, nail_pos=nail, name=f"windup-{k}"))
    return clips


def disc_features(q, q_next, config=SimConfig()):
    """Discriminator input for a transition: joint angles and tool angle of
    both states, ``[q, phi, q', phi']`` (8 values per transition)."""
    q = np.asarray(q, dtype=np.float64)
    q_next = np.asarray(q_next, dtype=np.float64)
    a = tool_angle(q, config)[..., None]
    b = tool_angle(q_next, config)[..., None]
    return np.concatenate([q, a, q_next, b], axis=-1)


class RunningMeanStd:
    """Streaming mean/variance (Chan et al. parallel update)."""

    def __init__(self, dim, eps=1e-4):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = eps

    def update(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if len(x) == 0:
            return
        b_mean, b_var, b_n = x.mean(axis=0), x.var(axis=0), len(x)
        delta = b_mean - self.mean
        tot = self.count + b_n
        self.mean = self.mean + delta * b_n / tot
        m2 = self.var * self.count + b_var * b_n + delta**2 * self.count * b_n / tot
        self.var = m2 / tot
        self.count = tot

    def normalize(self, x):
        return (np.asarray(x) - self.mean) / np.sqrt(self.var + 1e-8)

    def state_dict(self):
        return {"mean": self.mean.tolist(), "var": self.var.tolist(), "count": self.count}


class ReferenceSet:
    """Transition features of retargeted reference clips (the real data)."""

    def __init__(self, motions, config=SimConfig()):
        self.motions = list(motions)
        feats = [disc_features(m.q[:-1], m.q[1:], config) for m in self.motions if len(m.q) > 1]
        self.transitions = np.concatenate(feats) if feats else np.zeros((0, FEATURE_DIM))
        self.head_paths = [chain_points(m.q, config)["head"] for m in self.motions]

    @classmethod
    def from_clips(cls, clips, config=SimConfig(), map=RetargetMap()):
        return cls([retarget(c, map, config) for c in clips], config)

    def __len__(self):
        return len(self.transitions)


class ReplayBuffer:
    """Bounded FIFO of policy transition features."""

    def __init__(self, capacity=100_000, dim=FEATURE_DIM):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.data = np.zeros((capacity, dim))
        self.ptr = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if rows.size == 0:
            return
        if len(rows) >= self.capacity:
            rows = rows[-self.capacity:]
        n = len(rows)
        idx = (self.ptr + np.arange(n)) % self.capacity
        self.data[idx] = rows
        self.ptr = (self.ptr + n) % self.capacity
        self.size = min(self.size + n, self.capacity)

    @property
    def transitions(self):
        """Stored rows, oldest first."""
        if self.size < self.capacity:
            return self.data[:self.size]
        return np.roll(self.data, -self.ptr, axis=0)

    def sample(self, k, rng):
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        return self.data[rng.integers(0, self.size, size=k)]


def buffer_store(buffer, trajectory, config=SimConfig()):
    """Flatten a trajectory's consecutive joint states into the buffer.

    ``trajectory`` is anything with a ``q_path`` attribute (``(T+1, 3)``
    joint angles) or such an array itself.
    """
    q = np.asarray(getattr(trajectory, "q_path", trajectory), dtype=np.float64)
    if len(q) < 2:
        return
    buffer.add(disc_features(q[:-1], q[1:], config))


def sample_transitions(source, k, rng):
    """``k`` transitions drawn uniformly (with replacement) from ``source``."""
    if isinstance(source, ReplayBuffer):
        return source.sample(k, rng)
    data = source.transitions if hasattr(source, "transitions") else np.asarray(source)
    if len(data) == 0:
        raise ValueError("cannot sample transitions from an empty source")
    return data[rng.integers(0, len(data), size=k)]


def interior_maxima(heights, above=None):
    """Indices of strict interior local maxima (plateaus count once).

    With ``above`` given, only maxima higher than that level are kept.
    """
    h = np.asarray(heights, dtype=np.float64)
    if len(h) < 3:
        return []
    keep = np.concatenate([[True], np.diff(h) != 0])
    idx = np.flatnonzero(keep)
    hv = h[idx]
    out = []
    for j in range(1, len(hv) - 1):
        if hv[j] > hv[j - 1] and hv[j] > hv[j + 1]:
            if above is None or hv[j] > above:
                out.append(int(idx[j]))
    return out


def has_backswing(heights, margin=0.005):
    """True when the height profile rises above its start (by ``margin``)
    to an interior peak before coming back down."""
    h = np.asarray(heights, dtype=np.float64)
    return len(interior_maxima(h, above=h[0] + margin)) > 0
