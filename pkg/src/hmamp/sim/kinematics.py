"""Forward kinematics, Jacobians and inverse kinematics of the planar arm.

Every function accepts joint vectors of shape ``(3,)`` or ``(B, 3)`` and
returns arrays with the same leading shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Keypoints",
    "IKError",
    "chain_points",
    "forward_kinematics",
    "tool_angle",
    "point_jacobian",
    "keypoint_jacobians",
    "solve_ik",
]


class IKError(ValueError):
    pass


@dataclass
class Keypoints:
    """Tool keypoints (grasp, function, auxiliary) plus the target point."""

    x_g: np.ndarray
    x_f: np.ndarray
    x_m: np.ndarray
    x_c: np.ndarray = None


def _unit(a):
    return np.stack([np.cos(a), np.sin(a)], axis=-1)


def _perp(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def tool_angle(q, cfg):
    """Absolute angle of the hammer handle."""
    q = np.asarray(q, dtype=np.float64)
    return q[..., 0] + q[..., 1] + q[..., 2] + cfg.hammer_mount_angle


def chain_points(q, cfg):
    """Positions of every named point on the arm and tool.

    Keys: ``base``, ``elbow``, ``wrist``, ``ee`` (= grasp point), ``head``
    (= function point), ``aux``.
    """
    q = np.asarray(q, dtype=np.float64)
    th = np.cumsum(q, axis=-1)
    l1, l2, l3 = cfg.link_lengths
    base = np.zeros(q.shape[:-1] + (2,))
    elbow = base + l1 * _unit(th[..., 0])
    wrist = elbow + l2 * _unit(th[..., 1])
    ee = wrist + l3 * _unit(th[..., 2])
    phi = th[..., 2] + cfg.hammer_mount_angle
    head = ee + cfg.hammer_length * _unit(phi)
    aux = head + cfg.aux_offset * _unit(phi + np.pi / 2)
    return {"base": base, "elbow": elbow, "wrist": wrist, "ee": ee, "head": head, "aux": aux}


def forward_kinematics(q, cfg, nail_pos=None):
    """Tool keypoints and end-effector orientation for joint angles ``q``."""
    pts = chain_points(q, cfg)
    kp = Keypoints(x_g=pts["ee"], x_f=pts["head"], x_m=pts["aux"],
                   x_c=None if nail_pos is None else np.asarray(nail_pos, dtype=np.float64))
    ee_orientation = np.sum(np.asarray(q, dtype=np.float64), axis=-1)
    return kp, ee_orientation


# Index of the last joint that moves each named point.
_POINT_LINK = {"elbow": 0, "wrist": 1, "ee": 2, "head": 2, "aux": 2}
_JOINT_ORIGIN = ("base", "elbow", "wrist")


def point_jacobian(q, cfg, name, pts=None):
    """d position / d q for a named chain point, shape ``(..., 2, 3)``."""
    if pts is None:
        pts = chain_points(q, cfg)
    p = pts[name]
    last = _POINT_LINK[name]
    cols = []
    for j in range(3):
        if j <= last:
            cols.append(_perp(p - pts[_JOINT_ORIGIN[j]]))
        else:
            cols.append(np.zeros_like(p))
    return np.stack(cols, axis=-1)


def keypoint_jacobians(q, cfg):
    pts = chain_points(q, cfg)
    return {
        "x_g": point_jacobian(q, cfg, "ee", pts),
        "x_f": point_jacobian(q, cfg, "head", pts),
        "x_m": point_jacobian(q, cfg, "aux", pts),
    }


def solve_ik(targets, cfg, q0, damping=1e-3, tol=1e-24, max_iter=200):
    """Damped least-squares IK matching named points to target positions.

    ``targets`` is a mapping or a list of ``(name, value)`` pairs. Names are
    chain points (see :func:`chain_points`) with 2D target positions, or
    ``"angle"`` with the absolute handle angle. Several targets may name
    the same point; the residual is then minimized in the least-squares
    sense. Raises :class:`IKError` when a target lies outside the reach of
    its point.
    """
    pairs = list(targets.items()) if hasattr(targets, "items") else list(targets)
    q = np.array(q0, dtype=np.float64)
    reach = np.cumsum(cfg.link_lengths)
    max_reach = {"elbow": reach[0], "wrist": reach[1], "ee": reach[2],
                 "head": reach[2] + cfg.hammer_length,
                 "aux": reach[2] + np.hypot(cfg.hammer_length, cfg.aux_offset)}
    points = [(k, np.asarray(v, dtype=np.float64)) for k, v in pairs if k != "angle"]
    angles = [float(v) for k, v in pairs if k == "angle"]
    for k, v in points:
        if np.linalg.norm(v) > max_reach[k] + 1e-9:
            raise IKError(f"target for {k} at distance {np.linalg.norm(v):.4f} "
                          f"is outside the reach {max_reach[k]:.4f}")
    prev = np.inf
    for _ in range(max_iter):
        pts = chain_points(q, cfg)
        res = [pts[k] - v for k, v in points]
        jac = [point_jacobian(q, cfg, k, pts) for k, _ in points]
        for a in angles:
            res.append(np.array([tool_angle(q, cfg) - a]))
            jac.append(np.ones((1, 3)))
        r = np.concatenate(res)
        J = np.concatenate(jac, axis=0)
        g = J.T @ r
        cost = float(r @ r)
        if cost < tol or np.linalg.norm(g) < 1e-15:
            break
        # damping fades out near the solution so the fixed point is exact
        lam = damping * min(1.0, cost)
        dq = np.linalg.solve(J.T @ J + lam * np.eye(3), -g)
        q = q + dq
        if np.linalg.norm(dq) < 1e-13 and cost >= prev - 1e-30:
            break
        prev = cost
    return q
