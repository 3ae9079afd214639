"""Rigid-body dynamics of the arm plus hammer head.

Links are uniform rods, the hammer head is a point mass at the function
point and the handle is massless. Equations of motion are assembled from
body Jacobians:

    M(q) qdd + h(q, qd) + G(q) = tau

with ``h = sum_b m_b J_b^T (dJ_b/dt qd)``, which for a planar chain is
``-sum_b m_b J_b^T sum_s l_s w_s^2 u_s`` over the segments leading to the
body.
"""

from __future__ import annotations

import numpy as np

from .kinematics import chain_points, point_jacobian

__all__ = ["mass_matrix", "bias_forces", "gravity_forces", "forward_dynamics",
           "mechanical_energy", "semi_implicit_euler"]


def _unit(a):
    return np.stack([np.cos(a), np.sin(a)], axis=-1)


def _bodies(q, cfg):
    """[(mass, rotational inertia, link index, jacobian, segments)]."""
    pts = chain_points(q, cfg)
    th = np.cumsum(q, axis=-1)
    l1, l2, l3 = cfg.link_lengths
    m1, m2, m3 = cfg.link_masses
    phi = th[..., 2] + cfg.hammer_mount_angle
    segs = [(l1, th[..., 0], 0), (l2, th[..., 1], 1), (l3, th[..., 2], 2)]
    out = []
    for k, (m, l) in enumerate(zip((m1, m2, m3), (l1, l2, l3))):
        com = pts[("base", "elbow", "wrist")[k]] + 0.5 * l * _unit(th[..., k])
        J = _jac_for(q, cfg, pts, com, k)
        chain = segs[:k] + [(0.5 * l, th[..., k], k)]
        out.append((m, m * l * l / 12.0, k, J, chain))
    J = point_jacobian(q, cfg, "head", pts)
    chain = segs + [(cfg.hammer_length, phi, 2)]
    out.append((cfg.hammer_head_mass, 0.0, 2, J, chain))
    return out, th


def _jac_for(q, cfg, pts, p, last):
    origins = (pts["base"], pts["elbow"], pts["wrist"])
    cols = []
    for j in range(3):
        if j <= last:
            v = p - origins[j]
            cols.append(np.stack([-v[..., 1], v[..., 0]], axis=-1))
        else:
            cols.append(np.zeros_like(p))
    return np.stack(cols, axis=-1)


def _omega_jac(k):
    return np.array([1.0 if j <= k else 0.0 for j in range(3)])


def mass_matrix(q, cfg):
    q = np.asarray(q, dtype=np.float64)
    bodies, _ = _bodies(q, cfg)
    M = np.zeros(q.shape[:-1] + (3, 3))
    for m, inertia, k, J, _ in bodies:
        M += m * np.swapaxes(J, -1, -2) @ J
        if inertia:
            w = _omega_jac(k)
            M += inertia * np.outer(w, w)
    return M


def bias_forces(q, qd, cfg):
    """Coriolis and centripetal generalized forces ``h(q, qd)``."""
    q = np.asarray(q, dtype=np.float64)
    qd = np.asarray(qd, dtype=np.float64)
    bodies, _ = _bodies(q, cfg)
    wd = np.cumsum(qd, axis=-1)
    h = np.zeros(q.shape)
    for m, _, _, J, chain in bodies:
        acc = np.zeros(q.shape[:-1] + (2,))
        for length, angle, idx in chain:
            acc -= length * (wd[..., idx] ** 2)[..., None] * _unit(angle)
        h += m * np.einsum("...ij,...i->...j", J, acc)
    return h


def gravity_forces(q, cfg):
    q = np.asarray(q, dtype=np.float64)
    bodies, _ = _bodies(q, cfg)
    G = np.zeros(q.shape)
    for m, _, _, J, _ in bodies:
        G += m * cfg.gravity * J[..., 1, :]
    return G


def forward_dynamics(q, qd, tau, cfg):
    """Joint accelerations for applied joint torques ``tau``."""
    q = np.asarray(q, dtype=np.float64)
    qd = np.asarray(qd, dtype=np.float64)
    bodies, _ = _bodies(q, cfg)
    wd = np.cumsum(qd, axis=-1)
    M = np.zeros(q.shape[:-1] + (3, 3))
    rhs = np.array(tau, dtype=np.float64, copy=True)
    rhs = np.broadcast_to(rhs, q.shape).copy()
    for m, inertia, k, J, chain in bodies:
        Jt = np.swapaxes(J, -1, -2)
        M += m * Jt @ J
        if inertia:
            w = _omega_jac(k)
            M += inertia * np.outer(w, w)
        acc = np.zeros(q.shape[:-1] + (2,))
        for length, angle, idx in chain:
            acc -= length * (wd[..., idx] ** 2)[..., None] * _unit(angle)
        acc[..., 1] += cfg.gravity
        rhs -= m * np.einsum("...ij,...i->...j", J, acc)
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def mechanical_energy(q, qd, cfg):
    """Kinetic plus gravitational energy, potential measured from the table."""
    q = np.asarray(q, dtype=np.float64)
    qd = np.asarray(qd, dtype=np.float64)
    M = mass_matrix(q, cfg)
    kinetic = 0.5 * np.einsum("...i,...ij,...j->...", qd, M, qd)
    pts = chain_points(q, cfg)
    th = np.cumsum(q, axis=-1)
    potential = 0.0
    for k, name in enumerate(("base", "elbow", "wrist")):
        com_y = pts[name][..., 1] + 0.5 * cfg.link_lengths[k] * np.sin(th[..., k])
        potential = potential + cfg.link_masses[k] * cfg.gravity * (com_y - cfg.table_height)
    potential = potential + cfg.hammer_head_mass * cfg.gravity * (pts["head"][..., 1] - cfg.table_height)
    return kinetic + potential


def semi_implicit_euler(q, qd, tau, cfg, h):
    """One symplectic Euler substep: velocity first, then position."""
    qdd = forward_dynamics(q, qd, tau, cfg)
    qd = qd + h * qdd
    q = q + h * qd
    return q, qd
