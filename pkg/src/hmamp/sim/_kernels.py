"""Compiled inner loop: PD control, dynamics and nail contact for one step.

Mirrors :mod:`hmamp.sim.dynamics` (which stays as the readable reference
and the test oracle) but works on plain scalars so a control step for a
batch of environments costs microseconds.
"""

import numpy as np
from numba import njit

# Layout of the packed parameter vector.
P_L1, P_L2, P_L3, P_M1, P_M2, P_M3, P_LH, P_MH, P_MOUNT, P_G = range(10)
N_PARAMS = 10


def pack_params(cfg):
    p = np.empty(N_PARAMS)
    p[P_L1:P_L3 + 1] = cfg.link_lengths
    p[P_M1:P_M3 + 1] = cfg.link_masses
    p[P_LH] = cfg.hammer_length
    p[P_MH] = cfg.hammer_head_mass
    p[P_MOUNT] = cfg.hammer_mount_angle
    p[P_G] = cfg.gravity
    return p


@njit(cache=True)
def _accel(q0, q1, q2, v0, v1, v2, t0, t1, t2, P, out):
    l1, l2, l3 = P[0], P[1], P[2]
    lh = P[6]
    g = P[9]
    th1 = q0
    th2 = q0 + q1
    th3 = th2 + q2
    phi = th3 + P[8]
    w1 = v0
    w2 = v0 + v1
    w3 = w2 + v2
    c1, s1 = np.cos(th1), np.sin(th1)
    c2, s2 = np.cos(th2), np.sin(th2)
    c3, s3 = np.cos(th3), np.sin(th3)
    ch, sh = np.cos(phi), np.sin(phi)
    ex, ey = l1 * c1, l1 * s1
    wx, wy = ex + l2 * c2, ey + l2 * s2
    gx, gy = wx + l3 * c3, wy + l3 * s3

    M00 = M01 = M02 = M11 = M12 = M22 = 0.0
    r0, r1, r2 = t0, t1, t2
    # acceleration of each segment tip from centripetal terms
    a1x, a1y = -l1 * w1 * w1 * c1, -l1 * w1 * w1 * s1
    a2x, a2y = -l2 * w2 * w2 * c2, -l2 * w2 * w2 * s2
    a3x, a3y = -l3 * w3 * w3 * c3, -l3 * w3 * w3 * s3
    ahx, ahy = -lh * w3 * w3 * ch, -lh * w3 * w3 * sh

    for b in range(4):
        if b == 0:
            m = P[3]
            px, py = 0.5 * ex, 0.5 * ey
            ax, ay = 0.5 * a1x, 0.5 * a1y
            last = 0
            inertia = m * l1 * l1 / 12.0
        elif b == 1:
            m = P[4]
            px, py = ex + 0.5 * l2 * c2, ey + 0.5 * l2 * s2
            ax, ay = a1x + 0.5 * a2x, a1y + 0.5 * a2y
            last = 1
            inertia = m * l2 * l2 / 12.0
        elif b == 2:
            m = P[5]
            px, py = wx + 0.5 * l3 * c3, wy + 0.5 * l3 * s3
            ax, ay = a1x + a2x + 0.5 * a3x, a1y + a2y + 0.5 * a3y
            last = 2
            inertia = m * l3 * l3 / 12.0
        else:
            m = P[7]
            px, py = gx + lh * ch, gy + lh * sh
            ax, ay = a1x + a2x + a3x + ahx, a1y + a2y + a3y + ahy
            last = 2
            inertia = 0.0
        ay += g
        # columns perp(p - o_j)
        j0x, j0y = -py, px
        j1x, j1y = -(py - ey), px - ex
        j2x, j2y = -(py - wy), px - wx
        if last < 1:
            j1x = j1y = 0.0
        if last < 2:
            j2x = j2y = 0.0
        M00 += m * (j0x * j0x + j0y * j0y) + inertia
        M01 += m * (j0x * j1x + j0y * j1y) + (inertia if last >= 1 else 0.0)
        M02 += m * (j0x * j2x + j0y * j2y) + (inertia if last >= 2 else 0.0)
        M11 += m * (j1x * j1x + j1y * j1y) + (inertia if last >= 1 else 0.0)
        M12 += m * (j1x * j2x + j1y * j2y) + (inertia if last >= 2 else 0.0)
        M22 += m * (j2x * j2x + j2y * j2y) + (inertia if last >= 2 else 0.0)
        r0 -= m * (j0x * ax + j0y * ay)
        r1 -= m * (j1x * ax + j1y * ay)
        r2 -= m * (j2x * ax + j2y * ay)

    # symmetric 3x3 solve by cofactors
    C00 = M11 * M22 - M12 * M12
    C01 = M02 * M12 - M01 * M22
    C02 = M01 * M12 - M02 * M11
    C11 = M00 * M22 - M02 * M02
    C12 = M01 * M02 - M00 * M12
    C22 = M00 * M11 - M01 * M01
    det = M00 * C00 + M01 * C01 + M02 * C02
    out[0] = (C00 * r0 + C01 * r1 + C02 * r2) / det
    out[1] = (C01 * r0 + C11 * r1 + C12 * r2) / det
    out[2] = (C02 * r0 + C12 * r1 + C22 * r2) / det


@njit(cache=True)
def accel_batch(q, qd, tau, P):
    n = q.shape[0]
    out = np.empty((n, 3))
    tmp = np.empty(3)
    for i in range(n):
        _accel(q[i, 0], q[i, 1], q[i, 2], qd[i, 0], qd[i, 1], qd[i, 2],
               tau[i, 0], tau[i, 1], tau[i, 2], P, tmp)
        out[i, 0] = tmp[0]
        out[i, 1] = tmp[1]
        out[i, 2] = tmp[2]
    return out


@njit(cache=True)
def _head(q0, q1, q2, v0, v1, v2, P):
    l1, l2, l3, lh = P[0], P[1], P[2], P[6]
    th1 = q0
    th2 = q0 + q1
    th3 = th2 + q2
    phi = th3 + P[8]
    ex, ey = l1 * np.cos(th1), l1 * np.sin(th1)
    wx, wy = ex + l2 * np.cos(th2), ey + l2 * np.sin(th2)
    gx, gy = wx + l3 * np.cos(th3), wy + l3 * np.sin(th3)
    hx, hy = gx + lh * np.cos(phi), gy + lh * np.sin(phi)
    vx = -hy * v0 - (hy - ey) * v1 - (hy - wy) * v2
    vy = hx * v0 + (hx - ex) * v1 + (hx - wx) * v2
    return hx, hy, vx, vy


@njit(cache=True)
def control_step(q, qd, q_target, kp, kd, gain_scale, friction, nail, P,
                 dt, substeps, capture_radius, stiffness, damping, contact_enabled):
    """Advance every row of the batch by one control period, in place.

    Returns ``(contact, force, penetration, torque_mean, work)``. Rows that
    make contact stop integrating at the contact substep.
    """
    n = q.shape[0]
    h = dt / substeps
    contact = np.zeros(n, dtype=np.bool_)
    force = np.zeros((n, 2))
    pen = np.zeros(n)
    tau_mean = np.zeros((n, 3))
    work = np.zeros(n)
    acc = np.empty(3)
    tau = np.empty(3)
    for i in range(n):
        gs = gain_scale[i]
        for s in range(substeps):
            for j in range(3):
                tau[j] = gs * kp[j] * (q_target[i, j] - q[i, j]) - gs * kd[j] * qd[i, j]
            _accel(q[i, 0], q[i, 1], q[i, 2], qd[i, 0], qd[i, 1], qd[i, 2],
                   tau[0], tau[1], tau[2], P, acc)
            for j in range(3):
                qd[i, j] += h * acc[j]
                q[i, j] += h * qd[i, j]
                tau_mean[i, j] += tau[j] / substeps
                work[i] += abs(tau[j] * qd[i, j]) * h
            if contact_enabled:
                hx, hy, vx, vy = _head(q[i, 0], q[i, 1], q[i, 2], qd[i, 0], qd[i, 1], qd[i, 2], P)
                if abs(hx - nail[i, 0]) <= capture_radius and hy <= nail[i, 1] and vy < 0.0:
                    speed = np.sqrt(vx * vx + vy * vy)
                    p = nail[i, 1] - hy
                    mag = friction[i] * (stiffness * p + damping * speed)
                    contact[i] = True
                    pen[i] = p
                    force[i, 0] = mag * vx / speed
                    force[i, 1] = mag * vy / speed
                    # torque average over the substeps actually simulated
                    for j in range(3):
                        tau_mean[i, j] *= substeps / (s + 1.0)
                    break
    return contact, force, pen, tau_mean, work
