"""Hot numerical kernels shared by the controller and the solver.

Everything here is written as flat scalar arithmetic so the same source
compiles under numba (default) or runs as plain Python when the env flag
``SWARMDOCK_NO_NUMBA=1`` picks the numpy backend. No fastmath: both backends
must produce bit-identical floats.

State layout per body is the 13-vector [p(3), q(4), v(3), omega(3)], inputs
are [force(3), torque(3)] in the body frame. ``rollout`` integrates all
chasers over the horizon, ``objective`` evaluates the tracking cost plus the
quadratic distance penalties, and ``objective_grad`` adds the exact
reverse-accumulated gradient through every integration step, quaternion
product, rotation, and renormalization.
"""

from __future__ import annotations

import numpy as np

from .backend import njit


@njit(cache=True)
def _step(x, u, dt, m, inertia, inv_inertia, out):
    # one forward-Euler step with quaternion renormalization
    qw = x[3]
    qx = x[4]
    qy = x[5]
    qz = x[6]
    wx = x[10]
    wy = x[11]
    wz = x[12]
    fx = u[0]
    fy = u[1]
    fz = u[2]

    # world force q (x) (0,f) (x) q*
    tx = 2.0 * (qy * fz - qz * fy)
    ty = 2.0 * (qz * fx - qx * fz)
    tz = 2.0 * (qx * fy - qy * fx)
    fwx = fx + qw * tx + (qy * tz - qz * ty)
    fwy = fy + qw * ty + (qz * tx - qx * tz)
    fwz = fz + qw * tz + (qx * ty - qy * tx)

    out[0] = x[0] + dt * x[7]
    out[1] = x[1] + dt * x[8]
    out[2] = x[2] + dt * x[9]

    # qdot = -1/2 (0, w) (x) q
    rw = -(wx * qx + wy * qy + wz * qz)
    rx = wx * qw + wy * qz - wz * qy
    ry = -wx * qz + wy * qw + wz * qx
    rz = wx * qy - wy * qx + wz * qw
    yw = qw - 0.5 * dt * rw
    yx = qx - 0.5 * dt * rx
    yy = qy - 0.5 * dt * ry
    yz = qz - 0.5 * dt * rz
    norm = np.sqrt(yw * yw + yx * yx + yy * yy + yz * yz)
    out[3] = yw / norm
    out[4] = yx / norm
    out[5] = yy / norm
    out[6] = yz / norm

    out[7] = x[7] + dt * fwx / m
    out[8] = x[8] + dt * fwy / m
    out[9] = x[9] + dt * fwz / m

    # wdot = I^-1 (tau - w x (I w))
    iwx = inertia[0, 0] * wx + inertia[0, 1] * wy + inertia[0, 2] * wz
    iwy = inertia[1, 0] * wx + inertia[1, 1] * wy + inertia[1, 2] * wz
    iwz = inertia[2, 0] * wx + inertia[2, 1] * wy + inertia[2, 2] * wz
    cx = wy * iwz - wz * iwy
    cy = wz * iwx - wx * iwz
    cz = wx * iwy - wy * iwx
    gx = u[3] - cx
    gy = u[4] - cy
    gz = u[5] - cz
    out[10] = wx + dt * (inv_inertia[0, 0] * gx + inv_inertia[0, 1] * gy + inv_inertia[0, 2] * gz)
    out[11] = wy + dt * (inv_inertia[1, 0] * gx + inv_inertia[1, 1] * gy + inv_inertia[1, 2] * gz)
    out[12] = wz + dt * (inv_inertia[2, 0] * gx + inv_inertia[2, 1] * gy + inv_inertia[2, 2] * gz)


@njit(cache=True)
def rollout(x0, u, dt, mass, inertia, inv_inertia):
    """Propagate all chasers over the horizon.

    x0 (N,13), u (N,D,6) -> states (N,D+1,13) including the initial state.
    """
    n_ch = x0.shape[0]
    horizon = u.shape[1]
    xs = np.empty((n_ch, horizon + 1, 13))
    for n in range(n_ch):
        for i in range(13):
            xs[n, 0, i] = x0[n, i]
        for j in range(horizon):
            _step(xs[n, j], u[n, j], dt, mass[n], inertia[n], inv_inertia[n], xs[n, j + 1])
    return xs


@njit(cache=True)
def _step_vjp(x, u, dt, m, inertia, inv_inertia, lam):
    # exact vector-Jacobian product of _step: returns (d/dx, d/du) of <lam, step(x,u)>
    gx_out = np.zeros(13)
    gu_out = np.zeros(6)
    qw = x[3]
    qx = x[4]
    qy = x[5]
    qz = x[6]
    wx = x[10]
    wy = x[11]
    wz = x[12]
    fx = u[0]
    fy = u[1]
    fz = u[2]

    # recompute the forward attitude quantities
    rw = -(wx * qx + wy * qy + wz * qz)
    rx = wx * qw + wy * qz - wz * qy
    ry = -wx * qz + wy * qw + wz * qx
    rz = wx * qy - wy * qx + wz * qw
    yw = qw - 0.5 * dt * rw
    yx = qx - 0.5 * dt * rx
    yy = qy - 0.5 * dt * ry
    yz = qz - 0.5 * dt * rz
    norm = np.sqrt(yw * yw + yx * yx + yy * yy + yz * yz)
    ow = yw / norm
    ox = yx / norm
    oy = yy / norm
    oz = yz / norm

    # out_p = p + dt v
    gx_out[0] += lam[0]
    gx_out[1] += lam[1]
    gx_out[2] += lam[2]
    gx_out[7] += dt * lam[0]
    gx_out[8] += dt * lam[1]
    gx_out[9] += dt * lam[2]

    # out_v = v + (dt/m) rot(q, f)
    gx_out[7] += lam[7]
    gx_out[8] += lam[8]
    gx_out[9] += lam[9]
    cfx = dt / m * lam[7]
    cfy = dt / m * lam[8]
    cfz = dt / m * lam[9]

    # rot(q,f) as h = q (x) (0,f); out = h (x) q*; cotangent (0, cf)
    hw = -(qx * fx + qy * fy + qz * fz)
    hx = qw * fx + qy * fz - qz * fy
    hy = qw * fy - qx * fz + qz * fx
    hz = qw * fz + qx * fy - qy * fx
    bw = qw
    bx = -qx
    by = -qy
    bz = -qz
    # gh = vjp wrt left factor of (h (x) q*)
    ghw = bx * cfx + by * cfy + bz * cfz
    ghx = bw * cfx - bz * cfy + by * cfz
    ghy = bz * cfx + bw * cfy - bx * cfz
    ghz = -by * cfx + bx * cfy + bw * cfz
    # gb = vjp wrt right factor q*
    gbw = hx * cfx + hy * cfy + hz * cfz
    gbx = hw * cfx + hz * cfy - hy * cfz
    gby = -hz * cfx + hw * cfy + hx * cfz
    gbz = hy * cfx - hx * cfy + hw * cfz
    # through the conjugate
    gq_w = gbw
    gq_x = -gbx
    gq_y = -gby
    gq_z = -gbz
    # h = q (x) (0,f): vjp wrt q with right factor (0, f)
    gq_w += fx * ghx + fy * ghy + fz * ghz
    gq_x += -fx * ghw - fz * ghy + fy * ghz
    gq_y += -fy * ghw + fz * ghx - fx * ghz
    gq_z += -fz * ghw - fy * ghx + fx * ghy
    # vjp wrt f with left factor q
    gu_out[0] += -qx * ghw + qw * ghx + qz * ghy - qy * ghz
    gu_out[1] += -qy * ghw - qz * ghx + qw * ghy + qx * ghz
    gu_out[2] += -qz * ghw + qy * ghx - qx * ghy + qw * ghz

    # out_q = y / |y|
    dot = ow * lam[3] + ox * lam[4] + oy * lam[5] + oz * lam[6]
    gyw = (lam[3] - dot * ow) / norm
    gyx = (lam[4] - dot * ox) / norm
    gyy = (lam[5] - dot * oy) / norm
    gyz = (lam[6] - dot * oz) / norm
    # y = q - 0.5 dt r
    gq_w += gyw
    gq_x += gyx
    gq_y += gyy
    gq_z += gyz
    crw = -0.5 * dt * gyw
    crx = -0.5 * dt * gyx
    cry = -0.5 * dt * gyy
    crz = -0.5 * dt * gyz
    # r = (0,w) (x) q: vjp wrt the rate vector
    gwx = -qx * crw + qw * crx - qz * cry + qy * crz
    gwy = -qy * crw + qz * crx + qw * cry - qx * crz
    gwz = -qz * crw - qy * crx + qx * cry + qw * crz
    # and wrt q
    gq_w += wx * crx + wy * cry + wz * crz
    gq_x += -wx * crw + wz * cry - wy * crz
    gq_y += -wy * crw - wz * crx + wx * crz
    gq_z += -wz * crw + wy * crx - wx * cry

    # out_w = w + dt I^-1 (tau - w x (I w))
    gx_out[10] += lam[10]
    gx_out[11] += lam[11]
    gx_out[12] += lam[12]
    ctx = dt * (inv_inertia[0, 0] * lam[10] + inv_inertia[1, 0] * lam[11] + inv_inertia[2, 0] * lam[12])
    cty = dt * (inv_inertia[0, 1] * lam[10] + inv_inertia[1, 1] * lam[11] + inv_inertia[2, 1] * lam[12])
    ctz = dt * (inv_inertia[0, 2] * lam[10] + inv_inertia[1, 2] * lam[11] + inv_inertia[2, 2] * lam[12])
    gu_out[3] += ctx
    gu_out[4] += cty
    gu_out[5] += ctz
    ccx = -ctx
    ccy = -cty
    ccz = -ctz
    iwx = inertia[0, 0] * wx + inertia[0, 1] * wy + inertia[0, 2] * wz
    iwy = inertia[1, 0] * wx + inertia[1, 1] * wy + inertia[1, 2] * wz
    iwz = inertia[2, 0] * wx + inertia[2, 1] * wy + inertia[2, 2] * wz
    # c = w x (I w): wrt the direct w slot
    gwx += iwy * ccz - iwz * ccy
    gwy += iwz * ccx - iwx * ccz
    gwz += iwx * ccy - iwy * ccx
    # and through I w
    giwx = ccy * wz - ccz * wy
    giwy = ccz * wx - ccx * wz
    giwz = ccx * wy - ccy * wx
    gwx += inertia[0, 0] * giwx + inertia[1, 0] * giwy + inertia[2, 0] * giwz
    gwy += inertia[0, 1] * giwx + inertia[1, 1] * giwy + inertia[2, 1] * giwz
    gwz += inertia[0, 2] * giwx + inertia[1, 2] * giwy + inertia[2, 2] * giwz

    gx_out[3] = gq_w
    gx_out[4] = gq_x
    gx_out[5] = gq_y
    gx_out[6] = gq_z
    gx_out[10] += gwx
    gx_out[11] += gwy
    gx_out[12] += gwz
    return gx_out, gu_out


@njit(cache=True)
def _cost_terms(xs, u, p_ref, q_ref, target_p, w_pos, w_att, w_input,
                w_pos_final, w_att_final, alpha, u_ref, rho, d_min, d_max,
                proximity_on):
    # returns (tracking cost, penalty cost, max constraint violation in meters)
    n_ch = xs.shape[0]
    horizon = u.shape[1]
    track = 0.0
    du = np.empty(6)
    for n in range(n_ch):
        for j in range(horizon + 1):
            fall = 1.0 - alpha * j / horizon
            d0 = xs[n, j, 0] - p_ref[n, j, 0]
            d1 = xs[n, j, 1] - p_ref[n, j, 1]
            d2 = xs[n, j, 2] - p_ref[n, j, 2]
            pq = (
                (w_pos[0, 0] * d0 + w_pos[0, 1] * d1 + w_pos[0, 2] * d2) * d0
                + (w_pos[1, 0] * d0 + w_pos[1, 1] * d1 + w_pos[1, 2] * d2) * d1
                + (w_pos[2, 0] * d0 + w_pos[2, 1] * d1 + w_pos[2, 2] * d2) * d2
            )
            track += fall * pq
            # error quaternion q (x) q_ref*, canonical sign
            aw = xs[n, j, 3]
            ax = xs[n, j, 4]
            ay = xs[n, j, 5]
            az = xs[n, j, 6]
            bw = q_ref[n, j, 0]
            bx = -q_ref[n, j, 1]
            by = -q_ref[n, j, 2]
            bz = -q_ref[n, j, 3]
            ew = aw * bw - ax * bx - ay * by - az * bz
            ex = aw * bx + ax * bw + ay * bz - az * by
            ey = aw * by - ax * bz + ay * bw + az * bx
            ez = aw * bz + ax * by - ay * bx + az * bw
            s = 1.0
            if ew < 0.0:
                s = -1.0
            e0 = s * ew - 1.0
            e1 = s * ex
            e2 = s * ey
            e3 = s * ez
            aq = (
                (w_att[0, 0] * e0 + w_att[0, 1] * e1 + w_att[0, 2] * e2 + w_att[0, 3] * e3) * e0
                + (w_att[1, 0] * e0 + w_att[1, 1] * e1 + w_att[1, 2] * e2 + w_att[1, 3] * e3) * e1
                + (w_att[2, 0] * e0 + w_att[2, 1] * e1 + w_att[2, 2] * e2 + w_att[2, 3] * e3) * e2
                + (w_att[3, 0] * e0 + w_att[3, 1] * e1 + w_att[3, 2] * e2 + w_att[3, 3] * e3) * e3
            )
            track += fall * aq
            if j == horizon:
                pqf = (
                    (w_pos_final[0, 0] * d0 + w_pos_final[0, 1] * d1 + w_pos_final[0, 2] * d2) * d0
                    + (w_pos_final[1, 0] * d0 + w_pos_final[1, 1] * d1 + w_pos_final[1, 2] * d2) * d1
                    + (w_pos_final[2, 0] * d0 + w_pos_final[2, 1] * d1 + w_pos_final[2, 2] * d2) * d2
                )
                aqf = (
                    (w_att_final[0, 0] * e0 + w_att_final[0, 1] * e1 + w_att_final[0, 2] * e2 + w_att_final[0, 3] * e3) * e0
                    + (w_att_final[1, 0] * e0 + w_att_final[1, 1] * e1 + w_att_final[1, 2] * e2 + w_att_final[1, 3] * e3) * e1
                    + (w_att_final[2, 0] * e0 + w_att_final[2, 1] * e1 + w_att_final[2, 2] * e2 + w_att_final[2, 3] * e3) * e2
                    + (w_att_final[3, 0] * e0 + w_att_final[3, 1] * e1 + w_att_final[3, 2] * e2 + w_att_final[3, 3] * e3) * e3
                )
                track += pqf + aqf
        for j in range(horizon):
            for k in range(6):
                du[k] = u[n, j, k] - u_ref[k]
            iq = 0.0
            for a in range(6):
                row = 0.0
                for b in range(6):
                    row += w_input[a, b] * du[b]
                iq += row * du[a]
            track += iq

    # Penalties start at j=1: the j=0 state is fixed by the plant, so its
    # terms carry zero gradient and would only distort the violation metric
    # and the penalty escalation that consumes it.
    pen = 0.0
    viol = 0.0
    for j in range(1, horizon + 1):
        if proximity_on:
            for n in range(n_ch):
                dx = xs[n, j, 0] - target_p[j, 0]
                dy = xs[n, j, 1] - target_p[j, 1]
                dz = xs[n, j, 2] - target_p[j, 2]
                dist = np.sqrt(dx * dx + dy * dy + dz * dz)
                if dist < d_min:
                    v = d_min - dist
                    pen += rho * v * v
                    if v > viol:
                        viol = v
            for n in range(n_ch):
                for n2 in range(n + 1, n_ch):
                    dx = xs[n, j, 0] - xs[n2, j, 0]
                    dy = xs[n, j, 1] - xs[n2, j, 1]
                    dz = xs[n, j, 2] - xs[n2, j, 2]
                    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
                    if dist < d_min:
                        v = d_min - dist
                        pen += rho * v * v
                        if v > viol:
                            viol = v
        for n in range(n_ch):
            dx = xs[n, j, 0] - p_ref[n, j, 0]
            dy = xs[n, j, 1] - p_ref[n, j, 1]
            dz = xs[n, j, 2] - p_ref[n, j, 2]
            dist = np.sqrt(dx * dx + dy * dy + dz * dz)
            if dist > d_max:
                v = dist - d_max
                pen += rho * v * v
                if v > viol:
                    viol = v
    return track, pen, viol


@njit(cache=True)
def objective(x0, u, dt, mass, inertia, inv_inertia, p_ref, q_ref, target_p,
              w_pos, w_att, w_input, w_pos_final, w_att_final, alpha, u_ref,
              rho, d_min, d_max, proximity_on):
    """Penalized objective (no gradient). Returns (phi, tracking, penalty, max_violation, states)."""
    xs = rollout(x0, u, dt, mass, inertia, inv_inertia)
    track, pen, viol = _cost_terms(
        xs, u, p_ref, q_ref, target_p, w_pos, w_att, w_input, w_pos_final,
        w_att_final, alpha, u_ref, rho, d_min, d_max, proximity_on
    )
    return track + pen, track, pen, viol, xs


@njit(cache=True)
def objective_grad(x0, u, dt, mass, inertia, inv_inertia, p_ref, q_ref,
                   target_p, w_pos, w_att, w_input, w_pos_final, w_att_final,
                   alpha, u_ref, rho, d_min, d_max, proximity_on):
    """Penalized objective with its exact gradient w.r.t. every input.

    Returns (phi, tracking, penalty, max_violation, states, grad) with grad
    shaped like u. The backward sweep is a hand-written adjoint: stage terms
    seed the costate at each step, the pairwise penalty couplings are
    collected first, then each chaser is swept independently back through the
    integrator.
    """
    n_ch = x0.shape[0]
    horizon = u.shape[1]
    xs = rollout(x0, u, dt, mass, inertia, inv_inertia)
    track, pen, viol = _cost_terms(
        xs, u, p_ref, q_ref, target_p, w_pos, w_att, w_input, w_pos_final,
        w_att_final, alpha, u_ref, rho, d_min, d_max, proximity_on
    )

    grad = np.zeros((n_ch, horizon, 6))
    g_pen = np.zeros((n_ch, horizon + 1, 3))
    if rho > 0.0:
        # j=0 is excluded to mirror _cost_terms; its adjoint would be
        # discarded anyway since no input reaches the initial state.
        for j in range(1, horizon + 1):
            if proximity_on:
                for n in range(n_ch):
                    dx = xs[n, j, 0] - target_p[j, 0]
                    dy = xs[n, j, 1] - target_p[j, 1]
                    dz = xs[n, j, 2] - target_p[j, 2]
                    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
                    if dist < d_min and dist > 1e-12:
                        coef = -2.0 * rho * (d_min - dist) / dist
                        g_pen[n, j, 0] += coef * dx
                        g_pen[n, j, 1] += coef * dy
                        g_pen[n, j, 2] += coef * dz
                for n in range(n_ch):
                    for n2 in range(n + 1, n_ch):
                        dx = xs[n, j, 0] - xs[n2, j, 0]
                        dy = xs[n, j, 1] - xs[n2, j, 1]
                        dz = xs[n, j, 2] - xs[n2, j, 2]
                        dist = np.sqrt(dx * dx + dy * dy + dz * dz)
                        if dist < d_min and dist > 1e-12:
                            coef = -2.0 * rho * (d_min - dist) / dist
                            g_pen[n, j, 0] += coef * dx
                            g_pen[n, j, 1] += coef * dy
                            g_pen[n, j, 2] += coef * dz
                            g_pen[n2, j, 0] -= coef * dx
                            g_pen[n2, j, 1] -= coef * dy
                            g_pen[n2, j, 2] -= coef * dz
            for n in range(n_ch):
                dx = xs[n, j, 0] - p_ref[n, j, 0]
                dy = xs[n, j, 1] - p_ref[n, j, 1]
                dz = xs[n, j, 2] - p_ref[n, j, 2]
                dist = np.sqrt(dx * dx + dy * dy + dz * dz)
                if dist > d_max:
                    coef = 2.0 * rho * (dist - d_max) / dist
                    g_pen[n, j, 0] += coef * dx
                    g_pen[n, j, 1] += coef * dy
                    g_pen[n, j, 2] += coef * dz

    for n in range(n_ch):
        lam = np.zeros(13)
        for j in range(horizon, -1, -1):
            fall = 1.0 - alpha * j / horizon
            d0 = xs[n, j, 0] - p_ref[n, j, 0]
            d1 = xs[n, j, 1] - p_ref[n, j, 1]
            d2 = xs[n, j, 2] - p_ref[n, j, 2]
            wp0 = 2.0 * fall * (w_pos[0, 0] * d0 + w_pos[0, 1] * d1 + w_pos[0, 2] * d2)
            wp1 = 2.0 * fall * (w_pos[1, 0] * d0 + w_pos[1, 1] * d1 + w_pos[1, 2] * d2)
            wp2 = 2.0 * fall * (w_pos[2, 0] * d0 + w_pos[2, 1] * d1 + w_pos[2, 2] * d2)
            if j == horizon:
                wp0 += 2.0 * (w_pos_final[0, 0] * d0 + w_pos_final[0, 1] * d1 + w_pos_final[0, 2] * d2)
                wp1 += 2.0 * (w_pos_final[1, 0] * d0 + w_pos_final[1, 1] * d1 + w_pos_final[1, 2] * d2)
                wp2 += 2.0 * (w_pos_final[2, 0] * d0 + w_pos_final[2, 1] * d1 + w_pos_final[2, 2] * d2)
            lam[0] += wp0 + g_pen[n, j, 0]
            lam[1] += wp1 + g_pen[n, j, 1]
            lam[2] += wp2 + g_pen[n, j, 2]

            aw = xs[n, j, 3]
            ax = xs[n, j, 4]
            ay = xs[n, j, 5]
            az = xs[n, j, 6]
            bw = q_ref[n, j, 0]
            bx = -q_ref[n, j, 1]
            by = -q_ref[n, j, 2]
            bz = -q_ref[n, j, 3]
            ew = aw * bw - ax * bx - ay * by - az * bz
            ex = aw * bx + ax * bw + ay * bz - az * by
            ey = aw * by - ax * bz + ay * bw + az * bx
            ez = aw * bz + ax * by - ay * bx + az * bw
            s = 1.0
            if ew < 0.0:
                s = -1.0
            e0 = s * ew - 1.0
            e1 = s * ex
            e2 = s * ey
            e3 = s * ez
            c0 = 2.0 * fall * (w_att[0, 0] * e0 + w_att[0, 1] * e1 + w_att[0, 2] * e2 + w_att[0, 3] * e3)
            c1 = 2.0 * fall * (w_att[1, 0] * e0 + w_att[1, 1] * e1 + w_att[1, 2] * e2 + w_att[1, 3] * e3)
            c2 = 2.0 * fall * (w_att[2, 0] * e0 + w_att[2, 1] * e1 + w_att[2, 2] * e2 + w_att[2, 3] * e3)
            c3 = 2.0 * fall * (w_att[3, 0] * e0 + w_att[3, 1] * e1 + w_att[3, 2] * e2 + w_att[3, 3] * e3)
            if j == horizon:
                c0 += 2.0 * (w_att_final[0, 0] * e0 + w_att_final[0, 1] * e1 + w_att_final[0, 2] * e2 + w_att_final[0, 3] * e3)
                c1 += 2.0 * (w_att_final[1, 0] * e0 + w_att_final[1, 1] * e1 + w_att_final[1, 2] * e2 + w_att_final[1, 3] * e3)
                c2 += 2.0 * (w_att_final[2, 0] * e0 + w_att_final[2, 1] * e1 + w_att_final[2, 2] * e2 + w_att_final[2, 3] * e3)
                c3 += 2.0 * (w_att_final[3, 0] * e0 + w_att_final[3, 1] * e1 + w_att_final[3, 2] * e2 + w_att_final[3, 3] * e3)
            cw = s * c0
            cx = s * c1
            cy = s * c2
            cz = s * c3
            # vjp of e = q (x) q_ref* w.r.t. q
            lam[3] += bw * cw + bx * cx + by * cy + bz * cz
            lam[4] += -bx * cw + bw * cx - bz * cy + by * cz
            lam[5] += -by * cw + bz * cx + bw * cy - bx * cz
            lam[6] += -bz * cw - by * cx + bx * cy + bw * cz

            if j > 0:
                gx13, gu6 = _step_vjp(xs[n, j - 1], u[n, j - 1], dt, mass[n],
                                      inertia[n], inv_inertia[n], lam)
                # input stage cost is quadratic with symmetric weight
                for k in range(6):
                    acc = 0.0
                    for b in range(6):
                        acc += w_input[k, b] * (u[n, j - 1, b] - u_ref[b])
                    grad[n, j - 1, k] = gu6[k] + 2.0 * acc
                lam = gx13

    return track + pen, track, pen, viol, xs, grad
