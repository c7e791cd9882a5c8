"""Compiled inner loops for the learners.

The kernels mirror the array engines in :mod:`payofflab.learn` operation for
operation (same expressions, same evaluation order) so both paths produce the
same trajectories; the tests pin them against each other.  Keeping the loops
compiled makes million-step runs and straggler-heavy sweeps cheap on one core.
"""

from __future__ import annotations

import numba as nb
import numpy as np

from .payoff import DEGENERACY_EPS, FALLBACK_LAMBDA, FALLBACK_STEP

STALL_WINDOW = 10

_SIG_CACHE = True


@nb.njit(cache=_SIG_CACHE, inline="always")
def _f_and_jac(p, q, f, jac):
    """Scalar fused multilinear components and q-Jacobian; mirrors
    payofflab.payoff.f_jacobian."""
    pcc, pcd, pdc, pdd = p[0], p[1], p[2], p[3]
    qcc, qcd, qdc, qdd = q[0], q[1], q[2], q[3]

    r1x, r1y, r1z = pcc * qcc - 1.0, pcc - 1.0, qcc - 1.0
    r2x, r2y, r2z = pdc * qcd, pdc, qcd - 1.0
    r3x, r3y, r3z = pcd * qdc, pcd - 1.0, qdc
    r4x, r4y, r4z = pdd * qdd, pdd, qdd

    c34x = r3y * r4z - r3z * r4y
    c34y = r3z * r4x - r3x * r4z
    c34z = r3x * r4y - r3y * r4x
    c24x = r2y * r4z - r2z * r4y
    c24y = r2z * r4x - r2x * r4z
    c24z = r2x * r4y - r2y * r4x
    c23x = r2y * r3z - r2z * r3y
    c23y = r2z * r3x - r2x * r3z
    c23z = r2x * r3y - r2y * r3x
    # crosses with the constant row derivatives d_i = (p_i, 0, 1)
    c3d4x = r3y * 1.0 - r3z * 0.0
    c3d4y = r3z * pdd - r3x * 1.0
    c3d4z = r3x * 0.0 - r3y * pdd
    cd34x = 0.0 * r4z - 1.0 * r4y
    cd34y = 1.0 * r4x - pcd * r4z
    cd34z = pcd * r4y - 0.0 * r4x
    c2d4x = r2y * 1.0 - r2z * 0.0
    c2d4y = r2z * pdd - r2x * 1.0
    c2d4z = r2x * 0.0 - r2y * pdd
    cd24x = 0.0 * r4z - 1.0 * r4y
    cd24y = 1.0 * r4x - pdc * r4z
    cd24z = pdc * r4y - 0.0 * r4x
    c2d3x = r2y * 1.0 - r2z * 0.0
    c2d3y = r2z * pcd - r2x * 1.0
    c2d3z = r2x * 0.0 - r2y * pcd
    cd23x = 0.0 * r3z - 1.0 * r3y
    cd23y = 1.0 * r3x - pdc * r3z
    cd23z = pdc * r3y - 0.0 * r3x

    f[0] = -(r2x * c34x + r2y * c34y + r2z * c34z)
    f[1] = r1x * c34x + r1y * c34y + r1z * c34z
    f[2] = -(r1x * c24x + r1y * c24y + r1z * c24z)
    f[3] = r1x * c23x + r1y * c23y + r1z * c23z

    for s in range(4):
        for j in range(4):
            jac[s, j] = 0.0
    jac[0, 1] = -(pdc * c34x + 0.0 * c34y + 1.0 * c34z)
    jac[0, 2] = -(r2x * cd34x + r2y * cd34y + r2z * cd34z)
    jac[0, 3] = -(r2x * c3d4x + r2y * c3d4y + r2z * c3d4z)
    jac[1, 0] = pcc * c34x + 0.0 * c34y + 1.0 * c34z
    jac[1, 2] = r1x * cd34x + r1y * cd34y + r1z * cd34z
    jac[1, 3] = r1x * c3d4x + r1y * c3d4y + r1z * c3d4z
    jac[2, 0] = -(pcc * c24x + 0.0 * c24y + 1.0 * c24z)
    jac[2, 1] = -(r1x * cd24x + r1y * cd24y + r1z * cd24z)
    jac[2, 3] = -(r1x * c2d4x + r1y * c2d4y + r1z * c2d4z)
    jac[3, 0] = pcc * c23x + 0.0 * c23y + 1.0 * c23z
    jac[3, 1] = r1x * cd23x + r1y * cd23y + r1z * cd23z
    jac[3, 2] = r1x * c2d3x + r1y * c2d3y + r1z * c2d3z


@nb.njit(cache=_SIG_CACHE, inline="always")
def _det4(a):
    m01 = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    m02 = a[0, 0] * a[1, 2] - a[0, 2] * a[1, 0]
    m03 = a[0, 0] * a[1, 3] - a[0, 3] * a[1, 0]
    m12 = a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]
    m13 = a[0, 1] * a[1, 3] - a[0, 3] * a[1, 1]
    m23 = a[0, 2] * a[1, 3] - a[0, 3] * a[1, 2]
    n01 = a[2, 0] * a[3, 1] - a[2, 1] * a[3, 0]
    n02 = a[2, 0] * a[3, 2] - a[2, 2] * a[3, 0]
    n03 = a[2, 0] * a[3, 3] - a[2, 3] * a[3, 0]
    n12 = a[2, 1] * a[3, 2] - a[2, 2] * a[3, 1]
    n13 = a[2, 1] * a[3, 3] - a[2, 3] * a[3, 1]
    n23 = a[2, 2] * a[3, 3] - a[2, 3] * a[3, 2]
    return m01 * n23 - m02 * n13 + m03 * n12 + m12 * n03 - m13 * n02 + m23 * n01


@nb.njit(cache=_SIG_CACHE, inline="always")
def _discounted_pi(p, q, w_state, nu0, lam, a, ai):
    """Discounted payoff via the 4x4 Cramer solve; mirrors
    payofflab.payoff.discounted_payoff_raw (w_state in state order)."""
    # transition matrix columns (CC, CD, DC, DD); y view swaps cd/dc rows
    for row in range(4):
        pr = p[row]
        if row == 0:
            qr = q[0]
        elif row == 1:
            qr = q[2]
        elif row == 2:
            qr = q[1]
        else:
            qr = q[3]
        m0 = pr * qr
        m1 = pr * (1.0 - qr)
        m2 = (1.0 - pr) * qr
        m3 = (1.0 - pr) * (1.0 - qr)
        # a = I - lam * M^T
        a[0, row] = (1.0 if row == 0 else 0.0) - lam * m0
        a[1, row] = (1.0 if row == 1 else 0.0) - lam * m1
        a[2, row] = (1.0 if row == 2 else 0.0) - lam * m2
        a[3, row] = (1.0 if row == 3 else 0.0) - lam * m3
    det = _det4(a)
    pi = 0.0
    for i in range(4):
        for r in range(4):
            for c in range(4):
                ai[r, c] = a[r, c]
        for r in range(4):
            ai[r, i] = (1.0 - lam) * nu0[r]
        pi += (_det4(ai) / det) * w_state[i]
    return pi


@nb.njit(cache=_SIG_CACHE)
def _pga_step(p, q, wy, wf, nu0, eps, chain, f, jac, e, grad):
    """One gradient/payoff evaluation at the current intended strategy.

    Returns the objective payoff; fills ``grad`` with the gradient of the
    objective with respect to the intended strategy.  ``wy`` is in f order
    (CC, DC, CD, DD); ``wf`` is Y's payoffs in state order for the fallback.
    """
    for j in range(4):
        e[j] = eps + chain * q[j] if eps != 0.0 else q[j]
    _f_and_jac(p, e, f, jac)
    sigma = ((f[0] + f[1]) + f[2]) + f[3]
    if abs(sigma) < DEGENERACY_EPS:
        a = np.empty((4, 4))
        ai = np.empty((4, 4))
        pi = _discounted_pi(p, e, wf, nu0, FALLBACK_LAMBDA, a, ai)
        eh = np.empty(4)
        for j in range(4):
            for k in range(4):
                eh[k] = e[k]
            eh[j] = e[j] + FALLBACK_STEP
            hi = _discounted_pi(p, eh, wf, nu0, FALLBACK_LAMBDA, a, ai)
            eh[j] = e[j] - FALLBACK_STEP
            lo = _discounted_pi(p, eh, wf, nu0, FALLBACK_LAMBDA, a, ai)
            grad[j] = (hi - lo) / (2.0 * FALLBACK_STEP) * chain
        return pi
    numer = ((f[0] * wy[0] + f[1] * wy[1]) + f[2] * wy[2]) + f[3] * wy[3]
    pi = numer / sigma
    for j in range(4):
        jw = ((jac[0, j] * wy[0] + jac[1, j] * wy[1]) + jac[2, j] * wy[2]) + jac[3, j] * wy[3]
        js = ((jac[0, j] + jac[1, j]) + jac[2, j]) + jac[3, j]
        grad[j] = (jw * sigma - numer * js) / (sigma * sigma) * chain
    return pi


@nb.njit(cache=_SIG_CACHE)
def pga_endpoints(p_all, q0, wy, wf, nu0, eta, tol, eps, max_iter,
                  q_final, n_steps, term):
    """Run every lane to termination; endpoint bookkeeping only."""
    n = q0.shape[0]
    chain = 1.0 - 2.0 * eps
    f = np.empty(4)
    jac = np.empty((4, 4))
    e = np.empty(4)
    grad = np.empty(4)
    q = np.empty(4)
    for lane in range(n):
        p = p_all[lane]
        for j in range(4):
            q[j] = q0[lane, j]
        pi_prev = 0.0
        best = 0.0
        stall = 0
        it = 0
        code = 1
        while True:
            pi = _pga_step(p, q, wy, wf, nu0, eps, chain, f, jac, e, grad)
            if it == 0:
                conv = False
                best = pi
                stall = 0
            else:
                conv = abs(pi - pi_prev) < tol
                if pi > best + tol:
                    best = pi
                    stall = 0
                else:
                    stall += 1
                if stall >= STALL_WINDOW:
                    conv = True
            if conv:
                code = 0
                break
            if it >= max_iter:
                code = 1
                break
            for j in range(4):
                v = q[j] + eta * grad[j]
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
                q[j] = v
            pi_prev = pi
            it += 1
        for j in range(4):
            q_final[lane, j] = q[j]
        n_steps[lane] = it
        term[lane] = code


@nb.njit(cache=_SIG_CACHE)
def pga_lane_segment(p, state, wy, wf, nu0, eta, tol, eps, max_iter,
                     record_every, max_steps, rec):
    """Advance one recorded lane by at most ``max_steps`` evaluations.

    ``state`` = [q0..q3, pi_prev, best, stall, it, started]; ``rec`` receives
    rows (it, q0..q3, pi, grad_max_norm).  Returns (rows_written, code) with
    code -1 while the lane is still running, else the termination code.
    """
    chain = 1.0 - 2.0 * eps
    f = np.empty(4)
    jac = np.empty((4, 4))
    e = np.empty(4)
    grad = np.empty(4)
    q = state[0:4]
    pi_prev = state[4]
    best = state[5]
    stall = int(state[6])
    it = int(state[7])
    started = state[8] != 0.0
    wrote = 0
    code = -1
    steps = 0
    while steps < max_steps:
        pi = _pga_step(p, q, wy, wf, nu0, eps, chain, f, jac, e, grad)
        gnorm = abs(grad[0])
        for j in range(1, 4):
            if abs(grad[j]) > gnorm:
                gnorm = abs(grad[j])
        if not started:
            conv = False
            best = pi
            stall = 0
            started = True
        else:
            conv = abs(pi - pi_prev) < tol
            if pi > best + tol:
                best = pi
                stall = 0
            else:
                stall += 1
            if stall >= STALL_WINDOW:
                conv = True
        done = conv or it >= max_iter
        if it % record_every == 0 or done:
            rec[wrote, 0] = it
            for j in range(4):
                rec[wrote, 1 + j] = q[j]
            rec[wrote, 5] = pi
            rec[wrote, 6] = gnorm
            wrote += 1
        if done:
            code = 0 if conv else 1
            break
        for j in range(4):
            v = q[j] + eta * grad[j]
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            q[j] = v
        pi_prev = pi
        it += 1
        steps += 1
    state[4] = pi_prev
    state[5] = best
    state[6] = stall
    state[7] = it
    state[8] = 1.0 if started else 0.0
    return wrote, code


@nb.njit(cache=_SIG_CACHE)
def lrs_block(p_all, q, pi, rejections, active, radius, blocks, start_it,
              block_len, wf, nu0, lam, tol, patience, max_iter,
              q_final, pi_final, n_steps, term):
    """Advance all active lanes through one block of pregenerated candidates.

    Lane ``i`` consumes ``blocks[i, cursor, :]`` at global step
    ``start_it + cursor``; lanes that stall or hit the cap are finalized in
    place and deactivated.  Returns the number of still-active lanes.
    """
    n = q.shape[0]
    cand = np.empty(4)
    a = np.empty((4, 4))
    ai = np.empty((4, 4))
    remaining = 0
    for lane in range(n):
        if not active[lane]:
            continue
        p = p_all[lane]
        rad = radius[lane]
        rej = rejections[lane]
        cur_pi = pi[lane]
        code = -1
        it_done = 0
        for cursor in range(block_len):
            it = start_it + cursor
            for j in range(4):
                v = q[lane, j] + rad * (2.0 * blocks[lane, cursor, j] - 1.0)
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
                cand[j] = v
            pi_cand = _discounted_pi(p, cand, wf, nu0, lam, a, ai)
            if pi_cand - cur_pi > tol:
                for j in range(4):
                    q[lane, j] = cand[j]
                cur_pi = pi_cand
                rej = 0
            else:
                rej += 1
            it_done = it + 1
            if rej >= patience:
                code = 2
                break
            if it_done >= max_iter:
                code = 1
                break
        pi[lane] = cur_pi
        rejections[lane] = rej
        if code >= 0:
            active[lane] = False
            for j in range(4):
                q_final[lane, j] = q[lane, j]
            pi_final[lane] = cur_pi
            n_steps[lane] = it_done
            term[lane] = code
        else:
            remaining += 1
    return remaining
