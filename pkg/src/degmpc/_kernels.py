"""Compiled inner loops: dynamics, RK4 with first-order hold, and the reverse sweep.

Extended state layout: ``[theta, delta, z_0 .. z_{n-1}, Upsilon1, Upsilon2]``.
Parameter tuple ``prm`` (see ``plant.kernel_params``):
``(I_h, K_h, B_h, C_0, R_0, alpha, u_th, kappa, A_r, B_r, C_r, S_r)`` with
``B_r``/``C_r`` flattened to 1-D.

The two cost integrals never feed back into the flap dynamics, so the RK4 stages
only propagate ``(theta, delta, z)``; the integrals are accumulated with the
same stage weights, which is algebraically the RK4 step of the augmented system.
"""
import math

import numpy as np
from numba import njit

SOFTPLUS_CUTOFF = 30.0


@njit(cache=True, inline="always")
def damage_rate(u, alpha, u_th, kappa, smooth):
    e = u - u_th
    if not smooth:
        return alpha * e if e > 0.0 else 0.0
    s = kappa * e
    if s > SOFTPLUS_CUTOFF:
        return alpha * e
    return alpha * math.log1p(math.exp(s)) / kappa


@njit(cache=True, inline="always")
def damage_rate_du(u, alpha, u_th, kappa, smooth):
    e = u - u_th
    if not smooth:
        return alpha if e > 0.0 else 0.0
    s = kappa * e
    if s > SOFTPLUS_CUTOFF:
        return alpha
    if s < -SOFTPLUS_CUTOFF:
        return alpha * math.exp(s)
    return alpha / (1.0 + math.exp(-s))


@njit(cache=True, inline="always")
def flap_rhs(x, u, d, prm, out):
    """Flap/radiation derivative into ``out[:n+2]``; returns the energy integrand."""
    I_h, K_h, B_h, C_0, R_0, alpha, u_th, kappa, A, Br, Cr, S = prm
    n = A.shape[0]
    theta = x[0]
    vel = x[1]
    rad = 0.0
    zsz = 0.0
    for i in range(n):
        rad += Cr[i] * x[2 + i]
        acc = Br[i] * vel
        si = 0.0
        for j in range(n):
            acc += A[i, j] * x[2 + j]
            si += S[i, j] * x[2 + j]
        out[2 + i] = acc
        zsz += x[2 + i] * si
    out[0] = vel
    out[1] = (-K_h * theta - B_h * vel - rad + d - C_0 * theta * u) * (1.0 / I_h)
    return B_h * vel * vel + zsz + u / R_0 - d * vel


@njit(cache=True, inline="always")
def flap_vjp(x, u, d, a, a_e, prm, bx):
    """``bx = (df/dx)^T a + a_e dL/dx`` over the flap states; returns the u-part.

    ``bx`` must not alias ``a``.
    """
    I_h, K_h, B_h, C_0, R_0, alpha, u_th, kappa, A, Br, Cr, S = prm
    n = A.shape[0]
    inv_I = 1.0 / I_h
    theta = x[0]
    vel = x[1]
    a_d = a[1]
    bd = a[0] - (B_h * inv_I) * a_d + (2.0 * B_h * vel - d) * a_e
    for j in range(n):
        acc = 0.0
        for i in range(n):
            acc += A[i, j] * a[2 + i]
        bx[2 + j] = acc
        bd += Br[j] * a[2 + j]
    for j in range(n):
        sz = 0.0
        for i in range(n):
            sz += (S[i, j] + S[j, i]) * x[2 + i]
        bx[2 + j] += sz * a_e - (Cr[j] * inv_I) * a_d
    bx[0] = ((-K_h - C_0 * u) * inv_I) * a_d
    bx[1] = bd
    return (-C_0 * theta * inv_I) * a_d + a_e * (1.0 / R_0)


@njit(cache=True)
def deriv(x, u, d, prm, smooth, out):
    n = prm[8].shape[0]
    out[2 + n] = flap_rhs(x, u, d, prm, out)
    out[3 + n] = damage_rate(u, prm[5], prm[6], prm[7], smooth)


@njit(cache=True)
def rk4_step(x, ua, ub, da, db, h, prm, smooth, out):
    q = prm[8].shape[0] + 2
    um = 0.5 * (ua + ub)
    dm = 0.5 * (da + db)
    k1 = np.empty(q)
    k2 = np.empty(q)
    k3 = np.empty(q)
    k4 = np.empty(q)
    y = np.empty(q)
    L1 = flap_rhs(x, ua, da, prm, k1)
    for i in range(q):
        y[i] = x[i] + 0.5 * h * k1[i]
    L2 = flap_rhs(y, um, dm, prm, k2)
    for i in range(q):
        y[i] = x[i] + 0.5 * h * k2[i]
    L3 = flap_rhs(y, um, dm, prm, k3)
    for i in range(q):
        y[i] = x[i] + h * k3[i]
    L4 = flap_rhs(y, ub, db, prm, k4)
    for i in range(q):
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    out[q] = x[q] + h / 6.0 * (L1 + 2.0 * L2 + 2.0 * L3 + L4)
    alpha, u_th, kappa = prm[5], prm[6], prm[7]
    Da = damage_rate(ua, alpha, u_th, kappa, smooth)
    Dm = damage_rate(um, alpha, u_th, kappa, smooth)
    Db = damage_rate(ub, alpha, u_th, kappa, smooth)
    out[q + 1] = x[q + 1] + h / 6.0 * (Da + 4.0 * Dm + Db)


@njit(cache=True)
def simulate(x0, u, d, h, prm, smooth):
    N = u.shape[0]
    m = x0.shape[0]
    traj = np.empty((N, m))
    traj[0] = x0
    for k in range(N - 1):
        rk4_step(traj[k], u[k], u[k + 1], d[k], d[k + 1], h, prm, smooth, traj[k + 1])
    return traj


@njit(cache=True)
def cost_grad(x0, u, d, h, prm, c1, c2, smooth):
    """Cost ``c1 * Upsilon1[N-1] + c2 * Upsilon2[N-1]`` and its exact gradient in ``u``.

    Returns ``(cost, grad, J1, J2, bad_step)``; ``bad_step >= 0`` flags the first
    step whose state became non-finite (cost and gradient are then NaN).
    """
    N = u.shape[0]
    q = x0.shape[0] - 2
    alpha, u_th, kappa = prm[5], prm[6], prm[7]
    grad = np.zeros(N)
    # damage terms depend on the inputs only: samples and step midpoints
    dmg = 0.0
    for k in range(N - 1):
        um = 0.5 * (u[k] + u[k + 1])
        dmg += h / 6.0 * (
            damage_rate(u[k], alpha, u_th, kappa, smooth)
            + 4.0 * damage_rate(um, alpha, u_th, kappa, smooth)
            + damage_rate(u[k + 1], alpha, u_th, kappa, smooth)
        )
        gm = h / 6.0 * 4.0 * damage_rate_du(um, alpha, u_th, kappa, smooth) * 0.5
        grad[k] += c2 * (h / 6.0 * damage_rate_du(u[k], alpha, u_th, kappa, smooth) + gm)
        grad[k + 1] += c2 * (h / 6.0 * damage_rate_du(u[k + 1], alpha, u_th, kappa, smooth) + gm)

    Y = np.empty((N - 1, 4, q))
    x = np.empty(q)
    for i in range(q):
        x[i] = x0[i]
    ene = x0[q]
    k1 = np.empty(q)
    k2 = np.empty(q)
    k3 = np.empty(q)
    k4 = np.empty(q)
    for k in range(N - 1):
        ua = u[k]
        ub = u[k + 1]
        um = 0.5 * (ua + ub)
        da = d[k]
        db = d[k + 1]
        dm = 0.5 * (da + db)
        y1 = Y[k, 0]
        y2 = Y[k, 1]
        y3 = Y[k, 2]
        y4 = Y[k, 3]
        for i in range(q):
            y1[i] = x[i]
        L1 = flap_rhs(y1, ua, da, prm, k1)
        for i in range(q):
            y2[i] = x[i] + 0.5 * h * k1[i]
        L2 = flap_rhs(y2, um, dm, prm, k2)
        for i in range(q):
            y3[i] = x[i] + 0.5 * h * k2[i]
        L3 = flap_rhs(y3, um, dm, prm, k3)
        for i in range(q):
            y4[i] = x[i] + h * k3[i]
        L4 = flap_rhs(y4, ub, db, prm, k4)
        finite = True
        for i in range(q):
            x[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not math.isfinite(x[i]):
                finite = False
        ene += h / 6.0 * (L1 + 2.0 * L2 + 2.0 * L3 + L4)
        if not (finite and math.isfinite(ene)):
            grad[:] = np.nan
            return np.nan, grad, np.nan, np.nan, k
    J1 = ene
    J2 = x0[q + 1] + dmg
    cost = c1 * J1 + c2 * J2

    lam = np.zeros(q)
    a = np.empty(q)
    b4 = np.empty(q)
    b3 = np.empty(q)
    b2 = np.empty(q)
    b1 = np.empty(q)
    w6 = h / 6.0
    w3 = h / 3.0
    for k in range(N - 2, -1, -1):
        ua = u[k]
        ub = u[k + 1]
        um = 0.5 * (ua + ub)
        da = d[k]
        db = d[k + 1]
        dm = 0.5 * (da + db)
        for i in range(q):
            a[i] = w6 * lam[i]
        gb = flap_vjp(Y[k, 3], ub, db, a, w6 * c1, prm, b4)
        for i in range(q):
            a[i] = w3 * lam[i] + h * b4[i]
        gm = flap_vjp(Y[k, 2], um, dm, a, w3 * c1, prm, b3)
        for i in range(q):
            a[i] = w3 * lam[i] + 0.5 * h * b3[i]
        gm += flap_vjp(Y[k, 1], um, dm, a, w3 * c1, prm, b2)
        for i in range(q):
            a[i] = w6 * lam[i] + 0.5 * h * b2[i]
        ga = flap_vjp(Y[k, 0], ua, da, a, w6 * c1, prm, b1)
        grad[k] += ga + 0.5 * gm
        grad[k + 1] += gb + 0.5 * gm
        for i in range(q):
            lam[i] += b1[i] + b2[i] + b3[i] + b4[i]
    return cost, grad, J1, J2, -1
