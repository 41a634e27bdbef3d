"""Hot numerical kernels with optional numba acceleration.

The per-patch equilibrium Newton iteration is the innermost loop of every
growth simulation (it runs once per patch, per load step, per coupling
iteration).  The implementation below is written as plain scalar Python so
that the exact same source can either be compiled with ``numba.njit`` or run
as-is on CPython/numpy scalars.

Backend selection: numba is used when importable unless the environment
variable ``VESSELFSG_NUMBA`` is set to ``0``/``false``/``off``/``no``, in
which case the pure-Python/numpy twin runs.  Both twins execute the same
statements in the same order; see ``benchmarks/bench_patch_solve.py`` for a
throughput comparison.
"""

import math
import os

__all__ = [
    "NUMBA_ENABLED",
    "patch_newton",
    "patch_newton_python",
    "patch_newton_numba",
    "PATCH_OK",
    "PATCH_MAX_ITER",
    "PATCH_INFEASIBLE",
]

# Return flags of the patch Newton kernel.
PATCH_OK = 0
PATCH_MAX_ITER = 1
PATCH_INFEASIBLE = 2


def _patch_system(lam_t, vol_J, phi_c, lam_z, p_load, tau_ratio, gr_mode,
                  gain_h, ce_h, a_o, h_o, g_t, g_z, g_r, s_m, s_c, w_t, w_z,
                  phi_e_o, phi_m_o, phi_c_o, k_support, sigma_io):
    """Thin-wall patch equilibrium system at state (lam_t, vol_J, phi_c).

    Returns the three scaled residuals plus the derived quantities needed to
    assemble a full patch state:

    R1  circumferential balance  sigma_theta = P_eff a_h / h_h,
    R2  mechanobiological gap    dsig - gain_h * dtau,
    R3  muscle/collagen referential mass ratio held at its original value.

    Muscle and collagen carry their deposition stretch at equilibrium, so
    their uniaxial stresses enter as the precomputed constants ``s_m, s_c``.
    Elastin deforms with the patch (radial stretch 1/(lam_t*lam_z)) and its
    referential mass is conserved: phi_e_h = phi_e_o / vol_J.
    """
    a_h = lam_t * a_o
    h_h = h_o * vol_J / (lam_t * lam_z)
    d_outer = (a_h + h_h) - (a_o + h_o)
    p_eff = p_load - k_support * d_outer

    phi_e_h = phi_e_o / vol_J
    phi_m_h = 1.0 - phi_e_h - phi_c
    lam_r_e = 1.0 / (lam_t * lam_z)

    sx_t = phi_e_h * ce_h * (lam_t * g_t) ** 2 + phi_m_h * s_m + phi_c * w_t * s_c
    sx_z = phi_e_h * ce_h * (lam_z * g_z) ** 2 + phi_c * w_z * s_c
    sx_r = phi_e_h * ce_h * (lam_r_e * g_r) ** 2

    # Mean through-thickness radial stress of a pressurized thin wall is
    # -P_eff/2; this fixes the Lagrange multiplier given the deformation.
    p_h = sx_r + 0.5 * p_eff
    sig_i = (sx_t + sx_z + sx_r) / 3.0 - p_h
    dsig = sig_i / sigma_io - 1.0
    if gr_mode:
        dtau = lam_t ** -3.0 - 1.0
    else:
        dtau = tau_ratio - 1.0

    r1 = (sx_t - p_h - p_eff * a_h / h_h) / sigma_io
    r2 = dsig - gain_h * dtau
    r3 = phi_m_h * phi_c_o - phi_c * phi_m_o
    return r1, r2, r3, sx_t, sx_z, sx_r, p_h, dsig, dtau, p_eff


def _feasible(lam_t, vol_J, phi_c, phi_e_o):
    if not (lam_t > 1e-3 and lam_t < 1e3):
        return False
    if not (vol_J > 1e-9 and vol_J < 1e9):
        return False
    if not (phi_c > 0.0 and phi_c < 1.0):
        return False
    if 1.0 - phi_e_o / vol_J - phi_c <= 0.0:
        return False
    return True


def _make_newton(system, feasible):
    def patch_newton(lam0, j0, pc0, lam_z, p_load, tau_ratio, gr_mode,
                     gain_h, ce_h, a_o, h_o, g_t, g_z, g_r, s_m, s_c,
                     w_t, w_z, phi_e_o, phi_m_o, phi_c_o, k_support,
                     sigma_io, tol, max_iter, max_halvings):
        lam_t = lam0
        vol_J = j0
        phi_c = pc0
        rmax = math.inf
        for it in range(max_iter):
            r1, r2, r3, _, _, _, _, _, _, _ = system(
                lam_t, vol_J, phi_c, lam_z, p_load, tau_ratio, gr_mode,
                gain_h, ce_h, a_o, h_o, g_t, g_z, g_r, s_m, s_c, w_t, w_z,
                phi_e_o, phi_m_o, phi_c_o, k_support, sigma_io)
            rmax = max(abs(r1), abs(r2), abs(r3))
            if rmax < tol:
                return lam_t, vol_J, phi_c, it, PATCH_OK, rmax
            if not math.isfinite(rmax):
                return lam_t, vol_J, phi_c, it, PATCH_INFEASIBLE, rmax

            # central-difference 3x3 Jacobian
            jac = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
            x0 = lam_t
            x1 = vol_J
            x2 = phi_c
            for col in range(3):
                if col == 0:
                    h = 1e-7 * max(abs(x0), 1.0)
                    ap = system(x0 + h, x1, x2, lam_z, p_load, tau_ratio,
                                gr_mode, gain_h, ce_h, a_o, h_o, g_t, g_z,
                                g_r, s_m, s_c, w_t, w_z, phi_e_o, phi_m_o,
                                phi_c_o, k_support, sigma_io)
                    am = system(x0 - h, x1, x2, lam_z, p_load, tau_ratio,
                                gr_mode, gain_h, ce_h, a_o, h_o, g_t, g_z,
                                g_r, s_m, s_c, w_t, w_z, phi_e_o, phi_m_o,
                                phi_c_o, k_support, sigma_io)
                elif col == 1:
                    h = 1e-7 * max(abs(x1), 1.0)
                    ap = system(x0, x1 + h, x2, lam_z, p_load, tau_ratio,
                                gr_mode, gain_h, ce_h, a_o, h_o, g_t, g_z,
                                g_r, s_m, s_c, w_t, w_z, phi_e_o, phi_m_o,
                                phi_c_o, k_support, sigma_io)
                    am = system(x0, x1 - h, x2, lam_z, p_load, tau_ratio,
                                gr_mode, gain_h, ce_h, a_o, h_o, g_t, g_z,
                                g_r, s_m, s_c, w_t, w_z, phi_e_o, phi_m_o,
                                phi_c_o, k_support, sigma_io)
                else:
                    h = 1e-7 * max(abs(x2), 1.0)
                    ap = system(x0, x1, x2 + h, lam_z, p_load, tau_ratio,
                                gr_mode, gain_h, ce_h, a_o, h_o, g_t, g_z,
                                g_r, s_m, s_c, w_t, w_z, phi_e_o, phi_m_o,
                                phi_c_o, k_support, sigma_io)
                    am = system(x0, x1, x2 - h, lam_z, p_load, tau_ratio,
                                gr_mode, gain_h, ce_h, a_o, h_o, g_t, g_z,
                                g_r, s_m, s_c, w_t, w_z, phi_e_o, phi_m_o,
                                phi_c_o, k_support, sigma_io)
                jac[0][col] = (ap[0] - am[0]) / (2.0 * h)
                jac[1][col] = (ap[1] - am[1]) / (2.0 * h)
                jac[2][col] = (ap[2] - am[2]) / (2.0 * h)

            # 3x3 Gaussian elimination with partial pivoting
            a00, a01, a02 = jac[0][0], jac[0][1], jac[0][2]
            a10, a11, a12 = jac[1][0], jac[1][1], jac[1][2]
            a20, a21, a22 = jac[2][0], jac[2][1], jac[2][2]
            b0, b1, b2 = -r1, -r2, -r3

            p0, p1, p2 = abs(a00), abs(a10), abs(a20)
            if p1 >= p0 and p1 >= p2:
                a00, a01, a02, a10, a11, a12 = a10, a11, a12, a00, a01, a02
                b0, b1 = b1, b0
            elif p2 >= p0 and p2 >= p1:
                a00, a01, a02, a20, a21, a22 = a20, a21, a22, a00, a01, a02
                b0, b2 = b2, b0
            if a00 == 0.0:
                return lam_t, vol_J, phi_c, it, PATCH_INFEASIBLE, rmax
            m1 = a10 / a00
            m2 = a20 / a00
            a11 -= m1 * a01
            a12 -= m1 * a02
            b1 -= m1 * b0
            a21 -= m2 * a01
            a22 -= m2 * a02
            b2 -= m2 * b0
            if abs(a21) > abs(a11):
                a11, a12, a21, a22 = a21, a22, a11, a12
                b1, b2 = b2, b1
            if a11 == 0.0:
                return lam_t, vol_J, phi_c, it, PATCH_INFEASIBLE, rmax
            m3 = a21 / a11
            a22 -= m3 * a12
            b2 -= m3 * b1
            if a22 == 0.0:
                return lam_t, vol_J, phi_c, it, PATCH_INFEASIBLE, rmax
            d2 = b2 / a22
            d1 = (b1 - a12 * d2) / a11
            d0 = (b0 - a01 * d1 - a02 * d2) / a00

            # step halving until the iterate stays feasible
            scale = 1.0
            ok = False
            for _ in range(max_halvings + 1):
                nl = lam_t + scale * d0
                nj = vol_J + scale * d1
                npc = phi_c + scale * d2
                if feasible(nl, nj, npc, phi_e_o):
                    ok = True
                    break
                scale *= 0.5
            if not ok:
                return lam_t, vol_J, phi_c, it, PATCH_INFEASIBLE, rmax
            lam_t = lam_t + scale * d0
            vol_J = vol_J + scale * d1
            phi_c = phi_c + scale * d2
        return lam_t, vol_J, phi_c, max_iter, PATCH_MAX_ITER, rmax

    return patch_newton


patch_system_python = _patch_system
patch_newton_python = _make_newton(_patch_system, _feasible)

_flag = os.environ.get("VESSELFSG_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in {"0", "false", "off", "no"}

patch_newton_numba = None
patch_system_numba = None
if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dependency
        NUMBA_ENABLED = False
    else:
        patch_system_numba = njit(cache=False)(_patch_system)
        _feasible_numba = njit(cache=False)(_feasible)
        patch_newton_numba = njit(cache=False)(
            _make_newton(patch_system_numba, _feasible_numba))

if NUMBA_ENABLED:
    patch_newton = patch_newton_numba
    patch_system = patch_system_numba
else:
    patch_newton = patch_newton_python
    patch_system = patch_system_python
