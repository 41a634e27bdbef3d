"""Equilibrated constrained-mixture wall model on thin-walled patches.

The vessel wall is a mixture of elastin (isotropic neo-Hookean), circumferential
smooth muscle and four collagen fiber families (Fung-type exponential fibers:
circumferential, axial and two diagonal families at +/- ``alpha_0`` from the
axis).  Constituents that turn over (muscle, collagen) sit at their deposition
stretch in any long-term equilibrium, so their uniaxial stress is a constant of
the material parameters.  Elastin never turns over: its referential mass is
conserved and only its stiffness degrades under an insult.

A patch is the thin-wall reduction of one (theta, z) wall location.  Its
equilibrium state solves three coupled equations: circumferential Laplace
balance against the (support-corrected) luminal pressure, the mechanobiological
closure ``dsig = K * dtau`` between the intramural and wall-shear stimuli, and
conservation of the muscle/collagen referential mass ratio.

Units: mm, kg, s; stress in kPa (1 kPa = 1 kg/(mm*s^2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, GeometryError, OutOfRangeError, ParameterError
from . import kernels

__all__ = [
    "MixtureParams",
    "HomeostaticState",
    "PatchState",
    "PatchLoads",
    "ims_invariant",
    "equilibrated_stimuli",
    "fiber_cauchy_stress",
    "fiber_energy",
    "elastin_extra_stress",
    "elastin_direction_energy",
    "mixture_extra_stress",
    "lagrange_multiplier",
    "preload_homeostasis",
    "gr_wss_stimulus",
    "solve_patch_equilibrium",
]

_FRACTION_TOL = 1e-12
_EXP_ARG_MAX = 700.0  # beyond this exp() overflows float64


@dataclass(frozen=True)
class MixtureParams:
    """Wall geometry, composition and constituent material constants."""

    a_o: float = 0.647          # original inner radius [mm]
    h_o: float = 0.04           # original thickness [mm]
    l_o: float = 15.0           # vessel length [mm]
    phi_e_o: float = 0.34       # elastin mass fraction
    phi_m_o: float = 0.33       # smooth muscle mass fraction
    phi_c_o: float = 0.33       # collagen mass fraction
    beta_theta: float = 0.056   # circumferential collagen fraction
    beta_z: float = 0.067       # axial collagen fraction
    beta_d: float = 0.877       # diagonal collagen fraction (both families)
    alpha_0: float = math.radians(29.9)  # diagonal fiber angle from axis [rad]
    c_e: float = 89.71          # elastin stiffness [kPa]
    c1_m: float = 261.4         # muscle Fung prefactor [kPa]
    c2_m: float = 0.24          # muscle Fung exponent
    c1_c: float = 234.9         # collagen Fung prefactor [kPa]
    c2_c: float = 4.08          # collagen Fung exponent
    G_e_theta: float = 1.90     # elastin deposition stretches
    G_e_z: float = 1.62
    G_m: float = 1.20           # muscle deposition stretch
    G_c: float = 1.25           # collagen deposition stretch
    eta: float = 1.0            # muscle-to-collagen turnover ratio (only 1 supported)
    K_tau_sigma_o: float = 0.0  # original shear-to-intramural gain ratio
    k_support: float = 2.0      # external tissue support stiffness [kPa/mm]

    @property
    def G_e_r(self) -> float:
        """Radial elastin deposition stretch; incompressible deposition."""
        return 1.0 / (self.G_e_theta * self.G_e_z)

    def __post_init__(self):
        if abs(self.phi_e_o + self.phi_m_o + self.phi_c_o - 1.0) > _FRACTION_TOL:
            raise ParameterError("mass fractions must sum to 1")
        if abs(self.beta_theta + self.beta_z + self.beta_d - 1.0) > _FRACTION_TOL:
            raise ParameterError("collagen orientation fractions must sum to 1")
        for name in ("a_o", "h_o", "l_o", "c_e", "c1_m", "c1_c",
                     "G_e_theta", "G_e_z", "G_m", "G_c"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be strictly positive")
        for name in ("phi_e_o", "phi_m_o", "phi_c_o"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ParameterError(f"{name} must lie in (0, 1)")
        if self.K_tau_sigma_o < 0.0:
            raise ParameterError("K_tau_sigma_o must be >= 0")
        if self.k_support < 0.0:
            raise ParameterError("k_support must be >= 0")
        if self.eta != 1.0:
            raise ParameterError(
                "only eta = 1 is supported (muscle/collagen mass ratio fixed)")

    def with_gain(self, gain: float) -> "MixtureParams":
        return replace(self, K_tau_sigma_o=float(gain))

    # Constant equilibrium fiber stresses and orientation weights.
    def fiber_constants(self):
        s_m = fiber_cauchy_stress(self.G_m, self.c1_m, self.c2_m)
        s_c = fiber_cauchy_stress(self.G_c, self.c1_c, self.c2_c)
        w_t = self.beta_theta + self.beta_d * math.sin(self.alpha_0) ** 2
        w_z = self.beta_z + self.beta_d * math.cos(self.alpha_0) ** 2
        return s_m, s_c, w_t, w_z


@dataclass(frozen=True)
class HomeostaticState:
    """Global set points of the original homeostatic cylinder."""

    P_o: float        # transmural pressure [kPa]
    sigma_Io: float   # homeostatic intramural stress invariant [kPa]
    tau_wo: float     # homeostatic wall shear magnitude [kPa]
    Q_o: float        # homeostatic flow rate [mm^3/s]

    def __post_init__(self):
        if self.sigma_Io <= 0.0 or self.tau_wo <= 0.0:
            raise ParameterError("homeostatic set points must be positive")


@dataclass(frozen=True)
class PatchState:
    """Converged per-(theta, z) mechanobiological equilibrium."""

    lambda_theta: float
    lambda_z: float
    h_h: float
    a_h: float
    J_h: float
    phi_e_h: float
    phi_m_h: float
    phi_c_h: float
    sigma_I_h: float
    sigma_x_I_h: float
    tau_w_h: float
    p_h: float
    dsig: float
    dtau: float
    c_e_h: float
    K_h: float
    newton_iters: int = 0


@dataclass(frozen=True)
class PatchLoads:
    """Loads driving one patch solve.

    ``wall_shear`` is required unless ``gr_mode`` is set, in which case the
    shear stimulus is derived from the patch geometry (Poiseuille scaling).
    """

    pressure: float
    wall_shear: float | None = None
    gr_mode: bool = False


def ims_invariant(stress_tensor) -> float:
    """Intramural stress invariant: trace of a symmetric 3x3 tensor over 3."""
    t = np.asarray(stress_tensor, dtype=float)
    if t.shape != (3, 3):
        raise ParameterError("stress tensor must be 3x3")
    if np.max(np.abs(t - t.T)) > 1e-12 * max(1.0, np.max(np.abs(t))):
        raise ParameterError("stress tensor must be symmetric")
    return float(np.trace(t)) / 3.0


def equilibrated_stimuli(sigma_I: float, tau_w: float,
                         home: HomeostaticState) -> tuple[float, float]:
    """Deviations of the regulated variables from their set points."""
    if home.sigma_Io <= 0.0 or home.tau_wo <= 0.0:
        raise ParameterError("homeostatic set points must be positive")
    return sigma_I / home.sigma_Io - 1.0, tau_w / home.tau_wo - 1.0


def fiber_energy(lam: float, c1: float, c2: float) -> float:
    """Fung fiber strain energy c1/(4 c2) (exp(c2 (lam^2-1)^2) - 1)."""
    arg = c2 * (lam * lam - 1.0) ** 2
    if arg > _EXP_ARG_MAX:
        raise OutOfRangeError(f"fiber energy overflow at stretch {lam}")
    return c1 / (4.0 * c2) * (math.exp(arg) - 1.0)


def fiber_cauchy_stress(lam: float, c1: float, c2: float) -> float:
    """Uniaxial Cauchy stress of a Fung fiber: lam * dW/dlam.

    Equals c1 lam^2 (lam^2 - 1) exp(c2 (lam^2 - 1)^2).
    """
    if lam <= 0.0:
        raise ParameterError("fiber stretch must be positive")
    i4 = lam * lam
    arg = c2 * (i4 - 1.0) ** 2
    if arg > _EXP_ARG_MAX:
        raise OutOfRangeError(f"fiber stress overflow at stretch {lam}")
    return c1 * i4 * (i4 - 1.0) * math.exp(arg)


def elastin_direction_energy(lam: float, G: float, c_e: float) -> float:
    """Per-direction neo-Hookean energy term (c_e/2) (lam G)^2."""
    return 0.5 * c_e * (lam * G) ** 2


def elastin_extra_stress(lambda_theta: float, lambda_z: float,
                         params: MixtureParams,
                         c_e_h: float | None = None) -> tuple[float, float, float]:
    """Principal elastin Cauchy extra stresses (theta, z, r).

    Elastin deforms isochorically within the patch (radial stretch
    1/(lambda_theta lambda_z)); each principal component is
    c_e_h (lambda_i G_i)^2.
    """
    if lambda_theta <= 0.0 or lambda_z <= 0.0:
        raise ParameterError("stretches must be positive")
    ce = params.c_e if c_e_h is None else c_e_h
    lam_r = 1.0 / (lambda_theta * lambda_z)
    return (ce * (lambda_theta * params.G_e_theta) ** 2,
            ce * (lambda_z * params.G_e_z) ** 2,
            ce * (lam_r * params.G_e_r) ** 2)


def _sigma_x_components(lam_t, lam_z, J_h, phi_c_h, c_e_h, params):
    """Mixture extra-stress principal components (theta, z, r)."""
    s_m, s_c, w_t, w_z = params.fiber_constants()
    phi_e_h = params.phi_e_o / J_h
    phi_m_h = 1.0 - phi_e_h - phi_c_h
    el_t, el_z, el_r = elastin_extra_stress(lam_t, lam_z, params, c_e_h)
    sx_t = phi_e_h * el_t + phi_m_h * s_m + phi_c_h * w_t * s_c
    sx_z = phi_e_h * el_z + phi_c_h * w_z * s_c
    sx_r = phi_e_h * el_r
    return sx_t, sx_z, sx_r


def mixture_extra_stress(state: PatchState, params: MixtureParams) -> np.ndarray:
    """Mass-fraction-weighted mixture extra stress as diag(theta, z, r).

    Muscle acts circumferentially; collagen splits into circumferential,
    axial and two diagonal families, the latter projecting with sin^2/cos^2
    of the diagonal angle onto (theta, z).  Fibers that turn over carry
    their deposition stretch.
    """
    total = state.phi_e_h + state.phi_m_h + state.phi_c_h
    if abs(total - 1.0) > 1e-10:
        raise ParameterError("patch mass fractions must sum to 1")
    sx_t, sx_z, sx_r = _sigma_x_components(
        state.lambda_theta, state.lambda_z, state.J_h, state.phi_c_h,
        state.c_e_h, params)
    return np.diag([sx_t, sx_z, sx_r])


def lagrange_multiplier(sigma_x_I_h: float, home: HomeostaticState,
                        K_h: float, tau_w_h: float) -> float:
    """Equilibrated Lagrange multiplier enforcing the stimulus closure.

    p_h = sigma_x_I - sigma_Io [1 + K (tau_w/tau_wo - 1)]; the resulting
    sigma^s = sigma^x - p_h I satisfies dsig = K dtau by construction.
    """
    if home.sigma_Io <= 0.0 or home.tau_wo <= 0.0:
        raise ParameterError("homeostatic set points must be positive")
    return sigma_x_I_h - home.sigma_Io * (
        1.0 + K_h * (tau_w_h / home.tau_wo - 1.0))


def preload_homeostasis(params: MixtureParams,
                        fluid_ref: tuple[float, float],
                        rtol: float = 1e-12,
                        max_iter: int = 100) -> HomeostaticState:
    """Original homeostatic state of the uniform cylinder.

    Solves the thin-wall statics for the in-vivo pressure P_o at identity
    deformation: circumferential balance sigma_theta = P_o a_o/h_o with the
    Lagrange multiplier fixed by the mean radial stress -P_o/2.  The wall
    shear set point comes from Poiseuille flow at the reference flow rate.

    ``fluid_ref`` is (Q_o [mm^3/s], viscosity [kg/(mm*s)]).
    """
    q_o, mu = fluid_ref
    if q_o <= 0.0 or mu <= 0.0:
        raise ParameterError("flow rate and viscosity must be positive")
    sx_t, sx_z, sx_r = _sigma_x_components(
        1.0, 1.0, 1.0, params.phi_c_o, params.c_e, params)
    geom = params.a_o / params.h_o

    def balance(p):
        p_h = sx_r + 0.5 * p
        return (sx_t - p_h) - p * geom

    # scalar Newton; the balance is linear in P so this converges in one step
    p = max((sx_t - sx_r) / (geom + 0.5), 1e-6)
    for _ in range(max_iter):
        res = balance(p)
        if abs(res) <= rtol * max(abs(sx_t - sx_r), 1.0):
            break
        h = 1e-7 * max(abs(p), 1.0)
        dres = (balance(p + h) - balance(p - h)) / (2.0 * h)
        p -= res / dres
    else:
        raise ConvergenceError(
            "preload pressure iteration did not converge", residual=res)

    p_h = sx_r + 0.5 * p
    sigma_io = (sx_t + sx_z + sx_r) / 3.0 - p_h
    tau_wo = 4.0 * mu * q_o / (math.pi * params.a_o ** 3)
    return HomeostaticState(P_o=p, sigma_Io=sigma_io, tau_wo=tau_wo, Q_o=q_o)


def gr_wss_stimulus(lambda_theta: float, lambda_r: float,
                    r_o: float, a_o: float) -> float:
    """Shear stimulus from geometry alone (Poiseuille scaling).

    The evolved local radius is approximated by
    (r_o/a_o) lambda_theta - (r_o/a_o - 1) lambda_r in units of a_o; the
    stimulus is its inverse cube minus one.
    """
    if lambda_theta <= 0.0 or lambda_r <= 0.0:
        raise ParameterError("stretches must be positive")
    if r_o < a_o:
        raise ParameterError("r_o must be >= a_o")
    ratio = r_o / a_o
    radius = ratio * lambda_theta - (ratio - 1.0) * lambda_r
    if radius <= 0.0:
        raise GeometryError("evolved radius expression is nonpositive")
    return radius ** -3.0 - 1.0


def solve_patch_equilibrium(loads: PatchLoads,
                            insult: tuple[float, float],
                            params: MixtureParams,
                            home: HomeostaticState,
                            x0: tuple[float, float, float] | None = None,
                            lambda_z: float = 1.0,
                            tol: float = 1e-9,
                            max_iter: int = 50,
                            max_halvings: int = 20) -> PatchState:
    """Newton-solve one patch equilibrium under the given loads and insult.

    ``insult`` is the (degraded elastin stiffness, degraded gain ratio) pair.
    Unknowns are (lambda_theta, J_h, phi_c_h); the axial stretch is pinned
    (caps fixed).  Residual infinity norm < ``tol`` (stimulus scale) at
    return.  Raises ConvergenceError on Newton failure.
    """
    c_e_h, K_h = insult
    if not math.isfinite(loads.pressure):
        raise ParameterError("pressure must be finite")
    if loads.gr_mode:
        tau_ratio = 1.0
    else:
        if loads.wall_shear is None:
            raise ParameterError("wall_shear required unless gr_mode is set")
        tau_ratio = loads.wall_shear / home.tau_wo
    if x0 is None:
        x0 = (1.0, 1.0, params.phi_c_o)

    s_m, s_c, w_t, w_z = params.fiber_constants()
    lam_t, vol_J, phi_c, iters, flag, rmax = kernels.patch_newton(
        x0[0], x0[1], x0[2], lambda_z, loads.pressure, tau_ratio,
        loads.gr_mode, K_h, c_e_h, params.a_o, params.h_o,
        params.G_e_theta, params.G_e_z, params.G_e_r, s_m, s_c, w_t, w_z,
        params.phi_e_o, params.phi_m_o, params.phi_c_o, params.k_support,
        home.sigma_Io, tol, max_iter, max_halvings)
    if flag == kernels.PATCH_MAX_ITER:
        raise ConvergenceError(
            f"patch Newton did not converge in {max_iter} iterations",
            residual=rmax)
    if flag == kernels.PATCH_INFEASIBLE:
        raise ConvergenceError(
            "patch Newton left the feasible region", residual=rmax)

    (_, _, _, sx_t, sx_z, sx_r, p_h, dsig, dtau, _) = kernels.patch_system(
        lam_t, vol_J, phi_c, lambda_z, loads.pressure, tau_ratio,
        loads.gr_mode, K_h, c_e_h, params.a_o, params.h_o,
        params.G_e_theta, params.G_e_z, params.G_e_r, s_m, s_c, w_t, w_z,
        params.phi_e_o, params.phi_m_o, params.phi_c_o, params.k_support,
        home.sigma_Io)
    sigma_x_i = (sx_t + sx_z + sx_r) / 3.0
    phi_e_h = params.phi_e_o / vol_J
    return PatchState(
        lambda_theta=lam_t,
        lambda_z=lambda_z,
        h_h=params.h_o * vol_J / (lam_t * lambda_z),
        a_h=lam_t * params.a_o,
        J_h=vol_J,
        phi_e_h=phi_e_h,
        phi_m_h=1.0 - phi_e_h - phi_c,
        phi_c_h=phi_c,
        sigma_I_h=sigma_x_i - p_h,
        sigma_x_I_h=sigma_x_i,
        tau_w_h=home.tau_wo * (1.0 + dtau),
        p_h=p_h,
        dsig=dsig,
        dtau=dtau,
        c_e_h=c_e_h,
        K_h=K_h,
        newton_iters=iters,
    )
