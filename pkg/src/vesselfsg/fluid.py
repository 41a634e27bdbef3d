"""Steady axisymmetric incompressible flow in a body-fitted tube.

Two fluid models back the growth simulations:

* a reduced model, plain Poiseuille formulas for pressure drop and wall
  shear, and
* a resolved model, the steady axisymmetric Navier-Stokes equations in
  streamfunction-vorticity form on a body-fitted structured grid, solved by
  a damped Newton iteration with a sparse direct factorization.

The domain is mapped to the unit rectangle by ``xi = z`` and
``eta = r / a(z)`` with the wall profile ``a(z)`` interpolated by a natural
cubic spline (its first and second derivatives feed the metric terms).  With
``A = a(xi)``, ``alpha = A'/A`` and ``beta = A''/A`` the physical derivatives
of a field f(z, r) = F(xi, eta) are::

    f_z  = F_xi - eta alpha F_eta
    f_r  = F_eta / A
    f_zz = F_xixi - 2 eta alpha F_xieta + eta^2 alpha^2 F_etaeta
           + eta (2 alpha^2 - beta) F_eta
    f_rr = F_etaeta / A^2

Unknowns are the Stokes streamfunction psi (u_z = psi_r / r,
u_r = -psi_z / r, so continuity is satisfied identically and the volumetric
flux through any cross-section is exactly 2 pi (psi_wall - psi_axis)) and
the azimuthal vorticity omega = u_r,z - u_z,r, which at a no-slip wall
equals the wall shear stress over the viscosity.

Equations: E^2 psi = -r omega with E^2 = d_zz + d_rr - d_r/r, and steady
vorticity transport u.grad(omega) - u_r omega / r = nu (L omega - omega/r^2)
with L = d_zz + d_rr + d_r/r.  Boundary conditions: prescribed parabolic
inflow, zero-axial-gradient outflow, symmetry axis (psi = omega = 0), and a
no-slip wall where psi is constant and the wall vorticity row enforces
psi_eta = 0 through a one-sided Taylor expansion.

Pressure is recovered after the solve: the wall trace integrates the
tangential momentum balance from the outlet (anchored at the outlet
pressure), and the interior integrates radial momentum inward per column.

Units: mm, kg, s, kPa.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, GeometryError, ParameterError

__all__ = [
    "FluidParams",
    "AxisymGrid",
    "FlowSolution",
    "poiseuille",
    "reynolds",
    "build_grid",
    "deform_grid",
    "solve_steady_flow",
]


@dataclass(frozen=True)
class FluidParams:
    """Blood-like fluid constants and boundary data."""

    mu: float = 4.0e-6        # dynamic viscosity [kg/(mm*s)]
    rho: float = 1.06e-6      # density [kg/mm^3]
    u_in: float = 1000.0      # peak inflow velocity [mm/s]
    p_out: float = 104.9 * 0.1333  # outlet pressure [kPa]

    def __post_init__(self):
        for name in ("mu", "rho", "u_in", "p_out"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be strictly positive")

    @property
    def nu(self) -> float:
        return self.mu / self.rho


def poiseuille(Q: float, mu: float, a: float, l: float) -> tuple[float, float]:
    """Pressure drop and wall shear of fully developed tube flow.

    delta_p = 8 mu l Q / (pi a^4),  tau_w = 4 mu Q / (pi a^3).
    """
    if a <= 0.0:
        raise ParameterError("radius must be positive")
    if l < 0.0:
        raise ParameterError("length must be nonnegative")
    delta_p = 8.0 * mu * l * Q / (np.pi * a ** 4)
    tau_w = 4.0 * mu * Q / (np.pi * a ** 3)
    return delta_p, tau_w


def reynolds(params: FluidParams, mean_u: float, diameter: float) -> float:
    """Reynolds number rho u D / mu."""
    if mean_u < 0.0 or diameter <= 0.0:
        raise ParameterError("velocity must be >= 0 and diameter positive")
    return params.rho * mean_u * diameter / params.mu


def _clustered_eta(n_r: int, stretch_ratio: float) -> np.ndarray:
    """Radial coordinates in [0, 1], geometrically clustered toward the wall."""
    spacing = stretch_ratio ** -np.arange(n_r)
    spacing /= spacing.sum()
    eta = np.concatenate([[0.0], np.cumsum(spacing)])
    eta[-1] = 1.0
    return eta


@dataclass(frozen=True)
class AxisymGrid:
    """Body-fitted structured grid: radial lines scaled to the wall radius."""

    z_nodes: np.ndarray      # axial stations [mm], strictly increasing
    eta: np.ndarray          # normalized radial coordinates in [0, 1]
    wall_radius: np.ndarray  # a(z) per station [mm]
    stretch_ratio: float = 1.06

    @property
    def n_z(self) -> int:
        return len(self.z_nodes) - 1

    @property
    def n_r(self) -> int:
        return len(self.eta) - 1

    def node_radii(self) -> np.ndarray:
        """Physical node radii, shape (n_z+1, n_r+1)."""
        return np.outer(self.wall_radius, self.eta)

    def wall_spline(self) -> CubicSpline:
        return CubicSpline(self.z_nodes, self.wall_radius, bc_type="natural")


def build_grid(z_nodes, wall_radius, n_r: int,
               stretch_ratio: float = 1.06) -> AxisymGrid:
    """Construct a body-fitted grid from sampled wall radii.

    The radial spacing is geometrically refined toward the wall for shear
    accuracy; ``stretch_ratio`` is the adjacent-cell spacing ratio (<= 1.2).
    """
    z = np.asarray(z_nodes, dtype=float)
    a = np.asarray(wall_radius, dtype=float)
    if z.ndim != 1 or z.shape != a.shape:
        raise ParameterError("z_nodes and wall_radius must be equal-length 1-D")
    if len(z) - 1 < 8:
        raise ParameterError("need at least 8 axial cells")
    if n_r < 8:
        raise ParameterError("need at least 8 radial cells")
    if np.any(np.diff(z) <= 0.0):
        raise ParameterError("z_nodes must be strictly increasing")
    if np.any(a <= 0.0):
        raise GeometryError("wall radius must be positive everywhere")
    if not 1.0 <= stretch_ratio <= 1.2:
        raise ParameterError("stretch_ratio must lie in [1.0, 1.2]")
    return AxisymGrid(z_nodes=z, eta=_clustered_eta(n_r, stretch_ratio),
                      wall_radius=a, stretch_ratio=stretch_ratio)


def deform_grid(grid: AxisymGrid, interface_displacement) -> AxisymGrid:
    """Rescale each radial line to the displaced wall radius.

    ``interface_displacement`` is the radial wall displacement per z-station,
    added to the grid's current wall radius.  Interface nodes match the
    supplied displacement exactly; interior nodes scale proportionally.
    """
    d = np.asarray(interface_displacement, dtype=float)
    if d.shape != grid.wall_radius.shape:
        raise ParameterError("displacement must match the number of z-stations")
    new_a = grid.wall_radius + d
    if np.any(new_a <= 0.0):
        raise GeometryError("displaced wall collapses the lumen")
    return AxisymGrid(z_nodes=grid.z_nodes, eta=grid.eta, wall_radius=new_a,
                      stretch_ratio=grid.stretch_ratio)


@dataclass
class FlowSolution:
    """Converged steady flow on a body-fitted grid.

    Velocities at wall nodes are exactly zero (no-slip boundary values); the
    volumetric flux is evaluated from the streamfunction and is therefore
    identical through every cross-section.
    """

    grid: AxisymGrid
    psi: np.ndarray             # streamfunction, shape (n_z+1, n_r+1)
    omega: np.ndarray           # azimuthal vorticity
    u_z: np.ndarray
    u_r: np.ndarray
    p: np.ndarray               # recovered pressure field
    wall_shear: np.ndarray      # |tau_w|(z) [kPa]
    wall_pressure: np.ndarray   # p(z) at the wall [kPa]
    centerline_velocity: np.ndarray
    converged_residual: float
    newton_iters: int
    residual_history: list = field(default_factory=list)

    def volumetric_flux(self, station: int) -> float:
        """Exact discrete flux 2 pi (psi_wall - psi_axis) at a station."""
        return 2.0 * np.pi * (self.psi[station, -1] - self.psi[station, 0])


def _d1_rows(x: np.ndarray) -> sp.csr_matrix:
    """Central 3-point first-derivative operator; boundary rows zero."""
    n = len(x)
    rows, cols, vals = [], [], []
    for j in range(1, n - 1):
        h1 = x[j] - x[j - 1]
        h2 = x[j + 1] - x[j]
        rows += [j, j, j]
        cols += [j - 1, j, j + 1]
        vals += [-h2 / (h1 * (h1 + h2)),
                 (h2 - h1) / (h1 * h2),
                 h1 / (h2 * (h1 + h2))]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _d2_rows(x: np.ndarray) -> sp.csr_matrix:
    """Central 3-point second-derivative operator; boundary rows zero."""
    n = len(x)
    rows, cols, vals = [], [], []
    for j in range(1, n - 1):
        h1 = x[j] - x[j - 1]
        h2 = x[j + 1] - x[j]
        rows += [j, j, j]
        cols += [j - 1, j, j + 1]
        vals += [2.0 / (h1 * (h1 + h2)),
                 -2.0 / (h1 * h2),
                 2.0 / (h2 * (h1 + h2))]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class _MappedOperators:
    """Sparse operators and constant Jacobian blocks for one grid."""

    def __init__(self, grid: AxisymGrid, params: FluidParams):
        z = grid.z_nodes
        eta = grid.eta
        if np.max(np.abs(np.diff(z) - (z[1] - z[0]))) > 1e-9 * (z[-1] - z[0]):
            raise ParameterError("the flow solver expects uniform z stations")
        self.nzp = len(z)
        self.nep = len(eta)
        self.N = self.nzp * self.nep
        dz = z[1] - z[0]

        spline = grid.wall_spline()
        A = spline(z)
        Ap = spline(z, 1)
        App = spline(z, 2)
        alpha = Ap / A
        beta = App / A
        self.z, self.eta, self.A, self.Ap, self.alpha = z, eta, A, Ap, alpha

        iz = sp.identity(self.nzp, format="csr")
        ie = sp.identity(self.nep, format="csr")
        de = _d1_rows(eta)
        dee = _d2_rows(eta)
        d1z = _d1_rows(z)
        d2z = _d2_rows(z)

        DXI = sp.kron(d1z, ie, format="csr")
        DXIXI = sp.kron(d2z, ie, format="csr")
        DETA = sp.kron(iz, de, format="csr")
        DETA2 = sp.kron(iz, dee, format="csr")
        DMIX = sp.kron(d1z, de, format="csr")

        ETA = np.tile(eta, self.nzp)
        AL = np.repeat(alpha, self.nep)
        BE = np.repeat(beta, self.nep)
        AA = np.repeat(A, self.nep)
        r = ETA * AA
        inv_r = np.zeros_like(r)
        nz = r > 0.0
        inv_r[nz] = 1.0 / r[nz]
        self.r, self.inv_r = r, inv_r

        def dia(v):
            return sp.diags(v)

        self.DZ = DXI - dia(ETA * AL) @ DETA
        self.DR = dia(1.0 / AA) @ DETA
        fzz = (DXIXI - 2.0 * dia(ETA * AL) @ DMIX
               + dia(ETA ** 2 * AL ** 2) @ DETA2
               + dia(ETA * (2.0 * AL ** 2 - BE)) @ DETA)
        frr = dia(1.0 / AA ** 2) @ DETA2
        E2 = fzz + frr - dia(inv_r) @ self.DR
        LAP = fzz + frr + dia(inv_r) @ self.DR
        self.LAP = LAP
        self.DETA = DETA
        self.AA = AA

        idx = np.arange(self.N).reshape(self.nzp, self.nep)
        self.idx = idx
        self.interior = idx[1:-1, 1:-1].ravel()
        self.inlet = idx[0, :].ravel()
        self.outlet = idx[-1, :].ravel()
        self.axis = idx[1:-1, 0].ravel()
        self.wall = idx[1:-1, -1].ravel()

        mask = np.zeros(self.N)
        mask[self.interior] = 1.0
        m_int = dia(mask)
        self.m_int = m_int
        self.boundary = np.concatenate(
            [self.inlet, self.outlet, self.axis, self.wall])

        # one-sided wall psi_etaeta with psi_eta = 0 built in:
        # psi_ee = cw1 (psi[-2] - psi_w) + cw2 (psi[-3] - psi_w)
        d1 = 1.0 - eta[-2]
        d2 = 1.0 - eta[-3]
        den = d1 ** 2 * d2 ** 3 - d2 ** 2 * d1 ** 3
        self.cw1 = 2.0 * d2 ** 3 / den
        self.cw2 = -2.0 * d1 ** 3 / den
        # one-sided first derivative at the wall (for shear/pressure traces)
        self.ce0 = (d1 + d2) / (d1 * d2)
        self.ce1 = -d2 / (d1 * (d2 - d1))
        self.ce2 = d1 / (d2 * (d2 - d1))

        # constant Jacobian blocks: psi-equation and all boundary rows
        rows, cols, vals = [], [], []

        def put(rr, cc, vv):
            rows.append(rr)
            cols.append(cc)
            vals.append(vv)

        out_coef = np.array([1.0, -4.0, 3.0]) / (2.0 * dz)
        b_psi = sp.lil_matrix((self.N, self.N))
        b_om_om = sp.lil_matrix((self.N, self.N))
        b_om_psi = sp.lil_matrix((self.N, self.N))
        for k in self.inlet:
            b_psi[k, k] = 1.0
            b_om_om[k, k] = 1.0
        for j in range(self.nep):
            k = idx[-1, j]
            for off, c in zip((idx[-3, j], idx[-2, j], idx[-1, j]), out_coef):
                b_psi[k, off] = c
                b_om_om[k, off] = c
        for k in self.axis:
            b_psi[k, k] = 1.0
            b_om_om[k, k] = 1.0
        for m, k in enumerate(self.wall):
            i = m + 1
            coef = alpha[i] ** 2 + 1.0 / A[i] ** 2
            b_psi[k, k] = 1.0
            b_om_psi[k, idx[i, -2]] = coef * self.cw1
            b_om_psi[k, idx[i, -3]] = coef * self.cw2
            b_om_psi[k, k] = -coef * (self.cw1 + self.cw2)
            b_om_om[k, k] = A[i]

        nu = params.nu
        self.visc = LAP - dia(inv_r ** 2)
        self.J_pp = (m_int @ E2 + b_psi.tocsr()).tocsr()
        self.J_po = (m_int @ dia(r)).tocsr()
        self.J_op_const = b_om_psi.tocsr()
        self.J_oo_const = (-nu * (m_int @ self.visc) + b_om_om.tocsr()).tocsr()
        self.nu = nu

        # boundary RHS (inlet profile and wall psi enter here)
        a_in = A[0]
        self.a_in = a_in
        self.Q = params.u_in * np.pi * a_in ** 2 / 2.0
        self.psi_wall = self.Q / (2.0 * np.pi)
        self.b_psi_vec = np.zeros(self.N)
        self.b_om_vec = np.zeros(self.N)
        self.b_psi_vec[self.inlet] = params.u_in * a_in ** 2 * (
            eta ** 2 / 2.0 - eta ** 4 / 4.0)
        self.b_om_vec[self.inlet] = 2.0 * params.u_in * eta / a_in
        self.b_psi_vec[self.wall] = self.psi_wall
        self.b_psi_vec[idx[-1, -1]] = 0.0  # outlet wall row is the gradient row

    def velocities(self, psi_flat):
        u_z = self.inv_r * (self.DETA @ psi_flat) / self.AA
        u_r = -self.inv_r * (self.DZ @ psi_flat)
        return u_z, u_r

    def residual(self, x):
        N = self.N
        psi = x[:N]
        om = x[N:]
        u_z, u_r = self.velocities(psi)
        f_p = self.J_pp @ psi + self.J_po @ om - self.b_psi_vec
        conv = (u_z * (self.DZ @ om) + u_r * (self.DR @ om)
                - u_r * om * self.inv_r)
        conv[self.boundary] = 0.0
        f_o = (self.J_op_const @ psi + self.J_oo_const @ om + conv
               - self.b_om_vec)
        return np.concatenate([f_p, f_o]), (u_z, u_r)

    def jacobian(self, x):
        N = self.N
        psi = x[:N]
        om = x[N:]
        u_z, u_r = self.velocities(psi)
        dia = sp.diags
        uz_op = dia(self.inv_r / self.AA) @ self.DETA
        ur_op = -dia(self.inv_r) @ self.DZ
        d_conv_om = dia(u_z) @ self.DZ + dia(u_r) @ self.DR - dia(u_r * self.inv_r)
        d_conv_psi = (dia(self.DZ @ om) @ uz_op
                      + dia((self.DR @ om) - om * self.inv_r) @ ur_op)
        j_oo = self.m_int @ d_conv_om + self.J_oo_const
        j_op = self.m_int @ d_conv_psi + self.J_op_const
        return sp.bmat([[self.J_pp, self.J_po], [j_op, j_oo]], format="csc")

    def initial_guess(self):
        """Developed parabolic flow at every station (exact for a tube)."""
        prof = self.psi_wall * (2.0 * self.eta ** 2 - self.eta ** 4)
        psi = np.tile(prof, self.nzp)
        om = (4.0 * self.Q / np.pi) * np.outer(1.0 / self.A ** 3,
                                               self.eta).ravel()
        return np.concatenate([psi, om])


def _residual_scale(ops: _MappedOperators, params: FluidParams) -> tuple[float, float]:
    a_ref = float(np.min(ops.A))
    s_psi = params.u_in
    s_om = params.u_in ** 2 / a_ref ** 2 + ops.nu * params.u_in / a_ref ** 3
    return s_psi, s_om


def _newton(ops, params, x, rtol, max_iter, history):
    s_psi, s_om = _residual_scale(ops, params)
    N = ops.N

    def norm(f):
        return float(np.sqrt(np.mean((f[:N] / s_psi) ** 2)
                             + np.mean((f[N:] / s_om) ** 2)))

    f, _ = ops.residual(x)
    res = norm(f)
    history.append(res)
    for it in range(max_iter):
        if res < rtol:
            return x, res, it
        lu = splu(ops.jacobian(x))
        dx = lu.solve(-f)
        lam = 1.0
        accepted = False
        for _ in range(14):
            x_try = x + lam * dx
            f_try, _ = ops.residual(x_try)
            res_try = norm(f_try)
            if res_try < res * (1.0 - 0.1 * lam) or res_try < rtol:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise ConvergenceError("flow Newton line search stalled",
                                   residual=res, history=history)
        x, f, res = x_try, f_try, res_try
        history.append(res)
    if res < rtol:
        return x, res, max_iter
    raise ConvergenceError("flow Newton did not converge",
                           residual=res, history=history)


def solve_steady_flow(grid: AxisymGrid, params: FluidParams,
                      rtol: float = 1e-8, max_iter: int = 40,
                      warm_start: np.ndarray | None = None) -> FlowSolution:
    """Solve the steady axisymmetric flow on a body-fitted grid.

    Newton iteration on the coupled streamfunction-vorticity system with a
    sparse LU solve per step; the combined scaled residual must fall below
    ``rtol``.  A failed direct solve falls back to viscosity continuation
    (solving at raised viscosity and warm-starting down the ladder).

    ``warm_start`` accepts the stacked (psi, omega) vector of a previous
    solution on the same grid topology.
    """
    ops = _MappedOperators(grid, params)
    history: list[float] = []
    if warm_start is not None and warm_start.shape == (2 * ops.N,):
        x0 = warm_start.copy()
    else:
        x0 = ops.initial_guess()
    try:
        x, res, iters = _newton(ops, params, x0, rtol, max_iter, history)
    except ConvergenceError:
        # viscosity continuation: march Re up from a heavily damped flow
        x = ops.initial_guess()
        history = []
        iters = 0
        for factor in (16.0, 8.0, 4.0, 2.0, 1.0):
            damped = FluidParams(mu=params.mu * factor, rho=params.rho,
                                 u_in=params.u_in, p_out=params.p_out)
            ops = _MappedOperators(grid, damped)
            x, res, it_f = _newton(ops, damped, x, rtol, max_iter, history)
            iters += it_f

    return _assemble_solution(grid, params, ops, x, res, iters, history)


def _assemble_solution(grid, params, ops, x, res, iters, history):
    nzp, nep = ops.nzp, ops.nep
    N = ops.N
    psi = x[:N].reshape(nzp, nep)
    om = x[N:].reshape(nzp, nep)
    u_z_flat, u_r_flat = ops.velocities(x[:N])
    u_z = u_z_flat.reshape(nzp, nep)
    u_r = u_r_flat.reshape(nzp, nep)
    # boundary values of the velocity field: no-slip wall, symmetry axis
    u_z[:, -1] = 0.0
    u_r[:, -1] = 0.0
    u_r[:, 0] = 0.0
    r1 = ops.eta[1] * ops.A
    u_z[:, 0] = 2.0 * psi[:, 1] / r1 ** 2

    tau_wall = params.mu * np.abs(om[:, -1])

    # wall pressure: integrate dp/dz along the wall from the outlet anchor;
    # at a no-slip wall grad p = mu * vector-Laplacian(u), expressed via omega
    om_eta_w = ops.ce0 * om[:, -1] + ops.ce1 * om[:, -2] + ops.ce2 * om[:, -3]
    om_r_w = om_eta_w / ops.A
    om_z_wall = np.gradient(om[:, -1], ops.z) - ops.alpha * om_eta_w
    dpdz = -params.mu * (om_r_w + om[:, -1] / ops.A) + ops.Ap * params.mu * om_z_wall
    p_wall = np.zeros(nzp)
    for i in range(nzp - 2, -1, -1):
        p_wall[i] = p_wall[i + 1] - 0.5 * (dpdz[i] + dpdz[i + 1]) * (
            ops.z[i + 1] - ops.z[i])
    p_wall += params.p_out - p_wall[-1]

    # interior pressure: integrate radial momentum inward per column
    dpdr_flat = (params.mu * (ops.DZ @ om.ravel())
                 - params.rho * (u_z_flat * (ops.DZ @ u_r_flat)
                                 + u_r_flat * (ops.DR @ u_r_flat)))
    dpdr = dpdr_flat.reshape(nzp, nep)
    radii = grid.node_radii()
    p = np.zeros((nzp, nep))
    p[:, -1] = p_wall
    for j in range(nep - 2, -1, -1):
        dr = radii[:, j + 1] - radii[:, j]
        p[:, j] = p[:, j + 1] - 0.5 * (dpdr[:, j] + dpdr[:, j + 1]) * dr

    return FlowSolution(
        grid=grid, psi=psi, omega=om, u_z=u_z, u_r=u_r, p=p,
        wall_shear=tau_wall, wall_pressure=p_wall,
        centerline_velocity=u_z[:, 0].copy(),
        converged_residual=res, newton_iters=iters,
        residual_history=history)
