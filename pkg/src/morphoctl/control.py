"""Cost, adjoint sweeps, reduced gradient, and projected gradient descent.

Quadrature alignment (fixed here and used identically everywhere):

* misfit is summed over state indices n = 1..nt,
* the control / regularization term over control indices n = 0..nt-1,
* the backward sweep injects the misfit defect at state index n while
  producing the adjoint slice stored at index n-1, so the gradient slice
  at control index n pairs with theta_n without any off-by-one.

Misaligning any of these is the classic silent gradient bug; the
finite-difference oracle in the tests pins the alignment down.

Two backward solvers are provided.  ``solve_adjoint_discrete`` is the
exact transpose of the tangent sweep (transpose of div is -grad, of a
pointwise coefficient is the coefficient, of convolution with the odd
kernel gradient is its negative, and the implicit diffusion solve is
symmetric); it is the normative gradient path and satisfies the duality
identity to round-off.  ``solve_adjoint_continuous`` discretizes the
backward-in-time PDE system written with the coefficients outside the
convolutions; it exists as a cross-check and the gap between the two at
beta > 0 is reported, never asserted, because the two operator orderings
genuinely differ.  At beta = 0 both solvers perform identical arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DeltaZero, NonFinite, ShapeMismatch
from .forward import (
    InitData,
    ModelParams,
    Trajectory,
    control_array,
    control_space_time_norm,
    solve_state,
)
from .grid import div, grad, inner, l2, solve_implicit_diffusion

# Flipped to -1.0 by the verification mutation test to prove that the
# gradient check detects a wrong adjoint sign.  Never change at runtime.
_MISFIT_SOURCE_SIGN = 1.0


@dataclass(frozen=True)
class ControlField:
    """Time-indexed control with box bounds."""

    theta: np.ndarray  # (nt, ny, nx)
    theta_min: float | np.ndarray = 0.0
    theta_max: float | np.ndarray = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.theta_min) > np.asarray(self.theta_max)):
            raise ValueError("bounds require theta_min <= theta_max")


@dataclass(frozen=True)
class AdjointTrajectory:
    """Backward multipliers; slice nt is the zero terminal condition."""

    params: ModelParams
    gamma1: np.ndarray  # (nt+1, ny, nx)
    gamma2: np.ndarray


@dataclass
class OptConfig:
    """Projected-gradient settings; tol=None means 1e-8 * sqrt(T Lx Ly)."""

    max_iters: int = 100
    step0: float = 1.0
    shrink: float = 0.5
    c1: float = 1e-4
    s_min: float = 1e-12
    tol: float | None = None

    def resolved_tol(self, params: ModelParams) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-8 * float(np.sqrt(params.T * params.grid.Lx * params.grid.Ly))


@dataclass
class OptResult:
    theta_opt: np.ndarray
    cost_history: list[float] = field(default_factory=list)
    misfit_history: list[float] = field(default_factory=list)
    reg_history: list[float] = field(default_factory=list)
    stationarity_history: list[float] = field(default_factory=list)
    step_history: list[float] = field(default_factory=list)
    iterations: int = 0
    termination: str = ""


def _target_slices(phi_d: np.ndarray, params: ModelParams) -> np.ndarray:
    """Broadcast a target to (nt, ny, nx); slice k pairs with state index k+1."""
    arr = np.asarray(phi_d, dtype=float)
    ny, nx = params.grid.shape
    if arr.shape == (ny, nx):
        arr = arr[None, :, :]
    if arr.shape not in {(1, ny, nx), (params.nt, ny, nx)}:
        raise ShapeMismatch(
            f"target must have shape (1|{params.nt}, {ny}, {nx}), got {arr.shape}"
        )
    return np.broadcast_to(arr, (params.nt, ny, nx))


def cost_parts(traj: Trajectory, theta, phi_d, delta: float) -> tuple[float, float]:
    """(misfit, regularization) halves of the tracking functional."""
    p = traj.params
    g = p.grid
    th = control_array(theta, p)
    pd = _target_slices(phi_d, p)
    misfit = 0.0
    for n in range(1, p.nt + 1):
        misfit += l2(g, traj.phi[n] - pd[n - 1]) ** 2
    reg = 0.0
    for n in range(p.nt):
        reg += l2(g, th[n]) ** 2
    return 0.5 * misfit * p.dt, 0.5 * delta * reg * p.dt


def cost(traj: Trajectory, theta, phi_d, delta: float) -> float:
    misfit, reg = cost_parts(traj, theta, phi_d, delta)
    return misfit + reg


def solve_adjoint_discrete(traj: Trajectory, phi_d) -> AdjointTrajectory:
    """Backward sweep with the exact transpose of the linearized step.

    With the stored forward states (m, phi) at index n, the explicit part
    applied to the incoming (g1, g2) before the symmetric implicit solve is

        p1 = g1 + dt ( -4 beta m (Gm . grad g1)
                       - sum_i gradJ_i * (2 beta (phi - m^2) d_i g1)
                       + 2 beta (1 - phi) (Gm . grad g2)
                       - sum_i gradJ_i * (2 beta m (1 - phi) d_i g2) )
        p2 = g2 + dt ( +2 beta (Gm . grad g1) - 2 beta m (Gm . grad g2)
                       - alpha g2 + (phi_n - phi_d,n) )

    where Gm = gradJ * m.  The source sign makes the duality identity

        sum_n <phi2_n, phi_n - phi_d,n> dt = sum_n <h_n, gamma2_n> dt

    hold exactly, which is what the reduced gradient needs.
    """
    p = traj.params
    g = p.grid
    dt = p.dt
    b2 = 2.0 * p.beta
    pd = _target_slices(phi_d, p)
    nt = p.nt
    g1 = np.zeros((nt + 1, *g.shape))
    g2 = np.zeros_like(g1)
    for n in range(nt, 0, -1):
        s_n = _MISFIT_SOURCE_SIGN * (traj.phi[n] - pd[n - 1])
        if n == nt:
            p1 = np.zeros(g.shape)
            p2 = dt * s_n
        else:
            m, phi = traj.m[n], traj.phi[n]
            gmx, gmy = p.kernel.grad_conv(m)
            d1x, d1y = grad(g, g1[n])
            d2x, d2y = grad(g, g2[n])
            adv1 = gmx * d1x + gmy * d1y
            adv2 = gmx * d2x + gmy * d2y
            cm = b2 * (phi - m * m)
            cp = b2 * (m * (1.0 - phi))
            conv1 = p.kernel.grad_conv_sum(cm * d1x, cm * d1y)
            conv2 = p.kernel.grad_conv_sum(cp * d2x, cp * d2y)
            p1 = g1[n] + dt * (
                -2.0 * b2 * m * adv1 - conv1 + b2 * (1.0 - phi) * adv2 - conv2
            )
            p2 = g2[n] + dt * (
                b2 * adv1 - b2 * m * adv2 - p.alpha * g2[n] + s_n
            )
        g1[n - 1] = solve_implicit_diffusion(g, p1, dt)
        g2[n - 1] = solve_implicit_diffusion(g, p2, dt)
        if not (np.isfinite(g1[n - 1]).all() and np.isfinite(g2[n - 1]).all()):
            raise NonFinite(f"adjoint blow-up at step {n}", step=n)
    return AdjointTrajectory(params=p, gamma1=g1, gamma2=g2)


def solve_adjoint_continuous(traj: Trajectory, phi_d) -> AdjointTrajectory:
    """Reference backward solver for the adjoint system in PDE form.

    Time is reversed and the same IMEX pattern as the forward scheme is
    applied to

        dt gamma1 + Lap gamma1 - 4 beta m (Gm . grad gamma1)
            + 2 beta (phi - m^2) (gradJ * grad gamma1)
            + 2 beta (1 - phi) (Gm . grad gamma2)
            + 2 beta m (1 - phi) (gradJ * grad gamma2) = 0
        dt gamma2 + Lap gamma2 - 2 beta (Gm . grad gamma1)
            - 2 beta m (Gm . grad gamma2) - alpha gamma2 = phi_d - phi

    with (gradJ * grad w) meaning sum_i gradJ_i * d_i w and the
    coefficients kept outside the convolutions.  The gamma2 reaction term
    is taken as -alpha gamma2 (backward decay), the only reading for which
    this solver coincides with the exact transpose when beta = 0.  Used
    for cross-validation only; the optimizer never calls it.
    """
    p = traj.params
    g = p.grid
    dt = p.dt
    b2 = 2.0 * p.beta
    pd = _target_slices(phi_d, p)
    nt = p.nt
    g1 = np.zeros((nt + 1, *g.shape))
    g2 = np.zeros_like(g1)
    for n in range(nt, 0, -1):
        s_n = traj.phi[n] - pd[n - 1]
        if n == nt:
            p1 = np.zeros(g.shape)
            p2 = dt * s_n
        else:
            m, phi = traj.m[n], traj.phi[n]
            gmx, gmy = p.kernel.grad_conv(m)
            d1x, d1y = grad(g, g1[n])
            d2x, d2y = grad(g, g2[n])
            adv1 = gmx * d1x + gmy * d1y
            adv2 = gmx * d2x + gmy * d2y
            k1 = p.kernel.grad_conv_sum(d1x, d1y)
            k2 = p.kernel.grad_conv_sum(d2x, d2y)
            p1 = g1[n] + dt * (
                -2.0 * b2 * m * adv1
                + b2 * (phi - m * m) * k1
                + b2 * (1.0 - phi) * adv2
                + b2 * (m * (1.0 - phi)) * k2
            )
            p2 = g2[n] + dt * (
                -b2 * adv1 - b2 * m * adv2 - p.alpha * g2[n] + s_n
            )
        g1[n - 1] = solve_implicit_diffusion(g, p1, dt)
        g2[n - 1] = solve_implicit_diffusion(g, p2, dt)
        if not (np.isfinite(g1[n - 1]).all() and np.isfinite(g2[n - 1]).all()):
            raise NonFinite(f"adjoint blow-up at step {n}", step=n)
    return AdjointTrajectory(params=p, gamma1=g1, gamma2=g2)


def reduced_gradient(adj: AdjointTrajectory, theta, delta: float) -> np.ndarray:
    """Riesz representative of the reduced cost derivative, gamma2 + delta theta."""
    p = adj.params
    th = control_array(theta, p)
    return adj.gamma2[: p.nt] + delta * th


def project_admissible(theta: np.ndarray, theta_min, theta_max) -> np.ndarray:
    """Pointwise clamp onto the admissible box."""
    return np.clip(theta, theta_min, theta_max)


def stationarity_residual(
    theta: np.ndarray,
    grad_theta: np.ndarray,
    params: ModelParams,
    theta_min,
    theta_max,
    s_ref: float = 1.0,
) -> float:
    """|theta - Proj(theta - s_ref g)| in L2(S x Omega); zero iff stationary."""
    trial = project_admissible(theta - s_ref * grad_theta, theta_min, theta_max)
    return control_space_time_norm(params, theta - trial)


def control_inner(params: ModelParams, a: np.ndarray, b: np.ndarray) -> float:
    """Space-time pairing on control-aligned series."""
    return sum(inner(params.grid, a[n], b[n]) for n in range(params.nt)) * params.dt


def duality_gap(
    traj: Trajectory, tan_phi2: np.ndarray, adj: AdjointTrajectory, h: np.ndarray, phi_d
) -> float:
    """Relative defect of <DS h, misfit source> = <h, gamma2>."""
    p = traj.params
    pd = _target_slices(phi_d, p)
    lhs = (
        sum(
            inner(p.grid, tan_phi2[n], traj.phi[n] - pd[n - 1])
            for n in range(1, p.nt + 1)
        )
        * p.dt
    )
    rhs = control_inner(p, h, adj.gamma2[: p.nt])
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale


def pgd_optimize(
    init: InitData,
    control0: ControlField,
    phi_d,
    params: ModelParams,
    delta: float,
    opt: OptConfig | None = None,
) -> OptResult:
    """Projected gradient descent with Armijo backtracking on the reduced cost.

    Accepts a trial step s when
    J(Proj(theta - s g)) <= J(theta) - (c1/s) |Proj(theta - s g) - theta|^2,
    shrinking s geometrically from step0 each iteration.  Terminates on a
    small stationarity residual, the iteration cap, or a failed line
    search (reported in the termination reason; the best iterate so far is
    still returned).
    """
    if opt is None:
        opt = OptConfig()
    tol = opt.resolved_tol(params)
    tmin, tmax = control0.theta_min, control0.theta_max
    theta = project_admissible(control_array(control0.theta, params), tmin, tmax)

    result = OptResult(theta_opt=theta)
    traj = solve_state(init, theta, params)
    misfit, reg = cost_parts(traj, theta, phi_d, delta)
    j_cur = misfit + reg

    for it in range(opt.max_iters + 1):
        adj = solve_adjoint_discrete(traj, phi_d)
        g = reduced_gradient(adj, theta, delta)
        res = stationarity_residual(theta, g, params, tmin, tmax)

        result.cost_history.append(j_cur)
        result.misfit_history.append(misfit)
        result.reg_history.append(reg)
        result.stationarity_history.append(res)
        result.iterations = it
        result.theta_opt = theta

        if res <= tol:
            result.termination = "converged"
            return result
        if it == opt.max_iters:
            result.termination = "max_iters"
            return result

        s = opt.step0
        accepted = False
        while s >= opt.s_min:
            trial = project_admissible(theta - s * g, tmin, tmax)
            move = control_space_time_norm(params, trial - theta)
            if move == 0.0:
                break
            traj_t = solve_state(init, trial, params)
            m_t, r_t = cost_parts(traj_t, trial, phi_d, delta)
            if m_t + r_t <= j_cur - (opt.c1 / s) * move**2:
                theta, traj = trial, traj_t
                misfit, reg, j_cur = m_t, r_t, m_t + r_t
                result.step_history.append(s)
                accepted = True
                break
            s *= opt.shrink
        if not accepted:
            result.termination = "line_search_failed"
            return result

    result.termination = "max_iters"
    return result


def projection_characterization_check(
    theta_opt: np.ndarray,
    adj: AdjointTrajectory,
    theta_min,
    theta_max,
    delta: float,
) -> float:
    """|theta_opt - Proj(-gamma2 / delta)| in L2(S x Omega).

    At a stationary point of the box-constrained problem the control is
    the pointwise projection of -gamma2/delta, so the gap is bounded by
    the stationarity residual scaled by 1/delta.
    """
    if delta == 0.0:
        raise DeltaZero("projection characterization requires delta > 0")
    p = adj.params
    proj = project_admissible(-adj.gamma2[: p.nt] / delta, theta_min, theta_max)
    return control_space_time_norm(p, theta_opt - proj)
