"""Exact linearization of the discrete forward step and Taylor-order tests.

``step_linearized`` is the derivative of :func:`morphoctl.forward.step_state`
with respect to (m, phi, theta) at a stored forward state, applied to a
tangent direction (phi1, phi2, h):

    (I - dt Lap) phi1+ = phi1 - dt div( 2 beta (phi2 - 2 m phi1) (gradJ * m)
                                      + 2 beta (phi - m^2) (gradJ * phi1) )
    (I - dt Lap) phi2+ = phi2 - dt div( 2 beta m (1 - phi) (gradJ * phi1)
                                      + 2 beta phi1 (1 - phi) (gradJ * m)
                                      - 2 beta phi2 m (gradJ * m) )
                         + dt (-alpha phi2 + h)

Linearizing the discrete step (rather than discretizing the continuous
linearized system separately) makes the finite-difference consistency
checks sharp to round-off and lets the backward sweep in
:mod:`morphoctl.control` be the exact transpose.  See
docs/discrete_adjoint.md for the term-by-term derivation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LadderTooShort, NonFinite
from .forward import (
    InitData,
    ModelParams,
    Trajectory,
    control_array,
    l2_h1_norm,
    solve_state,
)
from .grid import div, l2, solve_implicit_diffusion


@dataclass(frozen=True)
class TangentTrajectory:
    """Directional derivative of the state trajectory along a control direction."""

    params: ModelParams
    phi1: np.ndarray  # (nt+1, ny, nx), zero initial slice
    phi2: np.ndarray
    h: np.ndarray     # (nt, ny, nx)


def step_linearized(
    m_hat: np.ndarray,
    phi_hat: np.ndarray,
    phi1: np.ndarray,
    phi2: np.ndarray,
    h_slice: np.ndarray,
    params: ModelParams,
) -> tuple[np.ndarray, np.ndarray]:
    """One step of the exact discrete derivative at (m_hat, phi_hat)."""
    g = params.grid
    dt = params.dt
    b2 = 2.0 * params.beta
    gmx, gmy = params.kernel.grad_conv(m_hat)
    g1x, g1y = params.kernel.grad_conv(phi1)

    a1 = b2 * (phi2 - 2.0 * m_hat * phi1)          # multiplies gradJ * m_hat
    c1 = b2 * (phi_hat - m_hat * m_hat)            # multiplies gradJ * phi1
    rhs1 = phi1 - dt * div(g, a1 * gmx + c1 * g1x, a1 * gmy + c1 * g1y)

    a2 = b2 * (m_hat * (1.0 - phi_hat))            # multiplies gradJ * phi1
    c2 = b2 * ((1.0 - phi_hat) * phi1 - m_hat * phi2)  # multiplies gradJ * m_hat
    rhs2 = (
        phi2
        - dt * div(g, a2 * g1x + c2 * gmx, a2 * g1y + c2 * gmy)
        + dt * (-params.alpha * phi2 + h_slice)
    )

    p1 = solve_implicit_diffusion(g, rhs1, dt)
    p2 = solve_implicit_diffusion(g, rhs2, dt)
    if not (np.isfinite(p1).all() and np.isfinite(p2).all()):
        raise NonFinite("non-finite tangent state")
    return p1, p2


def solve_linearized(traj: Trajectory, h) -> TangentTrajectory:
    """March the tangent system along a stored forward trajectory."""
    params = traj.params
    harr = control_array(h, params)
    nt = params.nt
    phi1 = np.zeros((nt + 1, *params.grid.shape))
    phi2 = np.zeros_like(phi1)
    for n in range(nt):
        try:
            phi1[n + 1], phi2[n + 1] = step_linearized(
                traj.m[n], traj.phi[n], phi1[n], phi2[n], harr[n], params
            )
        except NonFinite as exc:
            raise NonFinite(f"tangent blow-up at step {n + 1}", step=n + 1) from exc
    return TangentTrajectory(params=params, phi1=phi1, phi2=phi2, h=harr)


def tangent_norm(tan: TangentTrajectory) -> float:
    """Discrete L2(S x Omega)^2 norm of the tangent (state quadrature)."""
    p = tan.params
    acc = 0.0
    for n in range(1, p.nt + 1):
        acc += l2(p.grid, tan.phi1[n]) ** 2 + l2(p.grid, tan.phi2[n]) ** 2
    return float(np.sqrt(acc * p.dt))


def tangent_stability_norm(tan: TangentTrajectory) -> float:
    """|phi1|_{L2(S;H1)} + |phi2|_{L2(S;H1)}, the stability-estimate quantity."""
    return l2_h1_norm(tan.params, tan.phi1) + l2_h1_norm(tan.params, tan.phi2)


def taylor_test(
    init: InitData,
    theta_hat,
    h,
    params: ModelParams,
    eps_ladder=(1e-1, 5e-2, 2.5e-2, 1.25e-2),
) -> dict:
    """Remainder decay of S(theta + eps h) against the tangent prediction.

    Returns the remainders r(eps) = |S(theta+eps h) - S(theta) - eps DS h|
    in the discrete L2(S x Omega)^2 norm on (m, phi), the observed orders
    log(r_i / r_{i+1}) / log(eps_i / eps_{i+1}) (= 2 for an exact
    derivative of a polynomial step map), and the first-order quotients
    |S(theta+eps h) - S(theta)| / eps, which approach |DS h|.
    """
    eps_ladder = [float(e) for e in eps_ladder]
    if len(eps_ladder) < 3:
        raise LadderTooShort("need at least three epsilon rungs")
    th = control_array(theta_hat, params)
    harr = control_array(h, params)

    base = solve_state(init, th, params)
    tan = solve_linearized(base, harr)
    tnorm = tangent_norm(tan)

    remainders = []
    fd_norms = []
    for eps in eps_ladder:
        pert = solve_state(init, th + eps * harr, params)
        acc_r = 0.0
        acc_f = 0.0
        for n in range(1, params.nt + 1):
            dm = pert.m[n] - base.m[n]
            dp = pert.phi[n] - base.phi[n]
            acc_f += l2(params.grid, dm) ** 2 + l2(params.grid, dp) ** 2
            rm = dm - eps * tan.phi1[n]
            rp = dp - eps * tan.phi2[n]
            acc_r += l2(params.grid, rm) ** 2 + l2(params.grid, rp) ** 2
        remainders.append(float(np.sqrt(acc_r * params.dt)))
        fd_norms.append(float(np.sqrt(acc_f * params.dt)) / eps)

    orders = []
    for i in range(len(eps_ladder) - 1):
        num = remainders[i] / remainders[i + 1] if remainders[i + 1] > 0 else np.nan
        den = eps_ladder[i] / eps_ladder[i + 1]
        orders.append(float(np.log(num) / np.log(den)) if np.isfinite(num) else np.nan)

    return {
        "eps": eps_ladder,
        "remainders": remainders,
        "orders": orders,
        "first_order_quotients": fd_norms,
        "tangent_norm": tnorm,
    }
