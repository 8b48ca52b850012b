"""Continuous Lagrangian systems on the three instances.

The Euler-Lagrange field is assembled from the instance's constant anchor
``rho`` and structure tensor ``C``:

    xdot^i = rho^i_a y^a
    d/dt (dL/dy^a) = rho^i_a dL/dx^i - C^c_{ab} y^b dL/dy^c

which specializes to the classical Euler-Lagrange equations on the pair
instance, the Euler-Poincare equations on a Lie algebra and the
Lagrange-Poincare equations on a trivial bundle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853, OdeSolution

from . import geometry as geo
from .errors import NoConvergence, SingularHessian, StepFailure
from .geometry import (AlgebroidVector, GroupoidElement, Instance,
                       MatrixGroup, Momentum, PairEuclidean, TrivialBundle)

_EPS = np.finfo(float).eps
HESSIAN_COND_LIMIT = 1e8


@dataclass(frozen=True)
class FlowConfig:
    """Tolerances for the adaptive reference flow."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-11
    max_steps: int = 100000


@dataclass(frozen=True, eq=False)
class LagrangianSystem:
    """Continuous Lagrangian with its instance binding and derivative access.

    Derivatives are taken analytically when the corresponding callables are
    supplied, otherwise by central differences with steps balancing
    truncation against round-off (cube root of machine epsilon for first
    derivatives, fourth root for Hessians, scaled by ``1 + |y|``).
    """

    instance: Instance
    lagrangian: Callable[[AlgebroidVector], float]
    grad_base: Optional[Callable[[AlgebroidVector], np.ndarray]] = None
    grad_fiber: Optional[Callable[[AlgebroidVector], np.ndarray]] = None
    hess_fiber: Optional[Callable[[AlgebroidVector], np.ndarray]] = None
    hess_mixed: Optional[Callable[[AlgebroidVector], np.ndarray]] = None
    fd_step: Optional[float] = None
    name: str = "custom"

    # -- derivative access ---------------------------------------------------

    def value(self, a: AlgebroidVector) -> float:
        return float(self.lagrangian(a))

    def _step1(self, a):
        if self.fd_step is not None:
            return self.fd_step
        return _EPS ** (1.0 / 3.0) * (1.0 + np.linalg.norm(a.fiber))

    def _step2(self, a):
        return _EPS ** 0.25 * (1.0 + np.linalg.norm(a.fiber))

    def d_base(self, a: AlgebroidVector) -> np.ndarray:
        if a.base.size == 0:
            return np.zeros(0)
        if self.grad_base is not None:
            return np.asarray(self.grad_base(a), dtype=float)
        step = self._step1(a)
        out = np.zeros(a.base.size)
        for i in range(a.base.size):
            e = np.zeros(a.base.size)
            e[i] = step
            lp = self.value(replace(a, base=a.base + e))
            lm = self.value(replace(a, base=a.base - e))
            out[i] = (lp - lm) / (2.0 * step)
        return out

    def d_fiber(self, a: AlgebroidVector) -> np.ndarray:
        if self.grad_fiber is not None:
            return np.asarray(self.grad_fiber(a), dtype=float)
        step = self._step1(a)
        out = np.zeros(a.fiber.size)
        for i in range(a.fiber.size):
            e = np.zeros(a.fiber.size)
            e[i] = step
            lp = self.value(replace(a, fiber=a.fiber + e))
            lm = self.value(replace(a, fiber=a.fiber - e))
            out[i] = (lp - lm) / (2.0 * step)
        return out

    def fiber_hessian(self, a: AlgebroidVector) -> np.ndarray:
        if self.hess_fiber is not None:
            return np.asarray(self.hess_fiber(a), dtype=float)
        step = self._step2(a)
        n = a.fiber.size
        out = np.zeros((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = step
            gp = self.d_fiber(replace(a, fiber=a.fiber + e))
            gm = self.d_fiber(replace(a, fiber=a.fiber - e))
            out[:, j] = (gp - gm) / (2.0 * step)
        return 0.5 * (out + out.T)

    def mixed_hessian(self, a: AlgebroidVector) -> np.ndarray:
        """d^2 L / dy dx, shape (dim_fiber, dim_base)."""
        if a.base.size == 0:
            return np.zeros((a.fiber.size, 0))
        if self.hess_mixed is not None:
            return np.asarray(self.hess_mixed(a), dtype=float)
        step = self._step2(a)
        out = np.zeros((a.fiber.size, a.base.size))
        for j in range(a.base.size):
            e = np.zeros(a.base.size)
            e[j] = step
            gp = self.d_fiber(replace(a, base=a.base + e))
            gm = self.d_fiber(replace(a, base=a.base - e))
            out[:, j] = (gp - gm) / (2.0 * step)
        return out


def _checked_hessian(sys: LagrangianSystem, a: AlgebroidVector) -> np.ndarray:
    W = sys.fiber_hessian(a)
    cond = np.linalg.cond(W)
    if not np.isfinite(cond) or cond >= HESSIAN_COND_LIMIT:
        raise SingularHessian(f"fiber Hessian condition number {cond:.3e}")
    return W


# ---------------------------------------------------------------------------
# Euler-Lagrange field, Legendre transform, energy
# ---------------------------------------------------------------------------

def el_vector_field(sys: LagrangianSystem, a: AlgebroidVector):
    """Base velocity and fiber acceleration of the Euler-Lagrange field."""
    inst = sys.instance
    rho = inst.anchor
    C = inst.struct_tensor
    y = a.fiber
    xdot = rho @ y
    dLdy = sys.d_fiber(a)
    rhs = -np.einsum("abc,b,c->a", C, y, dLdy)
    if a.base.size:
        rhs = rhs + rho.T @ sys.d_base(a)
        rhs = rhs - sys.mixed_hessian(a) @ xdot
    W = _checked_hessian(sys, a)
    ydot = np.linalg.solve(W, rhs)
    return xdot, ydot


def legendre(sys: LagrangianSystem, a: AlgebroidVector) -> Momentum:
    """Fiber derivative of the Lagrangian; the base point is preserved."""
    return Momentum(sys.instance, a.base, sys.d_fiber(a))


def legendre_inverse(sys: LagrangianSystem, mu: Momentum,
                     guess: AlgebroidVector | None = None,
                     tol: float = 1e-11, max_iters: int = 60) -> AlgebroidVector:
    """Invert the Legendre transform on the fiber by Newton iteration."""
    if guess is None:
        a = AlgebroidVector(sys.instance, mu.base, np.zeros(mu.fiber.size))
    else:
        a = AlgebroidVector(sys.instance, mu.base, guess.fiber.copy())
    for _ in range(max_iters):
        r = sys.d_fiber(a) - mu.fiber
        if np.linalg.norm(r) <= tol:
            return a
        W = _checked_hessian(sys, a)
        a = replace(a, fiber=a.fiber - np.linalg.solve(W, r))
    r = sys.d_fiber(a) - mu.fiber
    if np.linalg.norm(r) <= tol:
        return a
    raise NoConvergence(f"Legendre inversion stalled at residual {np.linalg.norm(r):.3e}")


def energy(sys: LagrangianSystem, a: AlgebroidVector) -> float:
    """Lagrangian energy ``y . dL/dy - L``."""
    return float(a.fiber @ sys.d_fiber(a) - sys.value(a))


# ---------------------------------------------------------------------------
# reference flow
# ---------------------------------------------------------------------------

class Trajectory:
    """Dense solution of the Euler-Lagrange flow; immutable after creation."""

    def __init__(self, instance, a0: AlgebroidVector, t_end: float,
                 sol: OdeSolution | None, times):
        self.instance = instance
        self._a0 = a0
        self.t_end = t_end
        self._sol = sol
        self.times = np.asarray(times)

    def at(self, t: float) -> AlgebroidVector:
        if self._sol is None:
            return self._a0
        lo, hi = sorted((0.0, self.t_end))
        y = self._sol(np.clip(t, lo, hi))
        nb = self._a0.base.size
        return AlgebroidVector(self.instance, y[:nb], y[nb:])

    @property
    def final(self) -> AlgebroidVector:
        return self.at(self.t_end)


def _adaptive_solve(rhs, y0, t_end, cfg: FlowConfig, project=None):
    """Drive DOP853 step by step, collecting the dense interpolants.

    ``project`` (optional) maps the state back onto a constraint manifold
    after every accepted step; the perturbation is of the order of the
    local error, so the stored derivative stays consistent.
    """
    solver = DOP853(rhs, 0.0, y0, t_bound=t_end,
                    rtol=cfg.rel_tol, atol=cfg.abs_tol)
    interpolants = []
    ts = [0.0]
    while solver.status == "running":
        if len(ts) > cfg.max_steps:
            raise StepFailure(f"step budget {cfg.max_steps} exhausted")
        message = solver.step()
        if solver.status == "failed":
            raise StepFailure(message or "adaptive step failed")
        interpolants.append(solver.dense_output())
        ts.append(solver.t)
        if project is not None:
            solver.y = project(solver.y)
    return OdeSolution(ts, interpolants), np.asarray(ts)


def flow(sys: LagrangianSystem, a0: AlgebroidVector, t: float,
         cfg: FlowConfig = FlowConfig()) -> Trajectory:
    """Integrate the Euler-Lagrange field for time ``t`` with dense output."""
    if t == 0.0:
        return Trajectory(sys.instance, a0, 0.0, None, [0.0])

    nb = a0.base.size

    def rhs(_t, y):
        a = AlgebroidVector(sys.instance, y[:nb], y[nb:])
        xdot, ydot = el_vector_field(sys, a)
        return np.concatenate([xdot, ydot])

    y0 = np.concatenate([a0.base, a0.fiber])
    sol, ts = _adaptive_solve(rhs, y0, t, cfg)
    return Trajectory(sys.instance, a0, t, sol, ts)


def hamiltonian_flow(sys: LagrangianSystem, mu0: Momentum, t: float,
                     cfg: FlowConfig = FlowConfig()) -> Momentum:
    """Integrate Hamilton's equations on the dual bundle for time ``t``.

    The linear Poisson bracket gives ``xdot = rho y`` and
    ``mudot_a = rho^i_a dL/dx^i - C^c_{ab} y^b mu_c`` with the velocity
    ``y`` recovered from ``mu`` by inverting the Legendre transform at
    every evaluation.  This route never touches the Lagrangian-side flow,
    which makes it a genuine second witness for flow/Legendre identities.
    """
    if t == 0.0:
        return mu0
    inst = sys.instance
    rho = inst.anchor
    C = inst.struct_tensor
    nb = mu0.base.size
    guess_cell = [AlgebroidVector(inst, mu0.base, np.zeros(mu0.fiber.size))]

    def rhs(_t, z):
        x, mu = z[:nb], z[nb:]
        a = legendre_inverse(sys, Momentum(inst, x, mu), guess=guess_cell[0])
        guess_cell[0] = a
        mudot = -np.einsum("abc,b,c->a", C, a.fiber, mu)
        if nb:
            mudot = mudot + rho.T @ sys.d_base(a)
        return np.concatenate([rho @ a.fiber, mudot])

    z0 = np.concatenate([mu0.base, mu0.fiber])
    sol, _ = _adaptive_solve(rhs, z0, t, cfg)
    z = sol(t)
    return Momentum(inst, z[:nb], z[nb:])


def _polar_project(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    return u @ vt


def groupoid_reconstruction(sys: LagrangianSystem, a0: AlgebroidVector,
                            t: float, cfg: FlowConfig = FlowConfig(),
                            start: GroupoidElement | None = None,
                            trajectory: Trajectory | None = None) -> GroupoidElement:
    """Arrow reached at time ``t`` by reconstructing the reduced flow.

    Pair: the endpoints of the trajectory.  Group/bundle: solves
    ``gdot = g xi(t)`` along the dense reduced solution, with a polar
    re-projection of the group factor after every accepted step so
    orthogonality drift cannot contaminate shooting residuals.
    """
    inst = sys.instance
    traj = trajectory if trajectory is not None else flow(sys, a0, t, cfg)

    if isinstance(inst, PairEuclidean):
        return geo.pair_arrow(inst, a0.base, traj.final.base)

    group = geo.instance_group(inst)
    n = group.ambient_dim
    g0 = np.eye(n) if start is None else np.asarray(start.mat, dtype=float)
    if t == 0.0:
        g_final = g0
    else:
        if isinstance(inst, TrivialBundle):
            def body_velocity(tt):
                xi, _ = inst.split_fiber(traj.at(tt).fiber)
                return xi
        else:
            def body_velocity(tt):
                return traj.at(tt).fiber

        def rhs(tt, gflat):
            G = gflat.reshape(n, n)
            Xi = group.algebra_matrix(body_velocity(tt))
            return (G @ Xi).ravel()

        def project(gflat):
            return _polar_project(gflat.reshape(n, n)).ravel()

        sol, _ = _adaptive_solve(rhs, g0.ravel(), t, cfg, project=project)
        g_final = _polar_project(sol(t).reshape(n, n))

    if isinstance(inst, MatrixGroup):
        return geo.group_arrow(inst, g_final)
    return geo.bundle_arrow(inst, g_final, a0.base, traj.final.base)


# ---------------------------------------------------------------------------
# built-in systems
# ---------------------------------------------------------------------------

def harmonic_oscillator(n: int = 1, omega: float = 1.0) -> LagrangianSystem:
    """``L = |v|^2/2 - omega^2 |q|^2 / 2`` on the pair instance."""
    inst = PairEuclidean(n)
    w2 = omega * omega

    def lag(a):
        return 0.5 * a.fiber @ a.fiber - 0.5 * w2 * a.base @ a.base

    return LagrangianSystem(
        inst, lag,
        grad_base=lambda a: -w2 * a.base,
        grad_fiber=lambda a: a.fiber,
        hess_fiber=lambda a: np.eye(n),
        hess_mixed=lambda a: np.zeros((n, n)),
        name="harmonic_oscillator",
    )


def free_particle(n: int = 1) -> LagrangianSystem:
    """``L = |v|^2 / 2`` on the pair instance."""
    inst = PairEuclidean(n)
    return LagrangianSystem(
        inst, lambda a: 0.5 * a.fiber @ a.fiber,
        grad_base=lambda a: np.zeros(n),
        grad_fiber=lambda a: a.fiber,
        hess_fiber=lambda a: np.eye(n),
        hess_mixed=lambda a: np.zeros((n, n)),
        name="free_particle",
    )


def quadratic_pair_system(mass_matrix, potential_quadratic=None,
                          potential_linear=None, potential_constant=0.0,
                          potential_poly=None) -> LagrangianSystem:
    """``L = v' M v / 2 - V(q)`` with a polynomial potential.

    ``V(q) = q' K q / 2 + b . q + c + sum_i p_i(q_i)`` where ``p_i`` are
    per-axis polynomials given by coefficient lists (ascending degree).
    """
    M = np.atleast_2d(np.asarray(mass_matrix, dtype=float))
    n = M.shape[0]
    K = (np.zeros((n, n)) if potential_quadratic is None
         else np.atleast_2d(np.asarray(potential_quadratic, dtype=float)))
    b = (np.zeros(n) if potential_linear is None
         else np.asarray(potential_linear, dtype=float))
    polys = None
    if potential_poly is not None:
        polys = [np.asarray(c, dtype=float) for c in potential_poly]
        dpolys = [np.polynomial.polynomial.polyder(c) for c in polys]

    def vpot(q):
        v = 0.5 * q @ K @ q + b @ q + potential_constant
        if polys is not None:
            v += sum(np.polynomial.polynomial.polyval(q[i], polys[i])
                     for i in range(n))
        return v

    def dvpot(q):
        g = K @ q + b
        if polys is not None:
            g = g + np.array([np.polynomial.polynomial.polyval(q[i], dpolys[i])
                              for i in range(n)])
        return g

    inst = PairEuclidean(n)
    return LagrangianSystem(
        inst, lambda a: 0.5 * a.fiber @ M @ a.fiber - vpot(a.base),
        grad_base=lambda a: -dvpot(a.base),
        grad_fiber=lambda a: M @ a.fiber,
        hess_fiber=lambda a: M,
        hess_mixed=lambda a: np.zeros((n, n)),
        name="quadratic_pair",
    )


def rigid_body(i1: float, i2: float, i3: float) -> LagrangianSystem:
    """``l = xi' diag(I) xi / 2`` on so(3); Euler's equations in body frame."""
    inst = geo.so3()
    inertia = np.array([i1, i2, i3], dtype=float)
    return LagrangianSystem(
        inst, lambda a: 0.5 * a.fiber @ (inertia * a.fiber),
        grad_fiber=lambda a: inertia * a.fiber,
        hess_fiber=lambda a: np.diag(inertia),
        name="rigid_body",
    )


def heavy_top_trivial_bundle(inertia=(1.0, 2.0, 3.0), mass: float = 1.0,
                             gravity: float = 9.8,
                             coupling: float = 0.0) -> LagrangianSystem:
    """Coupled rigid-body / point-mass Lagrangian on ``so(3) x T R^3``.

    ``l(xi, x, xdot) = xi' I xi / 2 + m |xdot|^2 / 2 - m g x_3 + c xi . x``;
    the linear coupling feeds the base position into the body momentum
    without spoiling the constant block-diagonal fiber Hessian.
    """
    group = geo.so3()
    inst = TrivialBundle(group, 3)
    ib = np.asarray(inertia, dtype=float)
    ez = np.array([0.0, 0.0, 1.0])

    def lag(a):
        xi, xdot = inst.split_fiber(a.fiber)
        return (0.5 * xi @ (ib * xi) + 0.5 * mass * xdot @ xdot
                - mass * gravity * (a.base @ ez) + coupling * (xi @ a.base))

    def gfib(a):
        xi, xdot = inst.split_fiber(a.fiber)
        return np.concatenate([ib * xi + coupling * a.base, mass * xdot])

    def gbase(a):
        xi, _ = inst.split_fiber(a.fiber)
        return coupling * xi - mass * gravity * ez

    def hfib(a):
        return np.diag(np.concatenate([ib, mass * np.ones(3)]))

    def hmix(a):
        out = np.zeros((6, 3))
        out[:3, :] = coupling * np.eye(3)
        return out

    return LagrangianSystem(inst, lag, grad_base=gbase, grad_fiber=gfib,
                            hess_fiber=hfib, hess_mixed=hmix,
                            name="heavy_top_trivial_bundle")
