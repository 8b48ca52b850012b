"""Catalogue of practical discrete Lagrangians.

Every constructor returns a :class:`~groupoid_vi.discrete.DiscreteLagrangian`
bound to a continuous system and a step size.  Group schemes work through a
retraction ``tau``: either ``exp`` (values stay in the algebra) or the
affine map ``tau(a) = I + h a`` on matrix groups, whose image leaves the
subalgebra and therefore evaluates an extended Lagrangian on ``gl(n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dynamics as dyn
from . import geometry as geo
from ._newton import damped_newton, fd_jacobian
from .discrete import DiscreteLagrangian
from .errors import SingularTau
from .geometry import MatrixGroup, PairEuclidean, TrivialBundle

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ButcherTable:
    """Runge-Kutta coefficients; consistency ``sum b = 1`` is enforced."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.shape != (b.size, b.size):
            raise ValueError("Butcher table shapes are inconsistent")
        if abs(b.sum() - 1.0) > 1e-12:
            raise ValueError("Butcher weights must sum to one")

    @property
    def stages(self):
        return self.b.size


MIDPOINT_TABLE = ButcherTable(a=[[0.5]], b=[1.0])


@dataclass(frozen=True)
class SchemeSpec:
    """Config-facing description of a catalogue scheme."""

    kind: str
    alpha: float = 0.5
    tau: str = "exp"
    table: Optional[ButcherTable] = None
    expected_order: Optional[int] = None


# ---------------------------------------------------------------------------
# pair instance
# ---------------------------------------------------------------------------

def midpoint_pair(sys: dyn.LagrangianSystem, h: float) -> DiscreteLagrangian:
    """``L_h(q0, q1) = h L((q0+q1)/2, (q1-q0)/h)``; second order."""
    inst = sys.instance
    if not isinstance(inst, PairEuclidean):
        raise ValueError("midpoint_pair requires the pair instance")

    def mid(g):
        return geo.tangent(inst, 0.5 * (g.src + g.dst), (g.dst - g.src) / h)

    def fn(g):
        return h * sys.value(mid(g))

    plus_fn = minus_fn = None
    if sys.grad_base is not None and sys.grad_fiber is not None:
        # chain rule through the midpoint substitution
        def plus_fn(g):
            a = mid(g)
            return geo.Momentum(inst, geo.beta(g),
                                sys.d_fiber(a) + 0.5 * h * sys.d_base(a))

        def minus_fn(g):
            a = mid(g)
            return geo.Momentum(inst, geo.alpha(g),
                                sys.d_fiber(a) - 0.5 * h * sys.d_base(a))

    return DiscreteLagrangian(inst, h, fn, dlegendre_plus_fn=plus_fn,
                              dlegendre_minus_fn=minus_fn, expected_order=2)


# ---------------------------------------------------------------------------
# retraction spaces: exp on the algebra, affine on gl(n)
# ---------------------------------------------------------------------------

def default_matrix_extension(sys: dyn.LagrangianSystem) -> Callable:
    """Extend an algebra Lagrangian to ``gl(n)`` by orthogonal splitting.

    The ambient matrix is decomposed against the algebra span under the
    Frobenius inner product; the complement contributes its own Frobenius
    quadratic form, which keeps the extension regular.
    """
    group = geo.instance_group(sys.instance)

    def l_ext(m):
        xi = group.algebra_coords(m, check=False)
        m_alg = group.algebra_matrix(xi)
        rest = m - m_alg
        return sys.value(geo.algebra_vector(group, xi)) + 0.5 * np.sum(rest * rest)

    return l_ext


class _TauSpace:
    """Uniform view of a retraction: stage vectors, derivatives, Lagrangian."""

    def __init__(self, sys, tau_kind, h, l_ext=None):
        self.group = geo.instance_group(sys.instance)
        self.kind = tau_kind
        self.h = h
        if tau_kind == "exp":
            self.dim = self.group.dim
            self._lag = lambda vec: sys.value(geo.algebra_vector(self.group, vec))
        elif tau_kind == "affine":
            n = self.group.ambient_dim
            self.dim = n * n
            ext = l_ext if l_ext is not None else default_matrix_extension(sys)
            self._lag = lambda vec: ext(vec.reshape(n, n))
        else:
            raise ValueError(f"unknown retraction kind {tau_kind!r}")

    def tau_inv(self, g_mat):
        if self.kind == "exp":
            return geo.group_log(self.group, g_mat)
        return ((np.asarray(g_mat) - np.eye(self.group.ambient_dim))
                / self.h).ravel()

    def dtau(self, xi, eta):
        if self.kind == "exp":
            return geo.dexp_left(self.group, xi, eta)
        n = self.group.ambient_dim
        A = np.eye(n) + self.h * xi.reshape(n, n)
        try:
            return np.linalg.solve(A, self.h * eta.reshape(n, n)).ravel()
        except np.linalg.LinAlgError as exc:
            raise SingularTau("affine retraction not invertible") from exc

    def dtau_inv(self, xi, eta):
        if self.kind == "exp":
            return geo.dexpinv_left(self.group, xi, eta)
        n = self.group.ambient_dim
        A = np.eye(n) + self.h * xi.reshape(n, n)
        return (A @ eta.reshape(n, n)).ravel() / self.h

    def lag(self, vec):
        return float(self._lag(vec))


def _group_validity(group: MatrixGroup):
    if np.isfinite(group.branch_radius):
        return 0.9 * group.branch_radius
    return None


# ---------------------------------------------------------------------------
# group schemes
# ---------------------------------------------------------------------------

def tau_alpha_group(sys: dyn.LagrangianSystem, tau_kind: str, alpha: float,
                    h: float) -> DiscreteLagrangian:
    """``L_h(g) = h l(d_l tau_{alpha tau^{-1}(g)}(tau^{-1}(g)/h))``.

    For ``tau = exp`` the argument collapses to ``log(g)/h`` and the value
    is independent of ``alpha``; analytic Legendre transforms are attached
    in that case through the inverse trivialized derivative of the log.
    """
    group = geo.instance_group(sys.instance)
    if group is None or not isinstance(sys.instance, MatrixGroup):
        raise ValueError("tau_alpha_group requires a matrix-group instance")
    space = _TauSpace(sys, tau_kind, h)

    def fn(g):
        eta = space.tau_inv(g.mat)
        return h * space.lag(space.dtau(alpha * eta, eta / h))

    plus_fn = minus_fn = None
    if tau_kind == "exp" and sys.grad_fiber is not None:
        def _momenta(g):
            eta = geo.group_log(group, g.mat)
            mu_bar = sys.d_fiber(geo.algebra_vector(group, eta / h))
            return eta, mu_bar

        def plus_fn(g):
            eta, mu_bar = _momenta(g)
            # <mu_bar, d/ds log(g exp(s E_a))> = <mu_bar, dexpinv(eta, E_a)>
            op = np.column_stack([geo.dexpinv_left(group, eta, e)
                                  for e in np.eye(group.dim)])
            return geo.Momentum(sys.instance, geo.beta(g), op.T @ mu_bar)

        def minus_fn(g):
            eta, mu_bar = _momenta(g)
            op = np.column_stack([geo.dexpinv_left(group, -eta, e)
                                  for e in np.eye(group.dim)])
            return geo.Momentum(sys.instance, geo.alpha(g), op.T @ mu_bar)

    return DiscreteLagrangian(sys.instance, h, fn,
                              dlegendre_plus_fn=plus_fn,
                              dlegendre_minus_fn=minus_fn,
                              validity_radius=_group_validity(group),
                              expected_order=2)


def affine_tau_matrix(sys: dyn.LagrangianSystem, alpha: float, h: float,
                      l_ext: Callable | None = None) -> DiscreteLagrangian:
    """``L_h(A) = h l_ext(((1-alpha) I + alpha A)^{-1} (A - I)/h)``.

    The argument generally lies outside the subalgebra, so the extended
    Lagrangian is evaluated; by default the Frobenius-orthogonal extension
    of the system's Lagrangian is used.
    """
    group = geo.instance_group(sys.instance)
    if group is None or not isinstance(sys.instance, MatrixGroup):
        raise ValueError("affine_tau_matrix requires a matrix-group instance")
    ext = l_ext if l_ext is not None else default_matrix_extension(sys)
    n = group.ambient_dim

    def fn(g):
        A = g.mat
        B = (1.0 - alpha) * np.eye(n) + alpha * A
        try:
            arg = np.linalg.solve(B, (A - np.eye(n)) / h)
        except np.linalg.LinAlgError as exc:
            raise SingularTau("(1-alpha) I + alpha A is singular") from exc
        if np.linalg.cond(B) > 1e12:
            raise SingularTau("(1-alpha) I + alpha A is numerically singular")
        return h * float(ext(arg))

    return DiscreteLagrangian(sys.instance, h, fn,
                              validity_radius=_group_validity(group))


def symmetrized(ld_a: DiscreteLagrangian, ld_b: DiscreteLagrangian) -> DiscreteLagrangian:
    """Pointwise average of two discrete Lagrangians at ``alpha`` and ``1-alpha``."""
    if ld_a.instance is not ld_b.instance:
        raise ValueError("cannot symmetrize across instances")
    if ld_a.h != ld_b.h:
        raise ValueError("cannot symmetrize across step sizes")

    def fn(g):
        return 0.5 * (ld_a(g) + ld_b(g))

    plus_fn = minus_fn = None
    if ld_a.dlegendre_plus_fn is not None and ld_b.dlegendre_plus_fn is not None:
        def plus_fn(g):
            ma = ld_a.dlegendre_plus_fn(g)
            mb = ld_b.dlegendre_plus_fn(g)
            return geo.Momentum(ld_a.instance, ma.base, 0.5 * (ma.fiber + mb.fiber))

        def minus_fn(g):
            ma = ld_a.dlegendre_minus_fn(g)
            mb = ld_b.dlegendre_minus_fn(g)
            return geo.Momentum(ld_a.instance, ma.base, 0.5 * (ma.fiber + mb.fiber))

    radii = [r for r in (ld_a.validity_radius, ld_b.validity_radius) if r is not None]
    return DiscreteLagrangian(ld_a.instance, ld_a.h, fn,
                              dlegendre_plus_fn=plus_fn,
                              dlegendre_minus_fn=minus_fn,
                              validity_radius=min(radii) if radii else None,
                              expected_order=2)


def symmetrized_affine(sys, alpha, h, l_ext=None) -> DiscreteLagrangian:
    """Average of the affine scheme at ``alpha`` and ``1 - alpha``."""
    return symmetrized(affine_tau_matrix(sys, alpha, h, l_ext),
                       affine_tau_matrix(sys, 1.0 - alpha, h, l_ext))


# ---------------------------------------------------------------------------
# variational Runge-Kutta schemes
# ---------------------------------------------------------------------------

def _rk_stage_values(space: _TauSpace, table: ButcherTable, h, etas, rkmk):
    """Stage arguments ``xi_i`` from the stacked stage velocities."""
    s = table.stages
    if not rkmk:
        return [h * sum(table.a[i, j] * etas[j] for j in range(s))
                for i in range(s)]
    # inner fixed point xi_i = h sum_j a_ij dtau_inv(xi_j, eta_j)
    xis = [h * sum(table.a[i, j] * etas[j] for j in range(s)) for i in range(s)]
    for _ in range(100):
        corr = [space.dtau_inv(xis[j], etas[j]) for j in range(s)]
        new = [h * sum(table.a[i, j] * corr[j] for j in range(s))
               for i in range(s)]
        delta = max(np.max(np.abs(new[i] - xis[i])) for i in range(s))
        xis = new
        if delta < 1e-14:
            break
    return xis


def rk_stage_solution(sys, tau_kind, table: ButcherTable, h, g,
                      rkmk=False, tol=5e-11, max_iters=80, l_ext=None):
    """Solve the constrained stationarity system for the stage velocities.

    Returns ``(value, etas, lam, kkt_residual_norm)``.  Stationarity of
    the weighted stage sum is assembled by central finite differences of
    the summand; the linear (or, for the Munthe-Kaas variant, nonlinear)
    reconstruction constraint is enforced through one multiplier block.
    """
    space = _TauSpace(sys, tau_kind, h, l_ext=l_ext)
    if np.any(table.b == 0.0):
        raise ValueError("Butcher weights must be nonzero")
    s = table.stages
    p = space.dim
    target = space.tau_inv(g.mat)

    def objective(eta_flat):
        etas = eta_flat.reshape(s, p)
        xis = _rk_stage_values(space, table, h, list(etas), rkmk)
        return h * sum(table.b[i] * space.lag(space.dtau(xis[i], etas[i]))
                       for i in range(s))

    def constraint(eta_flat):
        etas = eta_flat.reshape(s, p)
        if not rkmk:
            return h * sum(table.b[j] * etas[j] for j in range(s)) - target
        xis = _rk_stage_values(space, table, h, list(etas), rkmk)
        return h * sum(table.b[j] * space.dtau_inv(xis[j], etas[j])
                       for j in range(s)) - target

    def grad_objective(eta_flat):
        step = _EPS ** (1.0 / 3.0) * (1.0 + np.linalg.norm(eta_flat))
        grad = np.zeros(s * p)
        for k in range(s * p):
            e = np.zeros(s * p)
            e[k] = step
            grad[k] = (objective(eta_flat + e) - objective(eta_flat - e)) / (2 * step)
        return grad

    def kkt(zz):
        eta_flat, lam = zz[:s * p], zz[s * p:]
        r1 = grad_objective(eta_flat)
        if not rkmk:
            r1 = r1 + h * np.kron(table.b, np.eye(p)).T @ lam
        else:
            c0 = constraint(eta_flat)
            Jc = fd_jacobian(constraint, eta_flat, c0, step_scale=1e-6)
            r1 = r1 + Jc.T @ lam
        return np.concatenate([r1, constraint(eta_flat)])

    eta0 = np.tile(target / h, s)
    z0 = np.concatenate([eta0, np.zeros(p)])
    z, r, _ = damped_newton(kkt, z0, tol=tol, max_iters=max_iters,
                            label="rk stationarity")
    etas = z[:s * p].reshape(s, p)
    return objective(z[:s * p]), etas, z[s * p:], float(np.linalg.norm(r))


def rk_variational(sys, tau_kind, table: ButcherTable, h,
                   l_ext=None) -> DiscreteLagrangian:
    """Stationary value of the partitioned Runge-Kutta action sum."""
    group = geo.instance_group(sys.instance)

    def fn(g):
        value, _, _, _ = rk_stage_solution(sys, tau_kind, table, h, g,
                                           rkmk=False, l_ext=l_ext)
        return value

    return DiscreteLagrangian(sys.instance, h, fn,
                              validity_radius=_group_validity(group))


def rkmk_variational(sys, tau_kind, table: ButcherTable, h,
                     l_ext=None) -> DiscreteLagrangian:
    """Munthe-Kaas variant: stage values corrected by ``dtau^{-1}``."""
    group = geo.instance_group(sys.instance)

    def fn(g):
        value, _, _, _ = rk_stage_solution(sys, tau_kind, table, h, g,
                                           rkmk=True, l_ext=l_ext)
        return value

    return DiscreteLagrangian(sys.instance, h, fn,
                              validity_radius=_group_validity(group))


# ---------------------------------------------------------------------------
# trivial bundle
# ---------------------------------------------------------------------------

def bundle_product(sys: dyn.LagrangianSystem, h: float) -> DiscreteLagrangian:
    """Product of the exp discretization on the group factor with the
    Euclidean midpoint rule on the base:
    ``h l(log(k)/h, (x0+x1)/2, (x1-x0)/h)``."""
    inst = sys.instance
    if not isinstance(inst, TrivialBundle):
        raise ValueError("bundle_product requires a trivial-bundle instance")
    group = inst.group

    def fn(g):
        xi = geo.group_log(group, g.mat) / h
        a = geo.bundle_vector(inst, xi, 0.5 * (g.src + g.dst),
                              (g.dst - g.src) / h)
        return h * sys.value(a)

    return DiscreteLagrangian(inst, h, fn,
                              validity_radius=_group_validity(group),
                              expected_order=2)


# ---------------------------------------------------------------------------
# config-facing dispatch
# ---------------------------------------------------------------------------

def build(spec: SchemeSpec, sys: dyn.LagrangianSystem, h: float) -> DiscreteLagrangian:
    """Construct a catalogue scheme from its config description."""
    kind = spec.kind
    if kind == "midpoint_pair":
        return midpoint_pair(sys, h)
    if kind == "tau_alpha":
        if spec.tau == "affine":
            return affine_tau_matrix(sys, spec.alpha, h)
        return tau_alpha_group(sys, spec.tau, spec.alpha, h)
    if kind == "affine_tau_matrix":
        return affine_tau_matrix(sys, spec.alpha, h)
    if kind == "symmetrized":
        if spec.tau == "affine":
            return symmetrized_affine(sys, spec.alpha, h)
        return symmetrized(tau_alpha_group(sys, spec.tau, spec.alpha, h),
                           tau_alpha_group(sys, spec.tau, 1.0 - spec.alpha, h))
    if kind == "rk_variational":
        table = spec.table if spec.table is not None else MIDPOINT_TABLE
        return rk_variational(sys, spec.tau, table, h)
    if kind == "rkmk_variational":
        table = spec.table if spec.table is not None else MIDPOINT_TABLE
        return rkmk_variational(sys, spec.tau, table, h)
    if kind == "bundle_product":
        return bundle_product(sys, h)
    raise ValueError(f"unknown scheme kind {kind!r}")
