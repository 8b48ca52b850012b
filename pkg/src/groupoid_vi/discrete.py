"""Generic discrete mechanics on the three groupoid instances.

Discrete Legendre transforms are directional derivatives of the discrete
Lagrangian along invariant directions: left-translated identity curves at
the target and (inverted) right-style curves at the source.  Group
directions always use exp-curves ``g exp(s xi)`` rather than coordinate
charts.  The sign of the minus transform is pinned by its pair-instance
reduction ``-D_1 L_d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dynamics as dyn
from . import geometry as geo
from ._newton import damped_newton
from .errors import (GroupoidVIError, NoConvergence, NotComposable,
                     OutOfBranch, SingularJacobian, SingularRegularityMatrix)
from .geometry import GroupoidElement, Instance, MatrixGroup, Momentum

REGULARITY_COND_LIMIT = 1e8


@dataclass(frozen=True, eq=False)
class DiscreteLagrangian:
    """A scalar map on arrows with step size and derivative mode.

    When the analytic transform callables are absent, derivatives fall
    back to central differences with step ``1e-5 (1 + |g|)`` measured by
    the arrow's displacement from the identity section.  ``validity_radius``
    bounds the chart norm for which ``fn`` is trustworthy (``None`` means
    unrestricted).
    """

    instance: Instance
    h: float
    fn: Callable[[GroupoidElement], float]
    dlegendre_plus_fn: Optional[Callable[[GroupoidElement], Momentum]] = None
    dlegendre_minus_fn: Optional[Callable[[GroupoidElement], Momentum]] = None
    fd_step: Optional[float] = None
    validity_radius: Optional[float] = None
    expected_order: Optional[int] = None

    def __call__(self, g: GroupoidElement) -> float:
        return float(self.fn(g))


@dataclass(frozen=True)
class NewtonConfig:
    residual_tol: float = 1e-11
    max_iters: int = 40
    damping: float = 1.0


def _fd_step(ld: DiscreteLagrangian, g: GroupoidElement) -> float:
    if ld.fd_step is not None:
        return ld.fd_step
    return 1e-5 * (1.0 + geo.displacement_norm(g))


def _check_validity(ld: DiscreteLagrangian, g: GroupoidElement):
    if ld.validity_radius is None:
        return
    norm = 0.0
    if g.mat is not None:
        group = geo.instance_group(ld.instance)
        norm += float(np.linalg.norm(geo.group_log(group, g.mat)))
    if g.dst.size:
        norm += float(np.linalg.norm(g.dst - g.src))
    if norm > ld.validity_radius:
        raise OutOfBranch(
            f"arrow chart norm {norm:.3f} exceeds the scheme validity "
            f"radius {ld.validity_radius:.3f}")


def _direction(instance, idx):
    e = np.zeros(geo.target_dim(instance))
    e[idx] = 1.0
    return e


def dlegendre_plus(ld: DiscreteLagrangian, g: GroupoidElement) -> Momentum:
    """Momentum at the target: ``d/ds L_d(g . delta(s, xi_a))`` per direction."""
    _check_validity(ld, g)
    if ld.dlegendre_plus_fn is not None:
        return ld.dlegendre_plus_fn(g)
    step = _fd_step(ld, g)
    dim = geo.target_dim(ld.instance)
    mu = np.zeros(dim)
    for a in range(dim):
        e = _direction(ld.instance, a)
        fp = ld(geo.target_offset(g, step * e))
        fm = ld(geo.target_offset(g, -step * e))
        mu[a] = (fp - fm) / (2.0 * step)
    return Momentum(ld.instance, geo.beta(g), mu)


def dlegendre_minus(ld: DiscreteLagrangian, g: GroupoidElement) -> Momentum:
    """Momentum at the source: ``-d/ds L_d(delta(s, xi_a)^{-1} . g)``.

    On the pair instance this reduces to ``-D_1 L_d``; on a group the two
    built-in inversions cancel into ``+d/ds L_d(exp(s xi) g)``.
    """
    _check_validity(ld, g)
    if ld.dlegendre_minus_fn is not None:
        return ld.dlegendre_minus_fn(g)
    step = _fd_step(ld, g)
    dim = geo.target_dim(ld.instance)
    mu = np.zeros(dim)
    for a in range(dim):
        e = _direction(ld.instance, a)
        fp = ld(geo.source_offset(g, step * e))
        fm = ld(geo.source_offset(g, -step * e))
        mu[a] = -(fp - fm) / (2.0 * step)
    return Momentum(ld.instance, geo.alpha(g), mu)


def del_residual(ld: DiscreteLagrangian, g: GroupoidElement,
                 g_next: GroupoidElement) -> np.ndarray:
    """Momentum-matching defect ``F+ L_d(g) - F- L_d(g_next)``."""
    if geo.beta(g).size and np.max(np.abs(geo.beta(g) - geo.alpha(g_next))) > geo.COMPOSE_TOL:
        raise NotComposable("arrows do not share a base point")
    return dlegendre_plus(ld, g).fiber - dlegendre_minus(ld, g_next).fiber


def _advance_guess(g: GroupoidElement) -> GroupoidElement:
    """Translate an arrow forward to start at its own target (chart transport)."""
    inst = g.instance
    if g.mat is None:
        return geo.pair_arrow(inst, g.dst, 2.0 * g.dst - g.src)
    if g.src.size == 0:
        return geo.group_arrow(inst, g.mat.copy())
    return geo.bundle_arrow(inst, g.mat.copy(), g.dst, 2.0 * g.dst - g.src)


def regularity_matrix(ld: DiscreteLagrangian, g: GroupoidElement):
    """Mixed second directional derivatives and their condition number.

    Entry ``(a, b)`` differentiates along the source-side (right-invariant
    style) direction ``a`` and the target-side (left-invariant style)
    direction ``b``; the discrete Lagrangian is regular at ``g`` iff this
    matrix is invertible with condition number below 1e8.
    """
    step = _fd_step(ld, g)
    dim = geo.target_dim(ld.instance)
    M = np.zeros((dim, dim))
    for a in range(dim):
        ea = _direction(ld.instance, a)
        for b in range(dim):
            eb = _direction(ld.instance, b)

            def f(s, t):
                return ld(geo.target_offset(
                    geo.source_offset(g, -s * ea), t * eb))

            M[a, b] = (f(step, step) - f(step, -step)
                       - f(-step, step) + f(-step, -step)) / (4.0 * step * step)
    cond = np.linalg.cond(M) if np.any(M) else np.inf
    return M, float(cond)


def evolve(ld: DiscreteLagrangian, g: GroupoidElement,
           cfg: NewtonConfig = NewtonConfig(),
           guess: GroupoidElement | None = None) -> GroupoidElement:
    """Next arrow of the discrete flow: solves the momentum-matching
    condition by Newton on the target-side chart of the initial guess."""
    base = _advance_guess(g) if guess is None else guess
    f_plus = dlegendre_plus(ld, g).fiber

    def residual(z):
        return f_plus - dlegendre_minus(ld, geo.target_offset(base, z)).fiber

    def check_regularity(cause=None):
        _, cond = regularity_matrix(ld, g)
        if not np.isfinite(cond) or cond >= REGULARITY_COND_LIMIT:
            raise SingularRegularityMatrix(
                f"regularity condition number {cond:.3e} at the current arrow"
            ) from cause

    z0 = np.zeros(geo.target_dim(ld.instance))
    try:
        z, _, iters = damped_newton(residual, z0, tol=cfg.residual_tol,
                                    max_iters=cfg.max_iters, damping=cfg.damping,
                                    label="discrete evolve")
    except (SingularJacobian, NoConvergence) as exc:
        check_regularity(exc)
        raise
    if iters == 0:
        # the guess satisfied the residual before any Jacobian was formed;
        # rule out a degenerate scheme for which every arrow "solves" it
        check_regularity()
    return geo.target_offset(base, z)


def hamiltonian_evolve(ld: DiscreteLagrangian, mu: Momentum,
                       cfg: NewtonConfig = NewtonConfig(),
                       guess: GroupoidElement | None = None) -> Momentum:
    """One step of the discrete Hamiltonian evolution ``F+ o (F-)^{-1}``."""
    base = geo.identity_at(ld.instance, mu.base if mu.base.size else None) \
        if guess is None else guess

    def residual(z):
        return dlegendre_minus(ld, geo.target_offset(base, z)).fiber - mu.fiber

    z0 = np.zeros(geo.target_dim(ld.instance))
    z, _, _ = damped_newton(residual, z0, tol=cfg.residual_tol,
                            max_iters=cfg.max_iters, damping=cfg.damping,
                            label="hamiltonian evolve")
    return dlegendre_plus(ld, geo.target_offset(base, z))


@dataclass
class SimulationRecord:
    """Trajectory of a discrete flow with per-step diagnostics."""

    arrows: list
    momenta: list                 # F+ momentum per evolved arrow
    energies: Optional[list]
    casimirs: Optional[list]
    steps_completed: int
    failed: bool = False
    failure_message: str = ""


def simulate(ld: DiscreteLagrangian, g0: GroupoidElement, n_steps: int,
             cfg: NewtonConfig = NewtonConfig(),
             system: dyn.LagrangianSystem | None = None) -> SimulationRecord:
    """Iterate ``evolve``; stops early with a flag on solver failure.

    When a continuous system is attached, each recorded momentum is pulled
    back through ``legendre_inverse`` to report the energy; on a bare
    matrix group the Casimir ``|mu|`` is recorded as well.
    """
    arrows = [g0]
    momenta = []
    energies = [] if system is not None else None
    casimirs = [] if isinstance(ld.instance, MatrixGroup) else None
    a_guess = None
    record = SimulationRecord(arrows, momenta, energies, casimirs, 0)

    g = g0
    for _ in range(n_steps):
        try:
            g = evolve(ld, g, cfg)
        except GroupoidVIError as exc:
            record.failed = True
            record.failure_message = str(exc)
            break
        arrows.append(g)
        mu = dlegendre_plus(ld, g)
        momenta.append(mu)
        if casimirs is not None:
            casimirs.append(float(np.linalg.norm(mu.fiber)))
        if energies is not None:
            a_guess = dyn.legendre_inverse(system, mu, guess=a_guess)
            energies.append(dyn.energy(system, a_guess))
        record.steps_completed += 1
    return record
