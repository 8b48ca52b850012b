"""Damped Newton iteration shared by the shooting and discrete solvers."""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence, SingularJacobian

MAX_HALVINGS = 8


def fd_jacobian(residual, z, r0, step_scale=1e-6):
    """Forward-difference Jacobian of ``residual`` at ``z``."""
    n = z.size
    m = r0.size
    J = np.zeros((m, n))
    step = step_scale * (1.0 + np.linalg.norm(z))
    for k in range(n):
        dz = np.zeros(n)
        dz[k] = step
        J[:, k] = (residual(z + dz) - r0) / step
    return J


def damped_newton(residual, z0, *, tol, max_iters, damping=1.0,
                  jacobian=None, step_scale=1e-6, label="newton"):
    """Solve ``residual(z) = 0`` by a damped Newton iteration.

    ``jacobian`` may be a constant matrix (simplified Newton) or ``None``
    for forward finite differences recomputed each iteration.  The step is
    halved (at most ``MAX_HALVINGS`` times) whenever the residual norm
    fails to decrease.  Returns ``(z, r, n_iters)``.
    """
    z = np.asarray(z0, dtype=float).copy()
    r = np.asarray(residual(z), dtype=float)
    norm = np.linalg.norm(r)
    for it in range(max_iters + 1):
        if norm <= tol:
            return z, r, it
        if it == max_iters:
            break
        if jacobian is None:
            J = fd_jacobian(residual, z, r, step_scale)
        else:
            J = jacobian
        try:
            dz = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"{label}: singular Jacobian") from exc
        if not np.all(np.isfinite(dz)):
            raise SingularJacobian(f"{label}: non-finite Newton step")
        lam = damping
        accepted = False
        for _ in range(MAX_HALVINGS):
            z_try = z + lam * dz
            r_try = np.asarray(residual(z_try), dtype=float)
            norm_try = np.linalg.norm(r_try)
            if norm_try < norm or norm_try <= tol:
                z, r, norm = z_try, r_try, norm_try
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise NoConvergence(
                f"{label}: line search stalled at residual {norm:.3e}")
    raise NoConvergence(
        f"{label}: residual {norm:.3e} above {tol:.1e} after {max_iters} iterations")
