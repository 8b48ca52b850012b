"""Concrete groupoid/algebroid instances and their group-theoretic kernels.

Three instances are supported:

* the pair groupoid on R^n, whose algebroid is the tangent bundle,
* matrix Lie groups given by an algebra basis (SO(3) ships with closed
  forms, anything else goes through series/Pade routines),
* trivial principal bundles ``K x (R^m x R^m)`` whose algebroid is the
  product ``k x T R^m``.

All three are described uniformly by a base dimension, a fiber dimension,
a constant anchor matrix ``rho`` and a constant structure tensor ``C``,
which is what the dynamics layer consumes.  Algebra elements are stored as
coordinate vectors against the declared basis; the matrix form is
materialized on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm, logm

from .errors import NotComposable, OutOfBranch, SingularTau

# Endpoint matching tolerance for composability, absolute.  Callers that
# need looser matching must snap endpoints before composing.
COMPOSE_TOL = 1e-9

# Structure-constant consistency tolerance (antisymmetry, closure, Jacobi).
STRUCTURE_TOL = 1e-12

_EMPTY = np.zeros(0)


def _as_vector(x):
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    return v


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PairEuclidean:
    """Pair groupoid over R^n; arrows are ordered point pairs (q0, q1)."""

    n: int

    @property
    def dim_base(self):
        return self.n

    @property
    def dim_fiber(self):
        return self.n

    @cached_property
    def anchor(self):
        return np.eye(self.n)

    @cached_property
    def struct_tensor(self):
        return np.zeros((self.n, self.n, self.n))

    @property
    def chart_dim(self):
        return 2 * self.n


@dataclass(frozen=True, eq=False)
class MatrixGroup:
    """Matrix Lie group described by a basis of its algebra.

    ``basis`` has shape ``(d, n, n)`` and ``struct_consts[a, b, c]`` holds
    the coefficient of ``E_c`` in ``[E_a, E_b]``.  Consistency of the
    structure constants (antisymmetry, bracket closure against the basis,
    Jacobi identity) is validated at construction time.
    """

    basis: np.ndarray
    struct_consts: np.ndarray
    name: str = "matrix_group"
    closed_form_so3: bool = False
    branch_radius: float = np.inf

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        struct = np.asarray(self.struct_consts, dtype=float)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "struct_consts", struct)
        d = basis.shape[0]
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2]:
            raise ValueError("basis must have shape (d, n, n)")
        if struct.shape != (d, d, d):
            raise ValueError("structure constants must have shape (d, d, d)")
        self._validate_structure()

    def _validate_structure(self):
        C = self.struct_consts
        if np.max(np.abs(C + np.swapaxes(C, 0, 1))) > STRUCTURE_TOL:
            raise ValueError("structure constants are not antisymmetric")
        # bracket closure: [E_a, E_b] must equal sum_c C[a,b,c] E_c
        comm = np.einsum("aij,bjk->abik", self.basis, self.basis)
        comm = comm - np.swapaxes(comm, 0, 1)
        recon = np.einsum("abc,cik->abik", C, self.basis)
        if np.max(np.abs(comm - recon)) > STRUCTURE_TOL:
            raise ValueError("basis commutators do not close on the algebra")
        jac = (
            np.einsum("abe,ecf->abcf", C, C)
            + np.einsum("bce,eaf->abcf", C, C)
            + np.einsum("cae,ebf->abcf", C, C)
        )
        if np.max(np.abs(jac)) > STRUCTURE_TOL:
            raise ValueError("structure constants violate the Jacobi identity")

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def ambient_dim(self):
        return self.basis.shape[1]

    @property
    def dim_base(self):
        return 0

    @property
    def dim_fiber(self):
        return self.dim

    @cached_property
    def anchor(self):
        return np.zeros((0, self.dim))

    @property
    def struct_tensor(self):
        return self.struct_consts

    @property
    def chart_dim(self):
        return self.dim

    @cached_property
    def _basis_pinv(self):
        flat = self.basis.reshape(self.dim, -1)
        return np.linalg.pinv(flat)

    def algebra_matrix(self, xi):
        """Materialize coordinates as an ambient n x n matrix."""
        return np.einsum("a,aij->ij", _as_vector(xi), self.basis)

    def algebra_coords(self, mat, check: bool = True):
        """Project an ambient matrix onto the basis, returning coordinates."""
        mat = np.asarray(mat, dtype=float)
        xi = self._basis_pinv.T @ mat.ravel()
        if check:
            resid = np.linalg.norm(self.algebra_matrix(xi) - mat)
            if resid > 1e-9 * (1.0 + np.linalg.norm(mat)):
                raise ValueError("matrix does not lie in the algebra span")
        return xi


@dataclass(frozen=True, eq=False)
class TrivialBundle:
    """Trivial principal bundle ``K x R^m``; arrows are ``(k, x0, x1)``.

    The algebroid is ``k x T R^m`` with anchor ``(xi, xdot) -> xdot`` and
    bracket concentrated on the algebra block.
    """

    group: MatrixGroup
    base_dim: int

    @property
    def dim_base(self):
        return self.base_dim

    @property
    def dim_fiber(self):
        return self.group.dim + self.base_dim

    @cached_property
    def anchor(self):
        rho = np.zeros((self.base_dim, self.dim_fiber))
        rho[:, self.group.dim:] = np.eye(self.base_dim)
        return rho

    @cached_property
    def struct_tensor(self):
        d = self.group.dim
        f = self.dim_fiber
        C = np.zeros((f, f, f))
        C[:d, :d, :d] = self.group.struct_consts
        return C

    @property
    def chart_dim(self):
        return self.group.dim + 2 * self.base_dim

    def split_fiber(self, y):
        d = self.group.dim
        return y[:d], y[d:]


Instance = PairEuclidean | MatrixGroup | TrivialBundle


def instance_group(instance) -> MatrixGroup | None:
    """The matrix-group factor of an instance, if any."""
    if isinstance(instance, MatrixGroup):
        return instance
    if isinstance(instance, TrivialBundle):
        return instance.group
    return None


# ---------------------------------------------------------------------------
# so(3)
# ---------------------------------------------------------------------------

def so3_hat(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def so3_vee(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def so3() -> MatrixGroup:
    """SO(3) with the hat-map basis; exp/log use Rodrigues closed forms."""
    basis = np.stack([so3_hat(e) for e in np.eye(3)])
    eps = np.zeros((3, 3, 3))
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[a, b, c] = 1.0
        eps[b, a, c] = -1.0
    return MatrixGroup(basis=basis, struct_consts=eps, name="so3",
                       closed_form_so3=True, branch_radius=np.pi)


def _so3_exp(xi):
    theta = np.linalg.norm(xi)
    K = so3_hat(xi)
    if theta < 1e-4:
        # Taylor expansions avoid the 0/0 in sin(theta)/theta near identity.
        t2 = theta * theta
        s1 = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        s2 = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        s1 = np.sin(theta) / theta
        s2 = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + s1 * K + s2 * (K @ K)


def _so3_log(R):
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if theta >= np.pi - 1e-6:
        raise OutOfBranch(f"rotation angle {theta:.6f} too close to pi")
    w = so3_vee(R - R.T) / 2.0
    if theta < 1e-4:
        t2 = theta * theta
        scale = 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
    else:
        scale = theta / np.sin(theta)
    return scale * w


# ---------------------------------------------------------------------------
# exponential / logarithm / trivialized derivatives
# ---------------------------------------------------------------------------

def group_exp(group: MatrixGroup, xi) -> np.ndarray:
    """Exponential of algebra coordinates; a total function."""
    xi = _as_vector(xi)
    if group.closed_form_so3:
        return _so3_exp(xi)
    return expm(group.algebra_matrix(xi))


def group_log(group: MatrixGroup, g) -> np.ndarray:
    """Principal logarithm in algebra coordinates.

    Raises ``OutOfBranch`` when ``g`` lies outside the injectivity branch
    (for SO(3): rotation angle above ``pi - 1e-6``).
    """
    g = np.asarray(g, dtype=float)
    if group.closed_form_so3:
        return _so3_log(g)
    m = logm(g)
    if np.max(np.abs(m.imag)) > 1e-9:
        raise OutOfBranch("matrix logarithm left the real branch")
    m = m.real
    try:
        xi = group.algebra_coords(m)
    except ValueError as exc:
        raise OutOfBranch(str(exc)) from exc
    if np.linalg.norm(group_exp(group, xi) - g) > 1e-8 * (1.0 + np.linalg.norm(g)):
        raise OutOfBranch("exp(log(g)) does not reproduce g")
    return xi


def bracket(group: MatrixGroup, xi, eta):
    """Lie bracket in coordinates, via the structure constants."""
    return np.einsum("abc,a,b->c", group.struct_consts,
                     _as_vector(xi), _as_vector(eta))


def ad_matrix(group: MatrixGroup, xi):
    """Matrix of ad_xi acting on algebra coordinates."""
    return np.einsum("abc,a->cb", group.struct_consts, _as_vector(xi))


def coad(group: MatrixGroup, xi, mu):
    """Coadjoint action with the pairing ``<ad*_xi mu, eta> = <mu, [xi, eta]>``.

    On so(3) with the hat basis this is ``mu x xi`` in vector form, the
    convention under which rigid-body momentum is conserved.
    """
    return np.einsum("abc,a,c->b", group.struct_consts,
                     _as_vector(xi), _as_vector(mu))


def _dexp_operator(group: MatrixGroup, xi):
    """Matrix of ``d_l exp_xi`` on coordinates: ``(1 - e^{-ad_xi}) / ad_xi``."""
    A = ad_matrix(group, xi)
    term = np.eye(group.dim)
    total = np.eye(group.dim)
    for j in range(1, 80):
        term = term @ (-A) / (j + 1)
        total = total + term
        if np.max(np.abs(term)) < 1e-15:
            break
    return total


def dexp_left(group: MatrixGroup, xi, eta):
    """Left-trivialized derivative of exp at ``xi`` applied to ``eta``."""
    return _dexp_operator(group, xi) @ _as_vector(eta)


def dexpinv_left(group: MatrixGroup, xi, eta):
    """Inverse of ``dexp_left(xi, .)``; solves against the series operator."""
    return np.linalg.solve(_dexp_operator(group, xi), _as_vector(eta))


def dtau_left(group: MatrixGroup, tau_kind: str, xi, eta, h: float | None = None):
    """Left-trivialized derivative of a retraction, as an ambient matrix.

    ``tau_kind='exp'`` delegates to ``dexp_left``.  ``tau_kind='affine'``
    uses ``tau(a) = I + h a`` and returns ``(I + h X)^{-1} (h H)``; that
    matrix generally lies outside the algebra span, which is why the
    ambient form is returned for both kinds.
    """
    if tau_kind == "exp":
        return group.algebra_matrix(dexp_left(group, xi, eta))
    if tau_kind == "affine":
        if h is None:
            raise ValueError("affine retraction requires the step size h")
        X = group.algebra_matrix(xi)
        H = group.algebra_matrix(eta)
        A = np.eye(group.ambient_dim) + h * X
        try:
            return np.linalg.solve(A, h * H)
        except np.linalg.LinAlgError as exc:
            raise SingularTau("I + h*X is not invertible") from exc
    raise ValueError(f"unknown retraction kind {tau_kind!r}")


# ---------------------------------------------------------------------------
# groupoid elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroupoidElement:
    """An arrow of one of the three instances.

    ``mat`` is the group factor (``None`` on the pair instance), ``src``
    and ``dst`` are the base endpoints (empty on a bare group).
    """

    instance: Instance
    mat: np.ndarray | None
    src: np.ndarray
    dst: np.ndarray

    # aliases matching the usual notation per instance
    @property
    def q0(self):
        return self.src

    @property
    def q1(self):
        return self.dst

    @property
    def g(self):
        return self.mat

    @property
    def k(self):
        return self.mat

    @property
    def x0(self):
        return self.src

    @property
    def x1(self):
        return self.dst


@dataclass(frozen=True, eq=False)
class AlgebroidVector:
    """Algebroid element in coordinates: base point and fiber vector."""

    instance: Instance
    base: np.ndarray
    fiber: np.ndarray


@dataclass(frozen=True, eq=False)
class Momentum:
    """Dual algebroid element (covector coordinates), same shapes."""

    instance: Instance
    base: np.ndarray
    fiber: np.ndarray


ON_GROUP_TOL = 1e-10


def _checked_group_matrix(group: MatrixGroup, g):
    g = np.asarray(g, dtype=float)
    if group.closed_form_so3:
        ortho = np.max(np.abs(g.T @ g - np.eye(3)))
        det = np.linalg.det(g)
        if ortho > ON_GROUP_TOL or abs(det - 1.0) > ON_GROUP_TOL:
            raise ValueError(
                f"matrix is off the rotation group (orthogonality defect "
                f"{ortho:.2e}, det {det:.12f})")
    return g


def pair_arrow(instance: PairEuclidean, q0, q1):
    return GroupoidElement(instance, None, _as_vector(q0), _as_vector(q1))


def group_arrow(instance: MatrixGroup, g):
    return GroupoidElement(instance, _checked_group_matrix(instance, g),
                           _EMPTY, _EMPTY)


def bundle_arrow(instance: TrivialBundle, k, x0, x1):
    return GroupoidElement(instance, _checked_group_matrix(instance.group, k),
                           _as_vector(x0), _as_vector(x1))


def tangent(instance: PairEuclidean, q, v):
    return AlgebroidVector(instance, _as_vector(q), _as_vector(v))


def algebra_vector(instance: MatrixGroup, xi):
    return AlgebroidVector(instance, _EMPTY, _as_vector(xi))


def bundle_vector(instance: TrivialBundle, xi, x, xdot):
    return AlgebroidVector(instance, _as_vector(x),
                           np.concatenate([_as_vector(xi), _as_vector(xdot)]))


def alpha(g: GroupoidElement):
    """Source base point of an arrow."""
    return g.src


def beta(g: GroupoidElement):
    """Target base point of an arrow."""
    return g.dst


def identity_at(instance: Instance, x=None) -> GroupoidElement:
    """Identity arrow over a base point."""
    if isinstance(instance, PairEuclidean):
        q = _as_vector(x)
        return pair_arrow(instance, q, q)
    if isinstance(instance, MatrixGroup):
        return group_arrow(instance, np.eye(instance.ambient_dim))
    q = _as_vector(x)
    return bundle_arrow(instance, np.eye(instance.group.ambient_dim), q, q)


def compose(a: GroupoidElement, b: GroupoidElement) -> GroupoidElement:
    """Groupoid multiplication; endpoints must match within ``COMPOSE_TOL``."""
    if a.instance is not b.instance:
        raise ValueError("arrows belong to different instances")
    mismatch = np.max(np.abs(a.dst - b.src)) if a.dst.size else 0.0
    if mismatch > COMPOSE_TOL:
        raise NotComposable(f"endpoint mismatch {mismatch:.3e} exceeds {COMPOSE_TOL:.0e}")
    mat = None if a.mat is None else a.mat @ b.mat
    return GroupoidElement(a.instance, mat, a.src, b.dst)


def inverse(a: GroupoidElement) -> GroupoidElement:
    """Groupoid inversion; swaps endpoints and inverts the group factor."""
    if a.mat is None:
        mat = None
    else:
        group = instance_group(a.instance)
        mat = a.mat.T if group.closed_form_so3 else np.linalg.inv(a.mat)
    return GroupoidElement(a.instance, mat, a.dst, a.src)


def on_group_check(group: MatrixGroup, g, tol=1e-10) -> bool:
    """For SO(3)-like groups: orthogonality and unit determinant check."""
    g = np.asarray(g)
    if group.closed_form_so3:
        return (np.max(np.abs(g.T @ g - np.eye(3))) <= tol
                and abs(np.linalg.det(g) - 1.0) <= tol)
    return True


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

def _relative_group_log(instance, ref_mat, mat):
    group = instance_group(instance)
    if group.closed_form_so3:
        rel = ref_mat.T @ mat
    else:
        rel = np.linalg.solve(ref_mat, mat)
    return group_log(group, rel)


def chart_coords(reference: GroupoidElement, a: GroupoidElement):
    """Coordinates of ``a`` in the chart centered at ``reference``.

    Pair: concatenated endpoint differences.  Group: ``log(r^{-1} a)``.
    Bundle: group log followed by both endpoint differences.  Vanishes at
    ``a == reference``; raises ``OutOfBranch`` outside the chart domain.
    """
    if reference.instance is not a.instance:
        raise ValueError("arrows belong to different instances")
    if reference.mat is None:
        return np.concatenate([a.src - reference.src, a.dst - reference.dst])
    log_part = _relative_group_log(a.instance, reference.mat, a.mat)
    if reference.src.size == 0:
        return log_part
    return np.concatenate([log_part, a.src - reference.src, a.dst - reference.dst])


def relative_target_coords(g_target: GroupoidElement, g: GroupoidElement):
    """Target-side chart block: the part of ``chart_coords`` that moves when
    the source point is pinned.  This is the shooting residual."""
    if g_target.mat is None:
        return g.dst - g_target.dst
    log_part = _relative_group_log(g.instance, g_target.mat, g.mat)
    if g_target.src.size == 0:
        return log_part
    return np.concatenate([log_part, g.dst - g_target.dst])


def target_offset(g: GroupoidElement, z) -> GroupoidElement:
    """Displace the target side of an arrow by chart coordinates ``z``.

    Pair: ``(q0, q1 + z)``.  Group: ``g . exp(z)``.  Bundle: group block
    times ``exp`` on the algebra part, base shift on the rest.  The layout
    of ``z`` matches ``relative_target_coords``.
    """
    z = _as_vector(z)
    inst = g.instance
    if g.mat is None:
        return GroupoidElement(inst, None, g.src, g.dst + z)
    group = instance_group(inst)
    d = group.dim
    mat = g.mat @ group_exp(group, z[:d])
    if g.src.size == 0:
        return GroupoidElement(inst, mat, g.src, g.dst)
    return GroupoidElement(inst, mat, g.src, g.dst + z[d:])


def source_offset(g: GroupoidElement, z) -> GroupoidElement:
    """Left-multiply by the inverse of the identity-based curve through ``z``.

    Pair: ``(q0 + z, q1)``.  Group: ``exp(-z) . g``.  Used for the
    source-side (right-invariant style) directional derivatives.
    """
    z = _as_vector(z)
    inst = g.instance
    if g.mat is None:
        return GroupoidElement(inst, None, g.src + z, g.dst)
    group = instance_group(inst)
    d = group.dim
    mat = group_exp(group, -z[:d]) @ g.mat
    if g.src.size == 0:
        return GroupoidElement(inst, mat, g.src, g.dst)
    return GroupoidElement(inst, mat, g.src + z[d:], g.dst)


def displacement_norm(g: GroupoidElement) -> float:
    """Cheap size measure of an arrow relative to the identity section."""
    total = 0.0
    if g.mat is not None:
        total += np.linalg.norm(g.mat - np.eye(g.mat.shape[0]))
    if g.dst.size:
        total += float(np.linalg.norm(g.dst - g.src))
    return total


def target_dim(instance: Instance) -> int:
    """Dimension of the target-side chart block (= fiber dimension)."""
    return instance.dim_fiber
