"""Frames, coframes, the right GL action and matrix-group membership.

Conventions
-----------
A coframe is stored as an ``n x n`` matrix whose *rows* are covectors in
standard coordinates; its dual frame is the matrix inverse, whose *columns*
are the frame vectors.  ``GL(n)`` acts on coframes from the right by
``(e, A) -> A^{-1} e``, which in this layout is a single left
multiplication.

Structure tensors transform by

* metric / two-form (type (2,0)): ``T -> A^{-T} T A^{-1}``
* operator (type (1,1)):         ``J -> A J A^{-1}``
* subspace:                      ``span(B) -> span(A B)``
* vector:                        ``v -> A v``
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import expm

from .errors import (
    DimensionMismatch,
    MalformedTensor,
    SingularCoframe,
    SingularGroupElement,
    UnsupportedDimension,
)

COND_LIMIT = 1e12
DET_RTOL = 1e-12
MEMBERSHIP_TOL = 1e-8


def _as_square(mat, name="matrix"):
    a = np.array(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def is_singular(mat):
    """True if ``mat`` fails the condition-number or scaled-determinant test."""
    n = mat.shape[0]
    if not np.all(np.isfinite(mat)):
        return True
    norm = np.linalg.norm(mat, 2)
    if norm == 0.0:
        return True
    if np.linalg.cond(mat) > COND_LIMIT:
        return True
    return abs(np.linalg.det(mat / norm)) < DET_RTOL


def _check_invertible(A, exc=SingularGroupElement):
    if is_singular(A):
        raise exc("matrix is singular or too ill-conditioned")
    return A


@dataclass(frozen=True, eq=False)
class Coframe:
    """Rows of ``mat`` are the covectors ``e^1, ..., e^n``."""

    mat: np.ndarray

    def __post_init__(self):
        m = _as_square(self.mat, "coframe")
        if is_singular(m):
            raise SingularCoframe("coframe matrix is singular")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def dim(self):
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.mat, dtype=dtype)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))


@dataclass(frozen=True, eq=False)
class Frame:
    """Columns of ``mat`` are the frame vectors ``e_1, ..., e_n``."""

    mat: np.ndarray

    def __post_init__(self):
        m = _as_square(self.mat, "frame")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def dim(self):
        return self.mat.shape[0]


def as_coframe(e):
    return e if isinstance(e, Coframe) else Coframe(e)


def dual_frame(e):
    """Frame dual to coframe ``e``, i.e. ``e^k(e_i) = delta^k_i``."""
    e = as_coframe(e)
    n = e.dim
    return Frame(np.linalg.solve(e.mat, np.eye(n)))


def act_on_coframe(A, e):
    """Right action ``(e, A) -> A^{-1} e``."""
    e = as_coframe(e)
    A = _as_square(A, "group element")
    if A.shape != e.mat.shape:
        raise DimensionMismatch(f"group element {A.shape} vs coframe {e.mat.shape}")
    _check_invertible(A)
    return Coframe(np.linalg.solve(A, e.mat))


def transition(e, f):
    """The unique ``A`` with ``act_on_coframe(A, e) == f``, namely ``e f^{-1}``."""
    e, f = as_coframe(e), as_coframe(f)
    if e.dim != f.dim:
        raise DimensionMismatch("coframes of different dimension")
    # A = e f^{-1}  <=>  A^T = f^{-T} e^T
    return np.linalg.solve(f.mat.T, e.mat.T).T


# --------------------------------------------------------------------------
# structure tensors


class TensorKind(str, Enum):
    METRIC = "metric"
    OPERATOR = "operator"
    TWO_FORM = "two_form"
    SUBSPACE = "subspace"
    VECTOR = "vector"


_SYM_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class StructureTensor:
    """A tagged linear-algebra object whose GL-orbit defines a G-structure.

    ``data`` is an ``n x n`` matrix for metric, operator and two-form kinds,
    an ``n x k`` column basis for subspaces and a length-``n`` vector for
    vectors.  Symmetric and skew kinds are projected onto their exact
    (anti)symmetric part after validation.
    """

    kind: TensorKind
    data: np.ndarray

    def __post_init__(self):
        kind = TensorKind(self.kind)
        d = np.array(self.data, dtype=float)
        if not np.all(np.isfinite(d)):
            raise MalformedTensor("tensor data contains non-finite values")
        scale = max(np.abs(d).max(initial=0.0), 1.0)
        if kind in (TensorKind.METRIC, TensorKind.OPERATOR, TensorKind.TWO_FORM):
            if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
                raise MalformedTensor(f"{kind.value} data must be a square matrix")
            if kind is TensorKind.METRIC:
                if np.abs(d - d.T).max() > _SYM_RTOL * scale:
                    raise MalformedTensor("metric data is not symmetric")
                d = 0.5 * (d + d.T)
            elif kind is TensorKind.TWO_FORM:
                if np.abs(d + d.T).max() > _SYM_RTOL * scale:
                    raise MalformedTensor("two-form data is not skew-symmetric")
                d = 0.5 * (d - d.T)
        elif kind is TensorKind.SUBSPACE:
            if d.ndim == 1:
                d = d[:, None]
            if d.ndim != 2 or d.shape[1] == 0 or d.shape[1] > d.shape[0]:
                raise MalformedTensor("subspace data must be an n x k basis, k <= n")
            if np.linalg.matrix_rank(d) < d.shape[1]:
                raise MalformedTensor("subspace basis is rank deficient")
        elif kind is TensorKind.VECTOR:
            if d.ndim != 1 or d.size == 0:
                raise MalformedTensor("vector data must be one-dimensional")
        d.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "data", d)

    @property
    def dim(self):
        return self.data.shape[0]

    @property
    def rank(self):
        """Subspace dimension ``k`` (subspace kind only)."""
        return self.data.shape[1]

    def projector(self):
        """Orthogonal projector onto the subspace."""
        q, _ = np.linalg.qr(self.data)
        return q @ q.T


def act_on_tensor(A, t):
    """Left GL action ``rho(A) t``."""
    A = _check_invertible(_as_square(A, "group element"))
    if A.shape[0] != t.dim:
        raise DimensionMismatch(f"group element {A.shape} vs tensor dim {t.dim}")
    d = t.data
    if t.kind in (TensorKind.METRIC, TensorKind.TWO_FORM):
        Ainv = np.linalg.inv(A)
        new = Ainv.T @ d @ Ainv
    elif t.kind is TensorKind.OPERATOR:
        new = A @ np.linalg.solve(A.T, d.T).T
    else:
        new = A @ d
    return StructureTensor(t.kind, new)


def tensor_distance(s, t):
    """Distance between two tensors of the same kind.

    Subspaces are compared through their orthogonal projectors so the
    result does not depend on the chosen bases.
    """
    if s.kind is not t.kind or s.data.shape != t.data.shape:
        raise DimensionMismatch("tensors differ in kind or shape")
    if s.kind is TensorKind.SUBSPACE:
        return float(np.linalg.norm(s.projector() - t.projector()))
    return float(np.linalg.norm(s.data - t.data))


# --------------------------------------------------------------------------
# canonical matrices


def complex_structure_matrix(m):
    """``J0 = [[0, -I], [I, 0]]`` of size ``2m``."""
    I = np.eye(m)
    Z = np.zeros((m, m))
    return np.block([[Z, -I], [I, Z]])


def symplectic_matrix(m):
    """Matrix of ``e1^e2 + e3^e4 + ...``: block diagonal ``[[0, 1], [-1, 0]]``."""
    W = np.zeros((2 * m, 2 * m))
    for i in range(m):
        W[2 * i, 2 * i + 1] = 1.0
        W[2 * i + 1, 2 * i] = -1.0
    return W


# --------------------------------------------------------------------------
# group tags


class GroupKind(str, Enum):
    GL = "GL"
    O = "O"  # noqa: E741
    GLMC = "GLmC"
    SP = "Sp"
    BLOCK_TRIANGULAR = "BlockTriangular"
    SCALAR = "Scalar"
    FIXED_VECTOR = "FixedVector"


@dataclass(frozen=True)
class GroupTag:
    """Identifies a matrix group by its defining relations.

    ``n`` is the parameter in the group's usual name: the ambient dimension
    for ``GL``, ``O``, ``Scalar``, ``BlockTriangular`` and ``FixedVector``,
    but ``m`` for ``GLmC(m)`` and ``Sp(m)``, which act on ``R^{2m}``.
    ``k`` is only used by ``BlockTriangular(n, k)``.

    ``FixedVector(n)`` is the stabilizer of ``e_1`` under ``v -> A v``
    (first column equal to ``e_1``).
    """

    kind: GroupKind
    n: int
    k: int = None

    def __post_init__(self):
        kind = GroupKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.n) < 1:
            raise UnsupportedDimension(f"{kind.value} needs a positive dimension")
        object.__setattr__(self, "n", int(self.n))
        if kind is GroupKind.BLOCK_TRIANGULAR:
            if self.k is None or not 0 < int(self.k) < self.n:
                raise UnsupportedDimension("BlockTriangular(n, k) needs 0 < k < n")
            object.__setattr__(self, "k", int(self.k))
        elif self.k is not None:
            raise UnsupportedDimension(f"{kind.value} takes no k parameter")

    @classmethod
    def for_ambient(cls, kind, dim, k=None):
        """Build a tag from the ambient dimension of the matrices."""
        kind = GroupKind(kind)
        if kind in (GroupKind.GLMC, GroupKind.SP):
            if dim % 2:
                raise UnsupportedDimension(f"{kind.value} needs even ambient dimension")
            return cls(kind, dim // 2)
        return cls(kind, dim, k)

    @property
    def dim(self):
        if self.kind in (GroupKind.GLMC, GroupKind.SP):
            return 2 * self.n
        return self.n

    def to_json(self):
        out = {"kind": self.kind.value, "n": self.n}
        if self.k is not None:
            out["k"] = self.k
        return out

    @classmethod
    def from_json(cls, obj):
        return cls(obj["kind"], obj["n"], obj.get("k"))

    def __str__(self):
        if self.k is not None:
            return f"{self.kind.value}({self.n},{self.k})"
        return f"{self.kind.value}({self.n})"


def membership_defect(A, tag):
    """Scale-aware violation of the tag's defining relations (0 for members).

    Returns ``inf`` for matrices of the wrong shape or that are singular.
    """
    A = np.asarray(A, dtype=float)
    n = tag.dim
    if A.ndim != 2 or A.shape != (n, n):
        return np.inf
    if is_singular(A):
        return np.inf
    nrm = max(np.linalg.norm(A), 1.0)
    kind = tag.kind
    if kind is GroupKind.GL:
        return 0.0
    if kind is GroupKind.O:
        return float(np.linalg.norm(A.T @ A - np.eye(n)))
    if kind is GroupKind.SP:
        W = symplectic_matrix(tag.n)
        return float(np.linalg.norm(A.T @ W @ A - W)) / nrm**2
    if kind is GroupKind.GLMC:
        J = complex_structure_matrix(tag.n)
        return float(np.linalg.norm(A @ J - J @ A)) / nrm
    if kind is GroupKind.SCALAR:
        lam = np.trace(A) / n
        return float(np.linalg.norm(A - lam * np.eye(n))) / nrm
    if kind is GroupKind.BLOCK_TRIANGULAR:
        k = tag.k
        off = float(np.linalg.norm(A[k:, :k])) / nrm
        # diagonal blocks must be invertible on their own
        if is_singular(A[:k, :k]) or is_singular(A[k:, k:]):
            return np.inf
        return off
    if kind is GroupKind.FIXED_VECTOR:
        e1 = np.zeros(n)
        e1[0] = 1.0
        return float(np.linalg.norm(A[:, 0] - e1))
    raise AssertionError(kind)


def group_membership(A, tag, tol=MEMBERSHIP_TOL):
    """True iff ``A`` satisfies the defining relations of ``tag`` within ``tol``.

    Non-square or wrongly sized input returns False rather than raising.
    """
    return bool(membership_defect(A, tag) <= tol)


def _well_conditioned_normal(rng, shape, cond_max=50.0):
    while True:
        M = rng.standard_normal(shape)
        if np.linalg.cond(M) < cond_max:
            return M


def random_group_element(tag, seed=None, rng=None):
    """Draw a reasonably conditioned member of ``tag``'s group.

    Deterministic for a given ``seed``; pass ``rng`` to continue an existing
    generator stream instead.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    n = tag.dim
    kind = tag.kind
    if kind is GroupKind.GL:
        return _well_conditioned_normal(rng, (n, n))
    if kind is GroupKind.O:
        q, r = np.linalg.qr(rng.standard_normal((n, n)))
        return q * np.sign(np.diag(r))
    if kind is GroupKind.SCALAR:
        lam = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        return lam * np.eye(n)
    if kind is GroupKind.GLMC:
        m = tag.n
        while True:
            a, b = rng.standard_normal((2, m, m))
            C = np.block([[a, -b], [b, a]])
            if np.linalg.cond(C) < 50.0:
                return C
    if kind is GroupKind.SP:
        m = tag.n
        S = rng.standard_normal((n, n))
        S = 0.25 * (S + S.T)
        # exp of a Hamiltonian matrix W S (S symmetric) is symplectic
        return expm(symplectic_matrix(m) @ S)
    if kind is GroupKind.BLOCK_TRIANGULAR:
        k = tag.k
        A = np.zeros((n, n))
        A[:k, :k] = _well_conditioned_normal(rng, (k, k), 20.0)
        A[k:, k:] = _well_conditioned_normal(rng, (n - k, n - k), 20.0)
        A[:k, k:] = rng.standard_normal((k, n - k))
        return A
    if kind is GroupKind.FIXED_VECTOR:
        A = np.zeros((n, n))
        A[0, 0] = 1.0
        if n > 1:
            A[0, 1:] = rng.standard_normal(n - 1)
            A[1:, 1:] = _well_conditioned_normal(rng, (n - 1, n - 1), 20.0)
        return A
    raise AssertionError(kind)


def matrix_to_json(mat):
    return np.asarray(mat, dtype=float).tolist()


def matrix_from_json(obj):
    a = np.array(obj, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch("expected a JSON array of arrays")
    return a
