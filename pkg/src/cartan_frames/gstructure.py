"""Pointwise G-structures: orbits, normalizers and adapted coframes.

A coframe ``E`` is *adapted* to a structure tensor when the components of
the tensor in the frame dual to ``E`` equal the canonical form:

========  ==================================  ==================
kind      adapted when                        stabilizer
========  ==================================  ==================
metric    ``E^{-T} G E^{-1} = I``             ``O(n)``
operator  ``E J E^{-1} = J0``                 ``GLmC(m)``
two-form  ``E^{-T} W E^{-1} = W0``            ``Sp(m)``
subspace  rows ``k+1..n`` of ``E`` vanish     ``BlockTriangular(n, k)``
          on the subspace
vector    ``E v = (1, 0, ..., 0)``            ``FixedVector(n)``
========  ==================================  ==================

Each ``normalize_*`` returns one deterministic adapted coframe; the rest of
the adapted set is its orbit under the stabilizer (see :func:`adapted_fiber`).
"""
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateForm,
    DimensionMismatch,
    MalformedTensor,
    NotComplexStructure,
    NotPositiveDefinite,
    OddDimensionForSymplectic,
    RankDeficient,
)
from .linalg_core import (
    Coframe,
    GroupKind,
    GroupTag,
    StructureTensor,
    TensorKind,
    act_on_coframe,
    as_coframe,
    complex_structure_matrix,
    random_group_element,
    symplectic_matrix,
)

EXACT_TOL = 1e-10
FIELD_TOL = 1e-6
ADAPTED_TOL = 1e-8

METRIC_POSITIVE = "positive-definite"
METRIC_OTHER = "other"
OPERATOR_J = "complex-structure"
OPERATOR_OTHER = "other"
FORM_NONDEGENERATE = "nondegenerate"
FORM_DEGENERATE = "degenerate"
VECTOR_NONZERO = "O"
VECTOR_ZERO = "O0"
SUBSPACE_RANK = "rank-{k}"


@dataclass(frozen=True)
class OrbitClass:
    kind: TensorKind
    label: str

    @property
    def is_canonical(self):
        """True when the orbit contains the canonical form for its kind."""
        return self.label in (
            METRIC_POSITIVE,
            OPERATOR_J,
            FORM_NONDEGENERATE,
            VECTOR_NONZERO,
        ) or self.kind is TensorKind.SUBSPACE


def canonical_tensor(kind, n, k=None):
    """Canonical representative of the distinguished orbit of ``kind``."""
    kind = TensorKind(kind)
    if kind is TensorKind.METRIC:
        return StructureTensor(kind, np.eye(n))
    if kind in (TensorKind.OPERATOR, TensorKind.TWO_FORM):
        if n % 2:
            raise OddDimensionForSymplectic(f"{kind.value} needs even dimension, got {n}")
        m = n // 2
        mat = complex_structure_matrix(m) if kind is TensorKind.OPERATOR else symplectic_matrix(m)
        return StructureTensor(kind, mat)
    if kind is TensorKind.SUBSPACE:
        if k is None or not 0 < k <= n:
            raise MalformedTensor("subspace needs 0 < k <= n")
        return StructureTensor(kind, np.eye(n)[:, :k])
    v = np.zeros(n)
    v[0] = 1.0
    return StructureTensor(kind, v)


def stabilizer_tag(t):
    """Isotropy group of the canonical form in the orbit of ``t``."""
    n = t.dim
    if t.kind is TensorKind.METRIC:
        return GroupTag(GroupKind.O, n)
    if t.kind is TensorKind.OPERATOR:
        return GroupTag.for_ambient(GroupKind.GLMC, n)
    if t.kind is TensorKind.TWO_FORM:
        return GroupTag.for_ambient(GroupKind.SP, n)
    if t.kind is TensorKind.SUBSPACE:
        k = t.rank
        if k == n:
            return GroupTag(GroupKind.GL, n)
        return GroupTag(GroupKind.BLOCK_TRIANGULAR, n, k)
    return GroupTag(GroupKind.FIXED_VECTOR, n)


def orbit_classify(t, tol=EXACT_TOL):
    """Label the GL-orbit of ``t``.

    Metric and two-form tests are relative to the largest eigen/singular
    value so that the label does not depend on the overall scale.
    """
    kind = t.kind
    d = t.data
    if kind is TensorKind.METRIC:
        w = np.linalg.eigvalsh(d)
        scale = max(np.abs(w).max(), 1e-300)
        ok = np.all(w > tol * scale)
        return OrbitClass(kind, METRIC_POSITIVE if ok else METRIC_OTHER)
    if kind is TensorKind.OPERATOR:
        n = t.dim
        if n % 2:
            return OrbitClass(kind, OPERATOR_OTHER)
        defect = np.linalg.norm(d @ d + np.eye(n))
        return OrbitClass(kind, OPERATOR_J if defect < tol * max(1.0, np.linalg.norm(d) ** 2) else OPERATOR_OTHER)
    if kind is TensorKind.TWO_FORM:
        if t.dim % 2:
            raise OddDimensionForSymplectic(f"two-form in odd dimension {t.dim}")
        s = np.linalg.svd(d, compute_uv=False)
        ok = s[0] > 0 and s[-1] > tol * s[0]
        return OrbitClass(kind, FORM_NONDEGENERATE if ok else FORM_DEGENERATE)
    if kind is TensorKind.VECTOR:
        return OrbitClass(kind, VECTOR_NONZERO if np.linalg.norm(d) > tol else VECTOR_ZERO)
    return OrbitClass(kind, SUBSPACE_RANK.format(k=t.rank))


# --------------------------------------------------------------------------
# normalizers


def _square(a, name):
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square")
    return a


def normalize_metric(G):
    """Upper Cholesky factor ``E`` (positive diagonal) with ``E^T E = G``."""
    t = G if isinstance(G, StructureTensor) else StructureTensor(TensorKind.METRIC, _square(G, "metric"))
    if orbit_classify(t).label != METRIC_POSITIVE:
        raise NotPositiveDefinite("metric is not positive definite")
    try:
        L = np.linalg.cholesky(t.data)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return Coframe(L.T)


def _pivot_residual(Q, candidates):
    """Index and residual of the candidate column farthest from span(Q)."""
    R = candidates - Q @ (Q.T @ candidates) if Q.shape[1] else candidates.copy()
    norms = np.linalg.norm(R, axis=0)
    j = int(np.argmax(norms))  # first maximum wins ties
    return j, R[:, j], norms[j]


def normalize_complex(J, tol=EXACT_TOL):
    """Coframe ``E`` with ``E J E^{-1} = J0``.

    The dual frame is ``[f_1..f_m, J f_1..J f_m]``; each ``f_i`` is the
    standard basis vector farthest from the span built so far, with that
    span's projection removed.  For ``J = J0`` this returns the identity.
    """
    t = J if isinstance(J, StructureTensor) else StructureTensor(TensorKind.OPERATOR, _square(J, "operator"))
    n = t.dim
    if n % 2:
        raise NotComplexStructure("almost complex structure needs even dimension")
    if orbit_classify(t, tol).label != OPERATOR_J:
        raise NotComplexStructure("operator does not satisfy J^2 = -I")
    Jm = t.data
    m = n // 2
    basis = np.eye(n)
    Q = np.zeros((n, 0))
    fs = []
    for _ in range(m):
        _, r, rn = _pivot_residual(Q, basis)
        if rn < tol:
            raise NotComplexStructure("failed to find a complex basis")
        f = r / rn
        fs.append(f)
        Q, _ = np.linalg.qr(np.column_stack([Q, f, Jm @ f]))
    F = np.column_stack(fs + [Jm @ f for f in fs])
    return Coframe(np.linalg.inv(F))


def normalize_symplectic(W, tol=EXACT_TOL):
    """Coframe ``E`` with ``E^T W0 E = W``.

    Symplectic Gram-Schmidt over the standard basis, pivoting on the
    largest ``|w(v_a, v_b)|`` among remaining candidates.  Each pair is
    scaled by ``1/sqrt|w|`` so ``2 W0`` in the plane gives ``sqrt(2) I``.
    """
    t = W if isinstance(W, StructureTensor) else StructureTensor(TensorKind.TWO_FORM, _square(W, "two-form"))
    n = t.dim
    if n % 2:
        raise OddDimensionForSymplectic(f"two-form in odd dimension {n}")
    if orbit_classify(t, tol).label != FORM_NONDEGENERATE:
        raise DegenerateForm("two-form is degenerate")
    Wm = t.data
    scale = np.abs(Wm).max()
    V = np.eye(n)
    remaining = list(range(n))
    cols = []
    for _ in range(n // 2):
        C = V[:, remaining]
        M = C.T @ Wm @ C
        iu = np.triu_indices(len(remaining), 1)
        vals = np.abs(M[iu])
        p = int(np.argmax(vals))
        if vals[p] <= tol * scale:
            raise DegenerateForm("two-form degenerate during reduction")
        a, b = remaining[iu[0][p]], remaining[iu[1][p]]
        w = M[iu[0][p], iu[1][p]]
        s = 1.0 / np.sqrt(abs(w))
        f = V[:, a] * s
        g = V[:, b] * s * np.sign(w)
        cols += [f, g]
        remaining = [r for r in remaining if r not in (a, b)]
        for r in remaining:
            v = V[:, r]
            V[:, r] = v - (v @ Wm @ g) * f + (v @ Wm @ f) * g
    F = np.column_stack(cols)
    return Coframe(np.linalg.inv(F))


def orthonormal_completion(B, tol=EXACT_TOL):
    """Orthogonal ``Q`` whose first ``k`` columns span ``col(B)``.

    Deterministic: the leading block comes from a QR factorization with a
    positive ``R`` diagonal, the complement from pivoted Gram-Schmidt over
    the standard basis, and the last column is flipped if needed so that
    ``det Q = +1`` (when ``k < n``).
    """
    B = np.array(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    n, k = B.shape
    if k == 0 or k > n:
        raise RankDeficient("basis must have 1 <= k <= n columns")
    q, r = np.linalg.qr(B)
    d = np.diag(r)
    if np.min(np.abs(d)) <= tol * max(np.abs(d).max(), 1e-300) or np.linalg.matrix_rank(B) < k:
        raise RankDeficient(f"basis of {k} vectors has lower rank")
    Q = q * np.sign(d)
    basis = np.eye(n)
    while Q.shape[1] < n:
        _, res, rn = _pivot_residual(Q, basis)
        Q = np.column_stack([Q, res / rn])
    # one re-orthogonalization pass against accumulated rounding
    Q, rr = np.linalg.qr(Q)
    Q = Q * np.sign(np.diag(rr))
    if k < n and np.linalg.det(Q) < 0:
        Q[:, -1] *= -1.0
    return Q


def normalize_distribution(B, tol=EXACT_TOL):
    """Coframe whose last ``n - k`` rows annihilate ``span(B)``.

    Adapted coframes cut the subspace out by ``e^{k+1} = ... = e^n = 0``.
    """
    data = B.data if isinstance(B, StructureTensor) else B
    Q = orthonormal_completion(data, tol)
    return Coframe(Q.T)


def normalize_vector(v, tol=EXACT_TOL):
    """Coframe ``E`` with ``E v = e_1``: a frame starting with ``v``."""
    data = np.asarray(v.data if isinstance(v, StructureTensor) else v, dtype=float)
    nv = np.linalg.norm(data)
    if nv <= tol:
        raise RankDeficient("zero vector has no adapted coframe")
    Q = orthonormal_completion(data[:, None], tol)
    F = Q.copy()
    F[:, 0] = data
    return Coframe(np.linalg.inv(F))


def transport_to_standard(B, tol=EXACT_TOL):
    """Invertible ``A`` with ``A(span(e_1..e_k)) = span(B)``."""
    data = B.data if isinstance(B, StructureTensor) else B
    return orthonormal_completion(data, tol)


_NORMALIZERS = {
    TensorKind.METRIC: normalize_metric,
    TensorKind.OPERATOR: normalize_complex,
    TensorKind.TWO_FORM: normalize_symplectic,
    TensorKind.SUBSPACE: normalize_distribution,
    TensorKind.VECTOR: normalize_vector,
}


def normalize(t):
    """Dispatch to the normalizer for ``t.kind``."""
    return _NORMALIZERS[t.kind](t)


# --------------------------------------------------------------------------
# adaptation


def adaptation_residual(E, t):
    """Deviation of ``t``'s components in the dual frame of ``E`` from canonical."""
    E = as_coframe(E)
    n = E.dim
    if t.dim != n:
        raise DimensionMismatch(f"coframe dim {n} vs tensor dim {t.dim}")
    Em = E.mat
    d = t.data
    if t.kind is TensorKind.METRIC:
        F = np.linalg.inv(Em)
        return float(np.linalg.norm(F.T @ d @ F - np.eye(n)))
    if t.kind is TensorKind.OPERATOR:
        if n % 2:
            return np.inf
        comp = Em @ np.linalg.solve(Em.T, d.T).T
        return float(np.linalg.norm(comp - complex_structure_matrix(n // 2)))
    if t.kind is TensorKind.TWO_FORM:
        if n % 2:
            return np.inf
        F = np.linalg.inv(Em)
        return float(np.linalg.norm(F.T @ d @ F - symplectic_matrix(n // 2)))
    if t.kind is TensorKind.SUBSPACE:
        k = t.rank
        q, _ = np.linalg.qr(d)
        rows = Em[k:]
        return float(np.linalg.norm(rows @ q) / np.linalg.norm(Em))
    e1 = np.zeros(n)
    e1[0] = 1.0
    return float(np.linalg.norm(Em @ d - e1))


def is_adapted(E, t, tol=ADAPTED_TOL):
    try:
        return adaptation_residual(E, t) <= tol
    except DimensionMismatch:
        return False


def adapted_fiber(E0, tag, count=1, seed=None, elements=None):
    """Coframes ``A_i^{-1} E0`` for group elements ``A_i``.

    The elements are drawn from ``tag`` with a seeded generator unless an
    explicit list is passed in ``elements`` (in which case ``count`` and
    ``seed`` are ignored).
    """
    E0 = as_coframe(E0)
    if elements is None:
        rng = np.random.default_rng(seed)
        elements = [random_group_element(tag, rng=rng) for _ in range(count)]
    return [act_on_coframe(A, E0) for A in elements]
