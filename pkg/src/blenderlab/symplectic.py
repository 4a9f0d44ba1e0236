"""Canonical symplectic forms, subspace classification, transitive steering of
planes by symplectic matrices, and Hamiltonian bump translations.

Coordinates are always Darboux: the form is represented by the constant
canonical matrix J with pairing w(u, v) = u^T J v.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (DimensionError, FrameError, NotSameClass,
                     NumericalRankError, ParamError, StepSizeError)
from .fibermaps import BumpTranslation, standard_symplectic_matrix
from .regions import Region

_DEGENERACY_TOL = 1e-9
_FRAME_TOL = 1e-12


@dataclass(frozen=True)
class SymplecticForm:
    """The canonical pairing on R^(2n)."""

    n: int

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def matrix(self) -> np.ndarray:
        return standard_symplectic_matrix(2 * self.n)

    def pairing(self, u, v) -> float:
        return float(np.asarray(u) @ self.matrix @ np.asarray(v))


def symplectic_defect(M, J=None) -> float:
    """Max-norm of M^T J M - J."""
    M = np.asarray(M, dtype=float)
    if J is None:
        J = standard_symplectic_matrix(M.shape[0])
    return float(np.max(np.abs(M.T @ J @ M - J)))


@dataclass(frozen=True)
class DefectReport:
    passed: bool
    defect: float


def is_symplectic_matrix(M, tol: float = 1e-9) -> DefectReport:
    M = np.asarray(M, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise DimensionError("matrix must be square")
    if M.shape[0] % 2 != 0:
        raise DimensionError("symplectic matrices need an even dimension")
    if not np.all(np.isfinite(M)):
        raise ParamError("matrix entries must be finite")
    d = symplectic_defect(M)
    return DefectReport(passed=d <= tol, defect=d)


class PlaneFrame:
    """An l-plane in R^c held as an orthonormal c x l frame."""

    def __init__(self, frame):
        Q = np.asarray(frame, dtype=float)
        if Q.ndim != 2 or Q.shape[0] < Q.shape[1] or Q.shape[1] < 1:
            raise FrameError("frame must be a c x l matrix with 1 <= l <= c")
        if np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))) > _FRAME_TOL:
            raise FrameError("frame columns are not orthonormal")
        self.frame = Q

    @staticmethod
    def from_spanning(vectors) -> "PlaneFrame":
        V = np.asarray(vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        Q, R = np.linalg.qr(V)
        if np.min(np.abs(np.diag(R))) < 1e-12 * max(1.0, np.max(np.abs(V))):
            raise FrameError("spanning vectors are numerically dependent")
        Q = Q * np.sign(np.diag(R))
        return PlaneFrame(Q)

    @property
    def dim(self) -> int:
        return self.frame.shape[0]

    @property
    def rank(self) -> int:
        return self.frame.shape[1]

    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.T

    def orthogonal_complement(self) -> np.ndarray:
        c, l = self.frame.shape
        full, _ = np.linalg.qr(self.frame, mode="complete")
        return full[:, l:]

    def same_plane(self, other: "PlaneFrame", tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(self.projector() - other.projector())) <= tol

    def to_json(self) -> list:
        return self.frame.tolist()

    @staticmethod
    def from_json(obj) -> "PlaneFrame":
        return PlaneFrame(np.array(obj, dtype=float))


def principal_angles(E: PlaneFrame, F: PlaneFrame) -> np.ndarray:
    """Principal angles (ascending) between two planes of equal rank."""
    if E.dim != F.dim or E.rank != F.rank:
        raise ParamError("planes must share ambient dimension and rank")
    # scipy's sine-cosine algorithm stays accurate for tiny angles, where a
    # plain arccos of frame products saturates around 1e-8
    return np.sort(scipy.linalg.subspace_angles(E.frame, F.frame))


def max_principal_angle(E: PlaneFrame, F: PlaneFrame) -> float:
    return float(principal_angles(E, F)[-1])


@dataclass(frozen=True)
class SubspaceClass:
    kind: str  # symplectic | isotropic | coisotropic | mixed
    witness: float


def _omega_complement(Q: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Orthonormal basis of {v : w(q, v) = 0 for all columns q}."""
    A = Q.T @ J
    _, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > 1e-12))
    return Vt[rank:].T


def classify_subspace(E: PlaneFrame, tol: float = _DEGENERACY_TOL) -> SubspaceClass:
    """symplectic / isotropic / coisotropic / mixed with a numeric witness.

    A Lagrangian plane satisfies both containments and reports coisotropic.
    The witness is the smallest singular value of the restricted pairing for
    the symplectic verdict, and the relevant containment residual otherwise.
    """
    Q = E.frame
    c = Q.shape[0]
    J = standard_symplectic_matrix(c)
    G = Q.T @ J @ Q
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[-1] > tol:
        return SubspaceClass("symplectic", float(sv[-1]))
    K = _omega_complement(Q, J)
    P = E.projector()
    coiso_resid = float(np.max(np.abs(K - P @ K))) if K.size else 0.0
    if coiso_resid <= tol:
        return SubspaceClass("coisotropic", coiso_resid)
    iso_resid = float(np.max(np.abs(G)))
    if iso_resid <= tol:
        return SubspaceClass("isotropic", iso_resid)
    return SubspaceClass("mixed", float(sv[-1]))


# ---------------------------------------------------------------------------
# transitive steering of planes
# ---------------------------------------------------------------------------


def _symplectic_gram_schmidt(vectors: np.ndarray, J: np.ndarray):
    """Split the span of ``vectors`` (assumed symplectic, even rank) into
    canonical pairs (a_i, b_i) with w(a_i, b_j) = delta_ij.

    Pairs are pivoted on the largest available pairing for stability.
    """
    vs = [vectors[:, k].copy() for k in range(vectors.shape[1])]
    a_list, b_list = [], []
    while vs:
        W = np.column_stack(vs)
        G = W.T @ J @ W
        idx = np.unravel_index(np.argmax(np.abs(G)), G.shape)
        piv = G[idx]
        if abs(piv) < 1e-12:
            raise NumericalRankError("pairing degenerated during symplectic split")
        i, j = idx
        a = vs[i]
        b = vs[j] / piv
        scale = np.linalg.norm(a)
        a = a / scale
        b = b * scale
        rest = [v for k, v in enumerate(vs) if k not in (i, j)]
        vs = []
        for w in rest:
            w = w - (w @ J @ b) * a + (w @ J @ a) * b
            vs.append(w)
        a_list.append(a)
        b_list.append(b)
    return a_list, b_list


def _adapted_basis(E: PlaneFrame, kind: str, J: np.ndarray):
    """A full symplectic basis B (columns a_1..a_n, b_1..b_n with B^T J B = J)
    together with the column indices whose span is the plane E."""
    Q = E.frame
    c, l = Q.shape
    n = c // 2
    if kind == "symplectic":
        a_in, b_in = _symplectic_gram_schmidt(Q, J)
        comp = _omega_complement(Q, J)
        a_out, b_out = ([], [])
        if comp.shape[1]:
            a_out, b_out = _symplectic_gram_schmidt(comp, J)
        cols_a = a_in + a_out
        cols_b = b_in + b_out
        k = len(a_in)
        span_cols = list(range(k)) + list(range(n, n + k))
    elif kind == "isotropic":
        u = [Q[:, k].copy() for k in range(l)]
        v = [-J @ uk for uk in u]
        W = np.column_stack(u + v)
        comp = _omega_complement(W, J)
        a2, b2 = ([], [])
        if comp.shape[1]:
            a2, b2 = _symplectic_gram_schmidt(comp, J)
        cols_a = u + a2
        cols_b = v + b2
        span_cols = list(range(l))
    elif kind == "coisotropic":
        Pw = _omega_complement(Q, J)  # isotropic, contained in E
        m = Pw.shape[1]
        u = [Pw[:, k].copy() for k in range(m)]
        v = [-J @ uk for uk in u]
        W = np.column_stack(u + v)
        comp = _omega_complement(W, J)
        a2, b2 = ([], [])
        if comp.shape[1]:
            a2, b2 = _symplectic_gram_schmidt(comp, J)
        cols_a = u + a2
        cols_b = v + b2
        # E = (E^w)^w = span(u, a2, b2)
        span_cols = list(range(m)) + list(range(m, n)) + list(range(n + m, 2 * n))
    else:
        raise NotSameClass("mixed planes are not steered")
    B = np.column_stack(cols_a + cols_b)
    return B, span_cols


def _sp_basis_elements(c: int):
    for a in range(c):
        for b in range(a, c):
            S = np.zeros((c, c))
            S[a, b] = 1.0
            S[b, a] = 1.0
            yield S


def _steer_near_identity(E: PlaneFrame, F: PlaneFrame, J: np.ndarray):
    """Newton iteration on S = exp(J Sym) ... exp(J Sym) steering E onto F.

    Each step solves the minimum-norm Hamiltonian generator whose first-order
    action realizes the graph map of F over the current plane.
    """
    c = E.dim
    basis = list(_sp_basis_elements(c))
    S = np.eye(c)
    for _ in range(60):
        cur = PlaneFrame.from_spanning(S @ E.frame)
        if max_principal_angle(cur, F) <= 1e-12:
            break
        V = cur.frame
        Vp = cur.orthogonal_complement()
        A = V.T @ F.frame
        if np.linalg.svd(A, compute_uv=False)[-1] < 1e-8:
            return None
        L = (Vp.T @ F.frame) @ np.linalg.inv(A)
        P = Vp.T @ J
        cols = [ (P @ Sb @ V).ravel() for Sb in basis ]
        M = np.column_stack(cols)
        coeff, *_ = np.linalg.lstsq(M, L.ravel(), rcond=None)
        Sym = sum(cf * Sb for cf, Sb in zip(coeff, basis))
        K = J @ Sym
        S = scipy.linalg.expm(K) @ S
    cur = PlaneFrame.from_spanning(S @ E.frame)
    if max_principal_angle(cur, F) > 1e-10:
        return None
    return S


def symplectic_map_between_planes(E: PlaneFrame, F: PlaneFrame) -> np.ndarray:
    """A symplectic matrix S with S E = F, continuous near the identity.

    Both planes must carry the same classification (symplectic, isotropic or
    coisotropic).  For nearby planes S is built by a Hamiltonian Newton
    iteration from the identity; otherwise full symplectic bases adapted to
    the two planes are matched column by column.
    """
    if E.dim != F.dim or E.rank != F.rank:
        raise ParamError("planes must share ambient dimension and rank")
    clsE = classify_subspace(E)
    clsF = classify_subspace(F)
    if clsE.kind == "mixed" or clsF.kind == "mixed":
        raise NotSameClass("mixed planes have no guaranteed transitive action")
    if clsE.kind != clsF.kind:
        raise NotSameClass(f"{clsE.kind} vs {clsF.kind}")
    c = E.dim
    J = standard_symplectic_matrix(c)
    theta = max_principal_angle(E, F)
    if theta < 1e-14:
        return np.eye(c)
    if theta <= 0.8:
        S = _steer_near_identity(E, F, J)
        if S is not None:
            return S
    B_E, span_E = _adapted_basis(E, clsE.kind, J)
    B_F, span_F = _adapted_basis(F, clsF.kind, J)
    if span_E != span_F:
        raise NumericalRankError("adapted bases disagree on the span layout")
    S = B_F @ np.linalg.inv(B_E)
    return S


def random_near_identity_symplectic(dim: int, scale: float, seed: int) -> np.ndarray:
    """exp of a random Hamiltonian matrix with spectral norm ``scale``."""
    if scale > 0.5:
        raise ParamError("scale must be at most 0.5")
    if scale < 0.0:
        raise ParamError("scale must be nonnegative")
    J = standard_symplectic_matrix(dim)
    if scale == 0.0:
        return np.eye(dim)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((dim, dim))
    Sym = 0.5 * (A + A.T)
    K = J @ Sym
    K *= scale / np.linalg.norm(K, 2)
    return scipy.linalg.expm(K)


def hamiltonian_bump_translation(center, r_inner: float, r_outer: float, vector,
                                 steps: int = 16,
                                 integrator_tol: float = 1e-10) -> BumpTranslation:
    """Exactly symplectic local translation: moves B(center, r_inner) by
    ``vector``, fixes everything outside B(center, r_outer).

    The annulus is the time-one flow of the bump Hamiltonian; the step count
    doubles until the map inverts and keeps its Jacobian symplectic to
    ``integrator_tol`` on annulus samples.
    """
    center = np.asarray(center, dtype=float)
    vector = np.asarray(vector, dtype=float)
    if not 0.0 < r_inner < r_outer:
        raise ParamError("need 0 < r_inner < r_outer")
    width = r_outer - r_inner
    speed = float(np.linalg.norm(vector))
    if speed > width / 4.0:
        raise StepSizeError("translation vector too large for the annulus width")
    core = Region.ball(center, r_inner)
    plateau = 1.01 * speed + 0.1 * width
    support = width
    J = standard_symplectic_matrix(center.shape[0])
    n = steps
    while True:
        bump = BumpTranslation(core, vector, plateau, support, symplectic=True, steps=n)
        if speed == 0.0:
            return bump
        rng = np.random.default_rng(11)
        d = rng.uniform(plateau, support, size=32)
        dirs = rng.standard_normal((32, center.shape[0]))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        pts = center + (r_inner + d)[:, None] * dirs
        round_trip = np.max(np.linalg.norm(bump.apply_inverse(bump.apply(pts)) - pts, axis=1))
        W = bump.jacobian(pts)
        defect = np.max(np.abs(np.swapaxes(W, 1, 2) @ J @ W - J))
        if (round_trip <= integrator_tol and defect <= integrator_tol) or n >= 256:
            return bump
        n *= 2
