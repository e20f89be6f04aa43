"""Iwasawa, polar and Cartan (K A+ K) factorizations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lie import DEFAULT_TOL, GroupModel, ModelError, group_exp, in_K, is_algebra_member, is_group_member


class FactorizationError(ArithmeticError):
    """A factorization failed its residual or membership certification."""


@dataclass(frozen=True)
class IwasawaFactors:
    k: np.ndarray
    a: np.ndarray
    n: np.ndarray
    opposite: bool = False

    def product(self) -> np.ndarray:
        return self.k @ self.a @ self.n


@dataclass(frozen=True)
class CartanFactors:
    k1: np.ndarray
    a: np.ndarray
    k2: np.ndarray

    def product(self) -> np.ndarray:
        return self.k1 @ self.a @ self.k2


def _residual(g, h) -> float:
    return float(np.linalg.norm(g - h) / max(1.0, np.linalg.norm(g)))


def _qr_positive(g: np.ndarray):
    Q, R = np.linalg.qr(g)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s, s[:, None] * R


def iwasawa(g: np.ndarray, model: GroupModel, opposite: bool = False, tol=DEFAULT_TOL) -> IwasawaFactors:
    """Factor ``g = k a n`` (``n`` upper unipotent), or ``k a n⁻`` with ``opposite=True``.

    QR with a positive diagonal on the triangular factor; the opposite variant
    runs the same factorization on the index-reversed matrix.
    """
    g = model.check_shape(g)
    if model.family == "sopp" and not is_group_member(g, model, 1e-6):
        raise FactorizationError("Iwasawa decomposition of a matrix outside the group")
    if opposite:
        P = np.fliplr(np.eye(model.dim))
        Q, R = _qr_positive(P @ g @ P)
        Q, R = P @ Q @ P, P @ R @ P
    else:
        Q, R = _qr_positive(g)
    d = np.diag(R)
    if np.linalg.det(Q) < 0:
        # only reachable when det g < 0, i.e. g is not in the group
        raise FactorizationError("orthogonal factor has determinant -1")
    a = np.diag(d)
    n = R / d[:, None]
    f = IwasawaFactors(Q, a, n, opposite)
    res = _residual(g, f.product())
    if res > tol.factorization_tol * 10 * max(1.0, np.linalg.cond(g)) ** 0.5:
        raise FactorizationError(f"Iwasawa residual {res:.2e} above tolerance")
    if model.family == "sopp" and not in_K(Q, model, 1e-6):
        raise FactorizationError("Iwasawa k-factor is not in K; input outside the group")
    return f


def polar(g: np.ndarray, model: GroupModel, tol=DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """``g = exp(X) k`` with ``X`` symmetric in the algebra and ``k`` in K."""
    g = model.check_shape(g)
    if not is_group_member(g, model, 1e-6):
        raise FactorizationError("polar decomposition of a matrix outside the group")
    U, s, Vt = np.linalg.svd(g)
    if model.family == "sopp":
        # singular values pair up as (s, 1/s); the small ones lose relative accuracy
        p = model.size
        s = np.concatenate([s[:p], 1.0 / s[:p][::-1]])
    X = (U * np.log(s)) @ U.T
    X = 0.5 * (X + X.T)
    if model.family == "sopp":
        J = model.J
        X = 0.5 * (X - J @ X.T @ J)
    else:
        X = X - np.trace(X) / model.dim * np.eye(model.dim)
    k = U @ Vt
    return X, k


def project_to_chamber(X: np.ndarray, model: GroupModel, tol=DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H, k)`` with ``k X k^T = H`` diagonal in the closed positive chamber, ``k`` in K.

    SL: symmetric eigendecomposition, eigenvalues sorted descending.  SO_0(p, p):
    in the frame where ``J = diag(I, -I)``, ``X`` is ``[[0, B], [B^T, 0]]`` and an
    SVD of ``B`` with both orthogonal factors pushed into SO(p) diagonalizes it;
    the sign left on the last singular value is the one Weyl reflection not
    available inside K.
    """
    X = model.check_shape(X)
    if np.linalg.norm(X - X.T) > tol.membership_tol * max(1.0, np.linalg.norm(X)):
        raise ModelError("project_to_chamber expects a symmetric element of p")
    if model.family == "sl":
        w, V = np.linalg.eigh(0.5 * (X + X.T))
        order = np.argsort(-w, kind="stable")
        w, V = w[order], V[:, order]
        if np.linalg.det(V) < 0:
            V[:, -1] *= -1
        return np.diag(w), V.T
    p, C = model.size, model.split_basis
    Xs = C.T @ X @ C
    B = Xs[:p, p:]
    U, s, Vt = np.linalg.svd(B)
    V = Vt.T
    h = s.copy()
    if np.linalg.det(U) < 0:
        U[:, -1] *= -1
        h[-1] *= -1
    if np.linalg.det(V) < 0:
        V[:, -1] *= -1
        h[-1] *= -1
    ks = np.zeros((2 * p, 2 * p))
    ks[:p, :p], ks[p:, p:] = U.T, V.T
    k = C @ ks @ C.T
    H = np.diag(np.concatenate([h, -h[::-1]]))
    return H, k


def cartan_kak(g: np.ndarray, model: GroupModel, tol=DEFAULT_TOL) -> CartanFactors:
    """``g = k1 a k2`` with ``log a`` in the closed positive chamber."""
    X, k0 = polar(g, model, tol)
    H, k = project_to_chamber(X, model, tol)
    f = CartanFactors(k.T, group_exp(H), k @ k0)
    res = _residual(g, f.product())
    if res > 1e-8 * max(1.0, np.linalg.cond(g)) ** 0.5:
        raise FactorizationError(f"Cartan residual {res:.2e} above tolerance")
    return f


def cartan_projection(g: np.ndarray, model: GroupModel) -> np.ndarray:
    """``log a(g)``: the diagonal Cartan projection in the closed chamber."""
    X, _ = polar(g, model)
    return project_to_chamber(X, model)[0]


def check_iwasawa(f: IwasawaFactors, model: GroupModel, tol: float = 1e-7) -> bool:
    """All invariants of an :class:`IwasawaFactors` record."""
    tri = np.tril(f.n, -1) if not f.opposite else np.triu(f.n, 1)
    return (
        in_K(f.k, model, tol)
        and np.allclose(f.a, np.diag(np.diag(f.a)))
        and bool(np.all(np.diag(f.a) > 0))
        and is_group_member(f.a, model, tol)
        and np.allclose(np.diag(f.n), 1.0)
        and np.linalg.norm(tri) <= tol
        and is_group_member(f.n, model, tol * max(1.0, np.linalg.norm(f.n)))
    )


def check_polar(X, k, model: GroupModel, tol: float = 1e-7) -> bool:
    return (
        np.linalg.norm(X - X.T) <= tol
        and is_algebra_member(X, model, tol)
        and in_K(k, model, tol)
    )
