"""Matrix models of SL(n, R) and SO_0(p, p) and their Lie-algebraic primitives.

Group and algebra elements are plain ``numpy`` arrays; the :class:`GroupModel`
they belong to is passed alongside them.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm, logm


class ModelError(ValueError):
    """Raised when a matrix does not fit the model it is used with."""


@dataclass(frozen=True)
class Tolerances:
    factorization_tol: float = 1e-9
    membership_tol: float = 1e-7
    spectrum_tol: float = 1e-6

    def __post_init__(self):
        for name in ("factorization_tol", "membership_tol", "spectrum_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class GroupModel:
    """Either ``SL(n, R)`` (family ``"sl"``) or ``SO_0(p, p)`` (family ``"sopp"``).

    For ``"sopp"`` the quadratic form is the antidiagonal matrix ``J`` of size
    ``2p``, so that ``A`` is diagonal and ``N`` upper unipotent.
    """

    family: str
    size: int

    def __post_init__(self):
        if self.family not in ("sl", "sopp"):
            raise ModelError(f"unknown family {self.family!r}")
        if self.size < 2:
            raise ModelError(f"{self.family}:{self.size} needs size >= 2")

    @classmethod
    def parse(cls, text: str) -> "GroupModel":
        """Parse ``"sl:3"`` or ``"sopp:2"``."""
        try:
            family, size = text.split(":")
            return cls(family.strip().lower(), int(size))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"cannot parse model {text!r}") from exc

    @classmethod
    def from_json(cls, obj: dict) -> "GroupModel":
        family = obj["family"]
        return cls(family, int(obj["n"] if family == "sl" else obj["p"]))

    def to_json(self) -> dict:
        key = "n" if self.family == "sl" else "p"
        return {"family": self.family, key: self.size}

    def __str__(self):
        return f"{self.family}:{self.size}"

    @property
    def dim(self) -> int:
        """Size of the ambient matrices."""
        return self.size if self.family == "sl" else 2 * self.size

    @property
    def rank(self) -> int:
        return self.size - 1 if self.family == "sl" else self.size

    @property
    def algebra_dim(self) -> int:
        n = self.dim
        return n * n - 1 if self.family == "sl" else n * (n - 1) // 2

    @cached_property
    def J(self) -> np.ndarray | None:
        if self.family == "sl":
            return None
        return np.fliplr(np.eye(self.dim))

    @cached_property
    def split_basis(self) -> np.ndarray | None:
        """Orthogonal ``C`` with ``C.T @ J @ C = diag(I_p, -I_p)`` (sopp only)."""
        if self.family == "sl":
            return None
        p, n = self.size, self.dim
        C = np.zeros((n, n))
        s = 1.0 / np.sqrt(2.0)
        for i in range(p):
            C[i, i] = C[n - 1 - i, i] = s
            C[i, p + i] = s
            C[n - 1 - i, p + i] = -s
        return C

    def check_shape(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape != (self.dim, self.dim):
            raise ModelError(f"expected a {self.dim}x{self.dim} matrix for {self}, got {X.shape}")
        return X


def _scale(X: np.ndarray) -> float:
    # absolute below 1, relative above
    return max(1.0, float(np.linalg.norm(X)))


def bracket(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if np.shape(X) != np.shape(Y):
        raise ModelError("bracket of matrices of different sizes")
    return X @ Y - Y @ X


def killing_form(model: GroupModel, X: np.ndarray, Y: np.ndarray) -> float:
    """``tr(ad X ad Y)``, via the closed forms ``2n tr(XY)`` and ``(2p - 2) tr(XY)``."""
    X, Y = model.check_shape(X), model.check_shape(Y)
    c = 2 * model.size if model.family == "sl" else model.dim - 2
    return float(c * np.trace(X @ Y))


def cartan_involution(X: np.ndarray) -> np.ndarray:
    return -np.asarray(X).T


def b_theta(model: GroupModel, X: np.ndarray, Y: np.ndarray) -> float:
    """Positive definite inner product ``-B(X, theta Y)``."""
    return -killing_form(model, X, cartan_involution(Y))


def is_algebra_member(X: np.ndarray, model: GroupModel, tol: float = DEFAULT_TOL.membership_tol) -> bool:
    X = model.check_shape(X)
    if model.family == "sl":
        return abs(np.trace(X)) <= tol * _scale(X)
    J = model.J
    return np.linalg.norm(J @ X.T @ J + X) <= tol * _scale(X)


def in_identity_component(g: np.ndarray, model: GroupModel) -> bool:
    """For sopp: both diagonal blocks in the ``diag(I, -I)`` frame have positive determinant."""
    if model.family == "sl":
        return True
    C, p = model.split_basis, model.size
    h = C.T @ g @ C
    return np.linalg.det(h[:p, :p]) > 0 and np.linalg.det(h[p:, p:]) > 0


def is_group_member(g: np.ndarray, model: GroupModel, tol: float = DEFAULT_TOL.membership_tol) -> bool:
    g = model.check_shape(g)
    s = _scale(g) ** 2
    if model.family == "sl":
        sign, logdet = np.linalg.slogdet(g)
        return bool(sign > 0 and abs(logdet) <= tol * s)
    # preserving J forces det = +-1 and the component test fixes the sign
    J = model.J
    if np.linalg.norm(g.T @ J @ g - J) > tol * s:
        return False
    return in_identity_component(g, model)


def is_orthogonal(k: np.ndarray, tol: float = DEFAULT_TOL.membership_tol) -> bool:
    k = np.asarray(k)
    return np.linalg.norm(k @ k.T - np.eye(len(k))) <= tol


def in_K(k: np.ndarray, model: GroupModel, tol: float = DEFAULT_TOL.membership_tol) -> bool:
    """Membership in the maximal compact ``K = G ∩ SO(dim)``."""
    return is_orthogonal(k, tol) and is_group_member(k, model, tol)


def _nilpotent_order(X: np.ndarray) -> int | None:
    """Smallest m with X^m = 0 when X is strictly triangular, else None."""
    if np.any(np.tril(X)) and np.any(np.triu(X)):
        return None
    P = X.copy()
    for m in range(1, len(X) + 1):
        if not np.any(P):
            return m
        P = P @ X
    return len(X) + 1


def group_exp(X: np.ndarray) -> np.ndarray:
    """Matrix exponential; strictly triangular input uses the terminating series."""
    X = np.asarray(X, dtype=float)
    order = _nilpotent_order(X)
    if order is None:
        return expm(X)
    out = np.eye(len(X))
    term = np.eye(len(X))
    for m in range(1, order):
        term = term @ X / m
        out = out + term
    return out


def group_log(g: np.ndarray, tol: float = DEFAULT_TOL.spectrum_tol) -> np.ndarray:
    """Principal logarithm; unipotent triangular input uses the terminating series."""
    g = np.asarray(g, dtype=float)
    n = len(g)
    U = g - np.eye(n)
    order = _nilpotent_order(U)
    if order is not None:
        out = np.zeros_like(g)
        term = np.eye(n)
        for m in range(1, order):
            term = term @ U
            out = out + ((-1) ** (m + 1)) * term / m
        return out
    ev = np.linalg.eigvals(g)
    if np.any((np.abs(ev.imag) <= tol) & (ev.real <= tol)):
        raise ModelError("spectrum meets the closed negative real axis; no principal logarithm")
    L = logm(g)
    return np.real(L)


def adjoint(g: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``Ad(g) X = g X g^{-1}``."""
    return g @ X @ np.linalg.inv(g)


def group_distance(g: np.ndarray, h: np.ndarray) -> float:
    """Proper metric ``max(|g - h|_F, |g^-1 - h^-1|_F)`` on the matrix group."""
    gi, hi = np.linalg.inv(g), np.linalg.inv(h)
    return float(max(np.linalg.norm(g - h), np.linalg.norm(gi - hi)))
