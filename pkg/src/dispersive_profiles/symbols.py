"""Matrix-valued homogeneous symbols and Strichartz exponent arithmetic.

A symbol ``L`` maps a frequency ``xi`` in R^d to a hermitian ``N x N`` matrix
and generates the flow ``exp(i t L(D))`` solving ``i u_t + L(D) u = 0``.
With this convention the Schrodinger group ``exp(i t Laplacian)`` has symbol
``-|xi|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable

import numpy as np

KINDS = ("schrodinger", "wave", "dirac3d", "nonelliptic", "custom")

HERMITIAN_TOL = 1e-12
HOMOGENEITY_TOL = 1e-10

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def _dirac_alphas() -> np.ndarray:
    alphas = np.zeros((3, 4, 4), dtype=complex)
    for j in range(3):
        alphas[j, :2, 2:] = PAULI[j]
        alphas[j, 2:, :2] = PAULI[j]
    return alphas


DIRAC_ALPHAS = _dirac_alphas()


class SymbolError(ValueError):
    """Invalid symbol construction (kind, dimension, or failed validation)."""


class AdmissibilityError(ValueError):
    """No exponent pair satisfies the scaling condition for the inputs."""


@dataclass(frozen=True, eq=False)
class DispersiveSymbol:
    """Hermitian, ``alpha``-homogeneous matrix symbol on R^d.

    ``evaluator`` takes an array of frequencies of shape ``(..., d)`` and
    returns matrices of shape ``(..., N, N)``.
    """

    d: int
    N: int
    alpha: float
    kind: str
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    m: int | None = None
    name: str | None = None

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.d:
            raise SymbolError(f"frequency has {xi.shape[-1]} coordinates, symbol dimension is {self.d}")
        return self.evaluator(xi)

    @property
    def id(self) -> str:
        if self.kind == "nonelliptic":
            return f"nonelliptic:{self.m}"
        if self.kind == "custom":
            return self.name or "custom"
        return self.kind

    @property
    def is_scalar(self) -> bool:
        return self.N == 1

    def spectral(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """Batched eigendecomposition at frequencies ``xi`` of shape ``(..., d)``.

        Returns ascending eigenvalues ``(..., N)`` and unitary eigenvector
        matrices ``(..., N, N)`` (columns are eigenvectors).
        """
        xi = np.asarray(xi, dtype=float)
        if self.kind in ("schrodinger", "wave", "nonelliptic"):
            lam = self(xi)[..., 0, 0].real[..., None]
            vec = np.ones(lam.shape + (1,), dtype=complex)
            return lam, vec
        if self.kind == "dirac3d":
            return _dirac_spectral(xi)
        return jacobi_eigh(self(xi))


def _schrodinger(xi: np.ndarray) -> np.ndarray:
    return (-np.sum(xi**2, axis=-1) + 0j)[..., None, None]


def _wave(xi: np.ndarray) -> np.ndarray:
    return (np.sqrt(np.sum(xi**2, axis=-1)) + 0j)[..., None, None]


def _nonelliptic(m: int) -> Callable[[np.ndarray], np.ndarray]:
    def evaluate(xi: np.ndarray) -> np.ndarray:
        q = -np.sum(xi[..., :m] ** 2, axis=-1) + np.sum(xi[..., m:] ** 2, axis=-1)
        return (q + 0j)[..., None, None]

    return evaluate


def _dirac(xi: np.ndarray) -> np.ndarray:
    return np.einsum("...j,jab->...ab", xi.astype(complex), DIRAC_ALPHAS)


def _dirac_spectral(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # eigenvectors (v, +-sigma_hat v)/sqrt(2) with sigma_hat = sigma.xi/|xi|
    shape = xi.shape[:-1]
    norm = np.sqrt(np.sum(xi**2, axis=-1))
    safe = np.where(norm > 0, norm, 1.0)
    sig_hat = np.einsum("...j,jab->...ab", (xi / safe[..., None]).astype(complex), PAULI)
    vec = np.zeros(shape + (4, 4), dtype=complex)
    r = 1.0 / math.sqrt(2.0)
    for col, (sign, k) in enumerate(((-1, 0), (-1, 1), (1, 0), (1, 1))):
        vec[..., k, col] = r
        vec[..., 2:, col] = sign * r * sig_hat[..., :, k]
    zero = norm == 0
    if np.any(zero):
        vec[zero] = np.eye(4)
    lam = np.stack([-norm, -norm, norm, norm], axis=-1)
    return lam, vec


def make_builtin(kind: str, d: int, m: int | None = None) -> DispersiveSymbol:
    """Construct one of the preset symbols.

    ``schrodinger`` is ``-|xi|^2``, ``wave`` is ``|xi|``, ``nonelliptic`` with
    signature ``m`` is ``-(xi_1^2+...+xi_m^2) + (xi_{m+1}^2+...+xi_d^2)``, and
    ``dirac3d`` is ``sum_j alpha_j xi_j`` with the 4x4 Dirac matrices.
    """
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise SymbolError(f"dimension must be a positive integer, got {d!r}")
    d = int(d)
    if kind == "schrodinger":
        return DispersiveSymbol(d=d, N=1, alpha=2.0, kind=kind, evaluator=_schrodinger)
    if kind == "wave":
        return DispersiveSymbol(d=d, N=1, alpha=1.0, kind=kind, evaluator=_wave)
    if kind == "dirac3d":
        if d != 3:
            raise SymbolError(f"dirac3d requires d = 3, got d = {d}")
        return DispersiveSymbol(d=3, N=4, alpha=1.0, kind=kind, evaluator=_dirac)
    if kind == "nonelliptic":
        if m is None:
            raise SymbolError("nonelliptic requires a signature m with 1 <= m < d")
        if not 1 <= m < d:
            raise SymbolError(f"nonelliptic requires 1 <= m < d, got m = {m}, d = {d}")
        return DispersiveSymbol(d=d, N=1, alpha=2.0, kind=kind, evaluator=_nonelliptic(int(m)), m=int(m))
    raise SymbolError(f"unsupported symbol kind {kind!r}; expected one of schrodinger, wave, dirac3d, nonelliptic")


def symbol_from_id(sid: str, d: int | None = None) -> DispersiveSymbol:
    """Resolve a preset id such as ``"schrodinger"`` or ``"nonelliptic:1"``."""
    kind, _, arg = sid.partition(":")
    if kind == "dirac3d":
        return make_builtin("dirac3d", 3 if d is None else d)
    if d is None:
        raise SymbolError(f"symbol {sid!r} needs a dimension")
    if kind == "nonelliptic":
        if not arg:
            raise SymbolError("nonelliptic id must carry the signature, e.g. 'nonelliptic:1'")
        return make_builtin("nonelliptic", d, int(arg))
    if arg:
        raise SymbolError(f"symbol {kind!r} takes no parameter, got {sid!r}")
    return make_builtin(kind, d)


def custom_symbol(
    evaluator: Callable[[np.ndarray], np.ndarray],
    d: int,
    N: int,
    alpha: float,
    name: str = "custom",
    n_samples: int = 256,
    seed: int = 0,
) -> DispersiveSymbol:
    """Register a user symbol after checking hermiticity and homogeneity by sampling."""
    sym = DispersiveSymbol(d=d, N=N, alpha=float(alpha), kind="custom", evaluator=evaluator, name=name)
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(n_samples, d))
    lam = rng.uniform(0.1, 10.0, size=n_samples)
    mats = sym(xi)
    if mats.shape != (n_samples, N, N):
        raise SymbolError(f"evaluator returned shape {mats.shape}, expected {(n_samples, N, N)}")
    herm = np.max(np.abs(mats - np.conj(np.swapaxes(mats, -1, -2))))
    if herm > HERMITIAN_TOL * max(1.0, np.max(np.abs(mats))):
        raise SymbolError(f"symbol is not hermitian (max defect {herm:.3e})")
    defect = homogeneity_defect(sym, xi, lam)
    if defect > HOMOGENEITY_TOL:
        raise SymbolError(f"symbol is not {alpha}-homogeneous (relative defect {defect:.3e})")
    return sym


def homogeneity_defect(sym: DispersiveSymbol, xi: np.ndarray, lam: np.ndarray) -> float:
    """Max entrywise defect of ``L(lam xi) = lam^alpha L(xi)``.

    The defect is measured relative to ``|lam xi|^alpha``, the natural size of
    an order-alpha symbol. Relative to ``|L(xi)|`` itself it would blow up near
    the zero set of an indefinite symbol, where the entries cancel.
    """
    lhs = sym(xi * lam[:, None])
    rhs = (lam**sym.alpha)[:, None, None] * sym(xi)
    size = (lam * np.linalg.norm(xi, axis=-1)) ** sym.alpha
    scale = np.maximum(np.maximum(np.max(np.abs(rhs), axis=(-1, -2)), size), np.finfo(float).tiny)
    return float(np.max(np.max(np.abs(lhs - rhs), axis=(-1, -2)) / scale))


def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a batch of hermitian matrices ``(..., n, n)``."""
    a = np.array(a, dtype=complex)
    shape = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape((-1, n, n))
    v = np.broadcast_to(np.eye(n, dtype=complex), a.shape).copy()
    scale = np.maximum(np.linalg.norm(a, axis=(-1, -2)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        diag = np.sum(np.abs(np.diagonal(a, axis1=-2, axis2=-1)) ** 2, axis=-1)
        off = np.sqrt(np.maximum(np.sum(np.abs(a) ** 2, axis=(-1, -2)) - diag, 0.0))
        if np.all(off <= tol * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                mod = np.abs(apq)
                active = mod > tol * scale * 1e-3
                safe_mod = np.where(active, mod, 1.0)
                phase = np.where(active, apq / safe_mod, 1.0)
                tau = (a[:, q, q].real - a[:, p, p].real) / (2.0 * safe_mod)
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau**2))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t**2)
                s = t * c
                ph = np.conj(phase)
                # a <- a J with J[p,p]=c, J[q,p]=-s*ph, J[p,q]=s, J[q,q]=c*ph
                cp = a[:, :, p].copy()
                cq = a[:, :, q].copy()
                a[:, :, p] = c[:, None] * cp - (s * ph)[:, None] * cq
                a[:, :, q] = s[:, None] * cp + (c * ph)[:, None] * cq
                rp = a[:, p, :].copy()
                rq = a[:, q, :].copy()
                a[:, p, :] = c[:, None] * rp - (s * phase)[:, None] * rq
                a[:, q, :] = s[:, None] * rp + (c * phase)[:, None] * rq
                vp = v[:, :, p].copy()
                vq = v[:, :, q].copy()
                v[:, :, p] = c[:, None] * vp - (s * ph)[:, None] * vq
                v[:, :, q] = s[:, None] * vp + (c * ph)[:, None] * vq
    lam = np.diagonal(a, axis1=-2, axis2=-1).real
    order = np.argsort(lam, axis=-1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    return lam.reshape(shape + (n,)), v.reshape(shape + (n, n))


def eigendecompose(sym: DispersiveSymbol, xi) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvectors of ``L(xi)`` at one point."""
    xi = np.asarray(xi, dtype=float).reshape(sym.d)
    lam, vec = sym.spectral(xi)
    return lam, vec


@dataclass(frozen=True)
class AdmissiblePair:
    p: float | Fraction
    q: float | Fraction
    s: float | Fraction
    alpha: float | Fraction
    d: int

    def residual(self):
        """``alpha/p + d/q - (d/2 - s)``; exactly zero for rational admissible input."""
        exact = _exact(self.s, self.alpha) and all(v == math.inf or _exact(v) for v in (self.p, self.q))
        half = Fraction(self.d, 2) if exact else self.d / 2
        return _recip(self.alpha, self.p) + _recip(self.d, self.q) - half + self.s


def _exact(*values) -> bool:
    return all(isinstance(v, (Rational, int)) for v in values)


def _recip(num, den):
    if den == math.inf:
        return 0
    return num / den


def _check_sobolev_index(d, s) -> None:
    if not (0 < s < Fraction(d, 2) if _exact(s) else 0 < s < d / 2):
        raise AdmissibilityError(f"Sobolev index must satisfy 0 < s < d/2 = {d / 2}, got s = {s}")


def diagonal_exponent(d: int, s, alpha):
    """Exponent ``r = 2(alpha + d)/(d - 2s)`` of the diagonal space-time norm."""
    _check_sobolev_index(d, s)
    if _exact(s, alpha):
        return Fraction(2 * (Fraction(alpha) + d), d - 2 * Fraction(s))
    return 2.0 * (alpha + d) / (d - 2.0 * s)


def sobolev_exponent(d: int, s):
    """Critical Lebesgue exponent ``2d/(d - 2s)`` of the embedding of H^s."""
    _check_sobolev_index(d, s)
    if _exact(s):
        return Fraction(2 * d, d - 2 * Fraction(s))
    return 2.0 * d / (d - 2.0 * s)


def admissible_exponents(d: int, s, alpha, p=None) -> AdmissiblePair:
    """Solve ``alpha/p + d/q = d/2 - s`` for ``q``; ``p=None`` selects ``p = q``.

    Exact ``Fraction`` arithmetic is used when ``s``, ``alpha`` and ``p`` are
    rational; ``p = math.inf`` is allowed.
    """
    _check_sobolev_index(d, s)
    if p is None:
        r = diagonal_exponent(d, s, alpha)
        return AdmissiblePair(p=r, q=r, s=s, alpha=alpha, d=d)
    exact = _exact(s, alpha) and (p == math.inf or _exact(p))
    half = Fraction(d, 2) if exact else d / 2
    p_min = alpha / (half - s) if exact else alpha / (d / 2 - s)
    if p < 2:
        raise AdmissibilityError(f"time exponent must satisfy p >= 2, got p = {p}; feasible range is [{max(2, p_min)}, inf]")
    rhs = half - s - _recip(alpha, p)
    if rhs < 0:
        raise AdmissibilityError(
            f"no q >= 2 solves alpha/p + d/q = d/2 - s for p = {p}; feasible range is [{max(2, p_min)}, inf]"
        )
    q = math.inf if rhs == 0 else d / rhs
    return AdmissiblePair(p=p, q=q, s=s, alpha=alpha, d=d)


def is_admissible(d: int, s, alpha, p, q, tol: float = 1e-12) -> bool:
    return abs(float(_recip(alpha, p)) + float(_recip(d, q)) - (d / 2 - float(s))) <= tol
