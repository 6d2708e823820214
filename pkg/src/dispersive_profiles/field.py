"""Periodic grids, vector-valued fields and the spectral propagator.

Samples live on ``[0, L_box)^d`` with index ``j`` at position ``j * dx``;
positions are reported in centered coordinates ``[-L_box/2, L_box/2)``.
Frequency arrays hold unitary (``norm="ortho"``) DFT coefficients in FFT
order, so continuum norms pick up a factor ``dx^d`` from the Riemann sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .symbols import AdmissibilityError, DispersiveSymbol, is_admissible

MAX_POINTS = 2**26
DEFAULT_M = {1: 256, 2: 128, 3: 64}
DEFAULT_L_BOX = 2 * math.pi * 16
ALIASING_TOL = 1e-8
DENSE_DILATION_MAX = 2048

_workers = 1


def set_threads(n: int) -> None:
    """Parallelism degree for the FFT backend; results do not depend on it."""
    global _workers
    _workers = max(1, int(n))


class GridError(ValueError):
    pass


class FieldMismatchError(ValueError):
    """Field and symbol (or two fields) disagree on dimension, grid or components."""


class AliasingError(ValueError):
    """A dilation would discard more than ``ALIASING_TOL`` of the L^2 mass."""


@dataclass(frozen=True)
class GridSpec:
    d: int
    M: int
    L_box: float = DEFAULT_L_BOX

    def __post_init__(self):
        if self.d < 1:
            raise GridError(f"dimension must be positive, got {self.d}")
        if self.M < 2 or self.M & (self.M - 1):
            raise GridError(f"points per axis must be a power of two, got {self.M}")
        if self.M**self.d > MAX_POINTS:
            raise GridError(f"grid has {self.M**self.d} points, limit is 2^26")
        if not self.L_box > 0:
            raise GridError(f"box length must be positive, got {self.L_box}")

    @classmethod
    def default(cls, d: int) -> "GridSpec":
        return cls(d=d, M=DEFAULT_M[d], L_box=DEFAULT_L_BOX)

    @property
    def dx(self) -> float:
        return self.L_box / self.M

    @property
    def dxi(self) -> float:
        return 2 * math.pi / self.L_box

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.d

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    @property
    def cell(self) -> float:
        return self.dx**self.d

    @property
    def volume(self) -> float:
        return self.L_box**self.d

    @property
    def nyquist(self) -> float:
        return math.pi / self.dx

    @cached_property
    def x1d(self) -> np.ndarray:
        j = np.arange(self.M)
        return np.where(j < self.M // 2, j, j - self.M) * self.dx

    @cached_property
    def xi1d(self) -> np.ndarray:
        return np.fft.fftfreq(self.M, d=1.0 / self.M) * self.dxi

    def _mesh(self, v: np.ndarray) -> np.ndarray:
        return np.stack(np.meshgrid(*([v] * self.d), indexing="ij"), axis=-1)

    @cached_property
    def x(self) -> np.ndarray:
        """Centered coordinates, shape ``(*shape, d)``."""
        return self._mesh(self.x1d)

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequency lattice, shape ``(*shape, d)``."""
        return self._mesh(self.xi1d)

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(np.sum(self.xi**2, axis=-1))

    @cached_property
    def x_abs(self) -> np.ndarray:
        return np.sqrt(np.sum(self.x**2, axis=-1))

    @cached_property
    def annulus_index(self) -> np.ndarray:
        """Dyadic annulus ``j`` with ``2^j <= |xi| < 2^(j+1)``; zero mode gets ``j_min - 1``."""
        _, e = np.frexp(self.xi_abs)
        j = e - 1
        nz = self.xi_abs > 0
        jmin = int(j[nz].min())
        return np.where(nz, j, jmin - 1)

    @cached_property
    def j_range(self) -> tuple[int, int]:
        nz = self.xi_abs > 0
        return int(self.annulus_index[nz].min()), int(self.annulus_index[nz].max())

    @property
    def annuli(self) -> np.ndarray:
        lo, hi = self.j_range
        return np.arange(lo, hi + 1)

    def sobolev_weight(self, s: float) -> np.ndarray:
        return _sobolev_weight(self, float(s))

    def wrap(self, pos) -> np.ndarray:
        """Map positions to centered coordinates ``[-L/2, L/2)``."""
        pos = np.asarray(pos, dtype=float)
        return (pos + self.L_box / 2) % self.L_box - self.L_box / 2

    def torus_distance(self, a, b) -> np.ndarray:
        return np.sqrt(np.sum(self.wrap(np.asarray(a) - np.asarray(b)) ** 2, axis=-1))

    def to_json(self) -> dict:
        return {"d": self.d, "M": self.M, "L_box": self.L_box}


@lru_cache(maxsize=64)
def _sobolev_weight(grid: GridSpec, s: float) -> np.ndarray:
    w = np.zeros(grid.shape)
    nz = grid.xi_abs > 0
    w[nz] = grid.xi_abs[nz] ** (2 * s)
    return w


# --- array-level kernels; the spatial axes are always the trailing d axes ---


def fft(arr: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sfft.fftn(arr, axes=grid.axes, norm="ortho", workers=_workers)


def ifft(arr: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sfft.ifftn(arr, axes=grid.axes, norm="ortho", workers=_workers)


def hs_norm_sq(fhat: np.ndarray, grid: GridSpec, s: float) -> np.ndarray:
    """Squared H^s norms of frequency arrays ``(..., N, *shape)``."""
    w = grid.sobolev_weight(s)
    axes = tuple(range(-grid.d - 1, 0))
    return grid.cell * np.sum(w * (fhat.real**2 + fhat.imag**2), axis=axes)


def hs_inner(fhat: np.ndarray, ghat: np.ndarray, grid: GridSpec, s: float) -> np.ndarray:
    w = grid.sobolev_weight(s)
    axes = tuple(range(-grid.d - 1, 0))
    return grid.cell * np.sum(w * fhat * np.conj(ghat), axis=axes)


def lq_norm(phys: np.ndarray, grid: GridSpec, q: float) -> np.ndarray:
    """L^q norms of physical arrays ``(..., N, *shape)``; modulus is euclidean over N."""
    mod2 = np.sum(phys.real**2 + phys.imag**2, axis=-grid.d - 1)
    axes = grid.axes
    if q == math.inf:
        return np.sqrt(np.max(mod2, axis=axes))
    if q == 2:
        return np.sqrt(grid.cell * np.sum(mod2, axis=axes))
    if q == 4:
        return (grid.cell * np.sum(mod2 * mod2, axis=axes)) ** 0.25
    return (grid.cell * np.sum(mod2 ** (q / 2), axis=axes)) ** (1.0 / q)


def annulus_masses(fhat: np.ndarray, grid: GridSpec, s: float = 0.0) -> np.ndarray:
    """Squared (H^s-weighted) mass per dyadic annulus, shape ``(..., n_annuli)``."""
    w = grid.sobolev_weight(s)
    dens = grid.cell * np.sum(fhat.real**2 + fhat.imag**2, axis=-grid.d - 1) * w
    lo, hi = grid.j_range
    idx = (grid.annulus_index - lo).ravel()
    lead = dens.shape[: dens.ndim - grid.d]
    flat = dens.reshape((-1, idx.size))
    valid = idx >= 0
    out = np.stack([np.bincount(idx[valid], weights=row[valid], minlength=hi - lo + 1) for row in flat])
    return out.reshape(lead + (hi - lo + 1,))


def translate_hat(fhat: np.ndarray, grid: GridSpec, shift) -> np.ndarray:
    """Frequency-space translation ``f(x) -> f(x - shift)``; ``shift`` is ``(d,)`` or ``(n, d)``."""
    shift = np.asarray(shift, dtype=float)
    if not np.any(shift):
        return fhat.copy()
    out = fhat
    lead = (shift.shape[0],) + (1,) * (fhat.ndim - grid.d - 1) if shift.ndim == 2 else ()
    for a in range(grid.d):
        # the phase is separable: one 1-d factor per axis
        sa = shift[..., a]
        if not np.any(sa):
            continue
        ph = np.exp(-1j * np.multiply.outer(sa, grid.xi1d))
        shape = [1] * grid.d
        shape[a] = grid.M
        out = out * ph.reshape(lead + tuple(shape))
    return out if out is not fhat else fhat.copy()


class Propagator:
    """Spectral data of a symbol on a grid: ``exp(itL) = V exp(it Lambda) V*`` per mode.

    The Dirac symbol squares to ``|xi|^2 I``, so its group is evaluated in
    closed form, ``cos(t|xi|) + i sin(t|xi|) L(xi)/|xi|``, which avoids a
    batched matrix product per time sample.
    """

    def __init__(self, sym: DispersiveSymbol, grid: GridSpec):
        if sym.d != grid.d:
            raise FieldMismatchError(f"symbol dimension {sym.d} differs from grid dimension {grid.d}")
        self.sym = sym
        self.grid = grid
        lam, vec = sym.spectral(grid.xi)
        self.lam = lam
        self.vec = vec if sym.N > 1 else None
        self.vech = np.conj(np.swapaxes(vec, -1, -2)) if sym.N > 1 else None
        self.dirac = sym.kind == "dirac3d"
        if self.dirac:
            r = grid.xi_abs
            inv = np.zeros_like(r)
            inv[r > 0] = 1.0 / r[r > 0]
            # unit symbol L(xi)/|xi|, components first: (N, N, *shape)
            self.unit = np.moveaxis(sym(grid.xi) * inv[..., None, None], (-2, -1), (0, 1))

    @property
    def N(self) -> int:
        return self.sym.N

    def _check(self, fhat: np.ndarray) -> None:
        if fhat.shape[-self.grid.d - 1] != self.N:
            raise FieldMismatchError(f"field has {fhat.shape[-self.grid.d - 1]} components, symbol has {self.N}")

    def project(self, fhat: np.ndarray) -> np.ndarray:
        """Eigen-coordinates ``V* f``, components moved to the last axis."""
        self._check(fhat)
        fh = np.moveaxis(fhat, -self.grid.d - 1, -1)
        if self.vech is None:
            return fh
        return np.matmul(self.vech, fh[..., None])[..., 0]

    def unproject(self, g: np.ndarray) -> np.ndarray:
        if self.vec is not None:
            g = np.matmul(self.vec, g[..., None])[..., 0]
        return np.moveaxis(g, -1, -self.grid.d - 1)

    def evolve_projected(self, g: np.ndarray, t: float) -> np.ndarray:
        return self.unproject(g * np.exp(1j * t * self.lam))

    def prepare(self, fhat: np.ndarray):
        """Precomputed state from which ``evolve`` produces ``exp(itL) f`` for any t."""
        self._check(fhat)
        if self.vec is None:
            return fhat
        if self.dirac:
            nd = self.grid.d
            lead = fhat.ndim - nd - 1
            letters = "abcdefgh"[:lead]
            g = np.einsum(f"ij...,{letters}j...->{letters}i...", self.unit, fhat)
            return (fhat, g)
        return self.project(fhat)

    def evolve(self, state, t: float) -> np.ndarray:
        if self.vec is None:
            return state * np.exp(1j * t * self.lam[..., 0])
        if self.dirac:
            f, g = state
            c, si = self._trig(t)
            out = f * c
            out += si * g
            return out
        return self.evolve_projected(state, t)

    def _trig(self, t: float):
        """``cos(t|xi|)`` and ``i sin(t|xi|)``, cached for the last few times."""
        cache = self.__dict__.setdefault("_trig_cache", {})
        hit = cache.get(t)
        if hit is None:
            arg = t * self.grid.xi_abs
            hit = (np.cos(arg), 1j * np.sin(arg))
            if len(cache) >= 32:
                cache.pop(next(iter(cache)))
            cache[t] = hit
        return hit

    def apply(self, fhat: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            self._check(fhat)
            return fhat.copy()
        return self.evolve(self.prepare(fhat), t)

    def group_speed(self, fhat: np.ndarray, rel_tol: float = 1e-12) -> float:
        """Max ``|grad lambda|`` over modes carrying more than ``rel_tol`` of the L^2 mass.

        Eigenvalue gradients are taken by central differences of the exact
        (homogeneous) eigenvalues at the lattice frequencies.
        """
        dens = np.sum(np.abs(fhat) ** 2, axis=tuple(range(fhat.ndim - self.grid.d)))
        populated = dens > rel_tol * dens.max()
        xi = self.grid.xi[populated]
        if xi.size == 0:
            return 0.0
        step = 1e-6 * max(1.0, float(np.max(np.abs(xi))))
        grad_sq = np.zeros((xi.shape[0], self.N))
        for a in range(self.grid.d):
            e = np.zeros(self.grid.d)
            e[a] = step
            lp, _ = self.sym.spectral(xi + e)
            lm, _ = self.sym.spectral(xi - e)
            grad_sq += ((lp - lm) / (2 * step)) ** 2
        return float(np.sqrt(grad_sq.max()))


@lru_cache(maxsize=16)
def get_propagator(sym: DispersiveSymbol, grid: GridSpec) -> Propagator:
    return Propagator(sym, grid)


def time_sweep(
    fhat: np.ndarray,
    sym: DispersiveSymbol,
    grid: GridSpec,
    times: Sequence[float],
    qs: Sequence[float],
    sign: int = 1,
) -> np.ndarray:
    """L^q norms of ``exp(sign i t L) f`` for every time, shape ``(..., n_t, len(qs))``."""
    prop = get_propagator(sym, grid)
    state = prop.prepare(fhat)
    out = np.empty(fhat.shape[: fhat.ndim - grid.d - 1] + (len(times), len(qs)))
    for i, t in enumerate(times):
        phys = ifft(prop.evolve(state, sign * t), grid)
        for k, q in enumerate(qs):
            out[..., i, k] = lq_norm(phys, grid, q)
    return out


# --- Field-level API ---


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of one function ``R^d -> C^N`` on a periodic grid."""

    grid: GridSpec
    samples: np.ndarray = dc_field(repr=False)
    space: str = "physical"

    def __post_init__(self):
        if self.space not in ("physical", "frequency"):
            raise ValueError(f"space must be 'physical' or 'frequency', got {self.space!r}")
        arr = np.asarray(self.samples, dtype=complex)
        if arr.ndim == self.grid.d:
            arr = arr[None]
        if arr.shape[1:] != self.grid.shape:
            if arr.ndim == 2 and arr.shape[1] == self.grid.M**self.grid.d:
                arr = arr.reshape((arr.shape[0],) + self.grid.shape)
            else:
                raise FieldMismatchError(f"samples of shape {arr.shape} do not fit grid {self.grid.shape}")
        object.__setattr__(self, "samples", arr)

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def hat(self) -> np.ndarray:
        return self.samples if self.space == "frequency" else fft(self.samples, self.grid)

    @property
    def phys(self) -> np.ndarray:
        return self.samples if self.space == "physical" else ifft(self.samples, self.grid)

    def to_frequency(self) -> "Field":
        return self if self.space == "frequency" else Field(self.grid, self.hat, "frequency")

    def to_physical(self) -> "Field":
        return self if self.space == "physical" else Field(self.grid, self.phys, "physical")

    def with_samples(self, samples: np.ndarray, space: str | None = None) -> "Field":
        return Field(self.grid, samples, space or self.space)

    def mean_zero(self) -> "Field":
        fh = self.hat.copy()
        fh[(slice(None),) + (0,) * self.grid.d] = 0
        out = Field(self.grid, fh, "frequency")
        return out if self.space == "frequency" else out.to_physical()

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.hat + other.hat, "frequency").in_space(self.space)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.hat - other.hat, "frequency").in_space(self.space)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.samples * c, self.space)

    __rmul__ = __mul__

    def in_space(self, space: str) -> "Field":
        return self.to_frequency() if space == "frequency" else self.to_physical()

    @classmethod
    def zeros(cls, grid: GridSpec, N: int = 1) -> "Field":
        return cls(grid, np.zeros((N,) + grid.shape, dtype=complex))


def _same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid or a.N != b.N:
        raise FieldMismatchError("fields live on different grids or have different component counts")


@dataclass(frozen=True, eq=False)
class SequenceFamily:
    """Finite family ``(u_n)``, ``n = 1..n_max``, sharing one grid and component count."""

    members: tuple[Field, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a sequence family needs at least one member")
        g, n = members[0].grid, members[0].N
        for f in members:
            if f.grid != g or f.N != n:
                raise FieldMismatchError("all members must share one grid and component count")
        object.__setattr__(self, "members", members)

    @property
    def grid(self) -> GridSpec:
        return self.members[0].grid

    @property
    def N(self) -> int:
        return self.members[0].N

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, i) -> Field:
        return self.members[i]

    def __iter__(self):
        return iter(self.members)

    def hat(self) -> np.ndarray:
        return np.stack([f.hat for f in self.members])

    def phys(self) -> np.ndarray:
        return np.stack([f.phys for f in self.members])

    @classmethod
    def from_hat(cls, arr: np.ndarray, grid: GridSpec) -> "SequenceFamily":
        return cls(tuple(Field(grid, a, "frequency") for a in arr))

    @classmethod
    def from_phys(cls, arr: np.ndarray, grid: GridSpec) -> "SequenceFamily":
        return cls(tuple(Field(grid, a, "physical") for a in arr))

    def mean_zero(self) -> "SequenceFamily":
        return SequenceFamily(tuple(f.mean_zero() for f in self.members))


def transform(f: Field, direction: str = "forward") -> Field:
    """Unitary DFT; ``forward`` maps physical samples to frequency coefficients."""
    if direction == "forward":
        return Field(f.grid, fft(f.phys, f.grid), "frequency")
    if direction == "inverse":
        return Field(f.grid, ifft(f.hat, f.grid), "physical")
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def _check_pair(f: Field, sym: DispersiveSymbol) -> None:
    if f.grid.d != sym.d:
        raise FieldMismatchError(f"field dimension {f.grid.d} differs from symbol dimension {sym.d}")
    if f.N != sym.N:
        raise FieldMismatchError(f"field has {f.N} components, symbol {sym.id} has {sym.N}")


def propagate(f: Field, sym: DispersiveSymbol, t: float) -> Field:
    """``exp(i t L(D)) f``, applied mode by mode through the eigendecomposition."""
    _check_pair(f, sym)
    out = Field(f.grid, get_propagator(sym, f.grid).apply(f.hat, t), "frequency")
    return out.in_space(f.space)


def sobolev_norm(f: Field, s: float) -> float:
    """Homogeneous H^s norm summed over components; the zero mode has weight 0."""
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    return float(np.sqrt(hs_norm_sq(f.hat, f.grid, s)))


def lebesgue_norm(f: Field, q: float) -> float:
    """Riemann-sum L^q norm of the euclidean modulus; ``q = inf`` gives the max."""
    if not (q >= 1):
        raise ValueError(f"q must be >= 1 or inf, got {q}")
    return float(lq_norm(f.phys, f.grid, q))


def besov_sup_norm(f: Field) -> float:
    """Largest L^2 norm of a sharp dyadic-annulus restriction of ``f``."""
    masses = annulus_masses(f.hat, f.grid)
    return float(np.sqrt(masses.max())) if masses.size else 0.0


def time_grid(T: float, n_t: int) -> np.ndarray:
    return np.linspace(-T, T, n_t)


def strichartz_norm(
    f: Field,
    sym: DispersiveSymbol,
    p: float,
    q: float,
    T: float,
    n_t: int = 129,
    s: float | None = None,
    override: bool = False,
) -> float:
    """``L^p_t L^q_x`` norm of ``exp(itL) f`` over ``[-T, T]`` by the trapezoid rule.

    ``p = inf`` returns the max over sampled times. Unless ``override`` is set,
    ``(p, q)`` must satisfy the scaling condition for the Sobolev index ``s``.
    """
    _check_pair(f, sym)
    if n_t < 16:
        raise ValueError(f"need at least 16 time samples, got {n_t}")
    if not override:
        if s is None:
            raise AdmissibilityError("admissibility needs the Sobolev index s (or override=True)")
        if not is_admissible(sym.d, s, sym.alpha, p, q):
            raise AdmissibilityError(
                f"(p, q) = ({p}, {q}) violates alpha/p + d/q = d/2 - s for alpha={sym.alpha}, d={sym.d}, s={s}"
            )
    times = time_grid(T, n_t)
    vals = time_sweep(f.hat, sym, f.grid, times, [q])[..., 0]
    return _time_norm(vals, times, p)


def _time_norm(vals: np.ndarray, times: np.ndarray, p: float) -> float:
    if p == math.inf:
        return float(np.max(vals))
    return float(np.trapezoid(vals**p, times) ** (1.0 / p))


# --- scaling, translation and evolution of profiles ---


def _dilation_matrix(grid: GridSpec, h: float) -> np.ndarray:
    # rows: output points x_j, columns: frequency coefficients; evaluates the
    # trigonometric interpolant at x_j / h (Nyquist mode as a cosine)
    y = grid.x1d / h
    k = grid.xi1d
    mat = np.exp(1j * np.outer(y, k))
    nyq = grid.M // 2
    mat[:, nyq] = np.cos(k[nyq] * y)
    if h < 1:
        mat[np.abs(y) > grid.L_box / 2 + 1e-12 * grid.L_box] = 0
    return mat / math.sqrt(grid.M)


def _dyadic_axis(arr: np.ndarray, axis: int, M: int, k: int) -> np.ndarray:
    """Samples of ``f(x / 2^k)`` along one axis, from physical samples of ``f``.

    For ``k < 0`` the new samples are samples of ``f`` at grid points (every
    ``2^-k``-th), zero where ``x / 2^k`` leaves the box. For ``k > 0`` the
    trigonometric interpolant is refined ``2^k`` times by zero padding (the
    Nyquist coefficient split evenly) and the central samples are kept.
    """
    jc = np.where(np.arange(M) < M // 2, np.arange(M), np.arange(M) - M)
    if k < 0:
        c = 2 ** (-k)
        src = c * jc
        valid = (src >= -(M // 2)) & (src < M // 2)
        out = np.take(arr, np.mod(src, M), axis=axis)
        shape = [1] * arr.ndim
        shape[axis] = M
        return out * valid.reshape(shape)
    c = 2**k
    A = sfft.fft(arr, axis=axis, norm="ortho", workers=_workers)
    A = np.moveaxis(A, axis, -1)
    B = np.zeros(A.shape[:-1] + (c * M,), dtype=complex)
    h = M // 2
    B[..., :h] = A[..., :h]
    B[..., c * M - h + 1 :] = A[..., h + 1 :]
    B[..., h] = 0.5 * A[..., h]
    B[..., c * M - h] = 0.5 * A[..., h]
    fine = sfft.ifft(B, axis=-1, norm="ortho", workers=_workers) * math.sqrt(c)
    out = np.take(fine, np.mod(jc, c * M), axis=-1)
    return np.moveaxis(out, -1, axis)


def dyadic_exponent(h: float) -> int | None:
    """``k`` with ``h = 2^k`` exactly, else None."""
    k = math.log2(h)
    r = round(k)
    return r if abs(k - r) < 1e-12 and 2.0**r == h else None


def dilation_loss(fhat: np.ndarray, grid: GridSpec, h: float) -> float:
    """Fraction of L^2 mass that ``f -> f(./h)`` cannot represent on the grid."""
    total = float(np.sum(np.abs(fhat) ** 2))
    if total == 0 or h == 1:
        return 0.0
    if h < 1:
        lost = np.any(np.abs(grid.xi) > h * grid.nyquist * (1 + 1e-12), axis=-1)
        return float(np.sum(np.abs(fhat[..., lost]) ** 2)) / total
    phys = ifft(fhat, grid)
    lost = np.any(np.abs(grid.x) >= grid.L_box / (2 * h), axis=-1)
    return float(np.sum(np.abs(phys[..., lost]) ** 2)) / total


def dilate_hat(fhat: np.ndarray, grid: GridSpec, h: float, s: float, check: bool = True) -> np.ndarray:
    """Frequency coefficients of ``h^{-(d/2-s)} f(x/h)``."""
    if h == 1:
        return fhat.copy()
    if not h > 0:
        raise ValueError(f"scale must be positive, got {h}")
    if check:
        loss = dilation_loss(fhat, grid, h)
        if loss > ALIASING_TOL:
            raise AliasingError(f"dilation by h={h:g} discards {loss:.3e} of the L^2 mass (tolerance {ALIASING_TOL:g})")
    k = dyadic_exponent(h)
    if k is not None:
        out = ifft(fhat, grid)
        for a in range(grid.d):
            out = _dyadic_axis(out, fhat.ndim - grid.d + a, grid.M, k)
        return fft(out, grid) * h ** (-(grid.d / 2 - s))
    if grid.M > DENSE_DILATION_MAX:
        raise GridError(
            f"dilation by non-dyadic h={h:g} needs a dense {grid.M}x{grid.M} matrix; "
            f"supported up to M={DENSE_DILATION_MAX} (powers of two are exact at any size)"
        )
    mat = _dilation_matrix(grid, h)
    out = fhat
    for a in range(grid.d):
        axis = fhat.ndim - grid.d + a
        out = np.moveaxis(np.tensordot(out, mat, axes=([axis], [1])), -1, axis)
    return fft(out, grid) * h ** (-(grid.d / 2 - s))


def profile_operator(
    U: Field,
    h: float,
    x0,
    t0: float,
    sym: DispersiveSymbol,
    s: float,
) -> Field:
    """``h^{-(d/2-s)} [exp(i (t0/h^alpha) L) U]((x - x0)/h)``.

    By homogeneity this equals ``exp(i t0 L)`` applied to the rescaled,
    translated profile, so ``t0`` and ``x0`` are in the frame of the output.
    """
    _check_pair(U, sym)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (U.grid.d,))
    fhat = U.hat
    if t0:
        fhat = get_propagator(sym, U.grid).apply(fhat, t0 / h**sym.alpha)
    if np.any(x0):
        fhat = translate_hat(fhat, U.grid, x0 / h)
    fhat = dilate_hat(fhat, U.grid, h, s)
    return Field(U.grid, fhat, "frequency").in_space(U.space)
