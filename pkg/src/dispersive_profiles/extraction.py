"""Greedy extraction of dispersive profiles from a finite family.

Each step selects, for every member, the time at which the backward-evolved
remainder is largest in ``L^{p(s)}``, then the spatial center of its largest
localized H^s mass, and averages the aligned tail of the family to obtain a
profile (a finite stand-in for a weak limit). The profile is transported back
to every member and subtracted.

Two finite-n devices complement the bare recurrence:

* a smooth taper around the aligned origin suppresses far-field disagreement
  in the tail average;
* after each step, all profiles found so far are re-estimated with their
  cores held fixed (block Gauss-Seidel backfitting), which removes the echo
  that not-yet-extracted profiles leave in earlier averages.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .field import (
    Field,
    GridSpec,
    SequenceFamily,
    dilate_hat,
    fft,
    get_propagator,
    hs_inner,
    hs_norm_sq,
    ifft,
    time_grid,
    time_sweep,
    translate_hat,
)
from .symbols import DispersiveSymbol, diagonal_exponent, sobolev_exponent

SCHEMA_VERSION = 1


class StagnationError(RuntimeError):
    """The extracted profile is negligible; the driver stops."""


# --- data types ---


@dataclass
class Core:
    """Per-n times and centers locating a profile in space-time."""

    times: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if self.centers.shape[0] != self.times.shape[0]:
            raise ValueError("times and centers must have the same length")

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass
class Profile:
    U: Field
    core: Core
    scale: np.ndarray
    energy: float
    step: int = 0

    def member_hat(self, n: int, sym: DispersiveSymbol, s: float) -> np.ndarray:
        from .field import profile_operator

        return profile_operator(self.U, float(self.scale[n]), self.core.centers[n], float(self.core.times[n]), sym, s).hat

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "energy": self.energy,
            "scale": self.scale.tolist(),
            "times": self.core.times.tolist(),
            "centers": self.core.centers.tolist(),
        }


@dataclass
class DecomposeParams:
    """Knobs of the extraction loop.

    ``delta_S`` is the stopping level for the remainder S-surrogate;
    ``refit_sweeps`` backfitting passes (with core re-selection) follow every
    step; at the end the profiles are solved jointly with frozen cores (GMRES
    to relative residual ``polish_tol``, at most ``polish_sweeps`` restarts)
    and the cores re-selected, for up to ``repick_rounds`` rounds;
    ``window_radius`` and ``taper_radius`` default to ``L/16`` and ``L/8``.
    """

    delta_S: float = 0.0
    J_max: int = 8
    tail_fraction: float = 0.5
    T: float = 8.0
    n_t: int = 65
    window_radius: float | None = None
    taper_radius: float | None = None
    refit_sweeps: int = 2
    polish_sweeps: int = 4
    polish_tol: float = 1e-10
    repick_rounds: int = 4
    stagnation_ratio: float = 1e-4
    defect_tol: float = 5e-2
    corr_tol: float = 0.1
    top_k: int = 4
    threshold: float = 16.0

    def validate(self) -> None:
        if not 0 < self.tail_fraction <= 1:
            raise ValueError(f"tail_fraction must lie in (0, 1], got {self.tail_fraction}")
        if self.n_t < 16:
            raise ValueError(f"need at least 16 time samples, got {self.n_t}")
        if self.T <= 0:
            raise ValueError(f"time window must be positive, got {self.T}")
        if self.J_max < 0:
            raise ValueError(f"J_max must be nonnegative, got {self.J_max}")
        if self.delta_S < 0:
            raise ValueError(f"delta_S must be nonnegative, got {self.delta_S}")

    def radii(self, grid: GridSpec) -> tuple[float, float]:
        w = self.window_radius if self.window_radius is not None else max(2 * grid.dx, grid.L_box / 16)
        t = self.taper_radius if self.taper_radius is not None else grid.L_box / 8
        if w < 2 * grid.dx:
            raise ValueError(f"window radius {w} is below two grid steps ({2 * grid.dx})")
        return w, t


@dataclass
class DecompositionReport:
    profiles: list
    remainder: SequenceFamily
    ledger: list
    strichartz_trace: list
    orthogonality: list
    stopping_reason: str
    steps: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    pythagorean: dict = field(default_factory=dict)

    @property
    def J(self) -> int:
        return len(self.profiles)

    def to_json(self) -> dict:
        return _clean(
            {
                "schema_version": SCHEMA_VERSION,
                "meta": self.meta,
                "params": self.params,
                "J": self.J,
                "stopping_reason": self.stopping_reason,
                "profiles": [p.to_json() for p in self.profiles],
                "ledger": self.ledger,
                "strichartz_trace": self.strichartz_trace,
                "orthogonality": self.orthogonality,
                "steps": self.steps,
                "pythagorean": self.pythagorean,
            }
        )


def _clean(obj):
    """Plain JSON types, with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.12g}")
    return obj


# --- helpers on stacked frequency arrays (n, N, *shape) ---


def _evolve_each(hat: np.ndarray, times: np.ndarray, sym: DispersiveSymbol, grid: GridSpec, sign: int = 1) -> np.ndarray:
    prop = get_propagator(sym, grid)
    return np.stack([prop.apply(hat[n], sign * float(times[n])) for n in range(hat.shape[0])])


def _translate_each(hat: np.ndarray, grid: GridSpec, shifts: np.ndarray) -> np.ndarray:
    return np.stack([translate_hat(hat[n], grid, shifts[n]) for n in range(hat.shape[0])])


def tail_indices(n_max: int, tail_fraction: float) -> np.ndarray:
    k = max(1, math.ceil(tail_fraction * n_max))
    return np.arange(n_max - k, n_max)


def taper(grid: GridSpec, radius: float) -> np.ndarray:
    """Radial window equal to 1 inside ``3 radius / 4`` with a cosine-squared roll-off to 0 at ``radius``."""
    r = grid.x_abs
    inner = 0.75 * radius
    t = np.clip((r - inner) / (radius - inner), 0.0, 1.0)
    return np.cos(0.5 * math.pi * t) ** 2


def window(grid: GridSpec, radius: float) -> np.ndarray:
    """Smooth ball of the given radius, ``cos^2(pi r / (2 radius))`` inside, 0 outside."""
    r = np.minimum(grid.x_abs / radius, 1.0)
    return np.cos(0.5 * math.pi * r) ** 2


def localized_mass(fhat: np.ndarray, grid: GridSpec, s: float, radius: float) -> np.ndarray:
    """Periodic moving sum of ``|(|D|^s f)(x)|^2`` against a smooth ball of the given radius.

    A sharp ball would give a flat or bimodal moving sum for profiles with
    sign-changing lobes; the cosine-squared weight keeps the maximum at the
    center of symmetric profiles. ``fhat`` has shape ``(..., N, *shape)``;
    the result drops the component axis.
    """
    w = np.sqrt(grid.sobolev_weight(s))
    dens = np.sum(np.abs(ifft(fhat * w, grid)) ** 2, axis=-grid.d - 1)
    ball = window(grid, radius)
    conv = ifft(fft(dens, grid) * fft(ball, grid), grid).real * math.sqrt(grid.M**grid.d)
    return conv * grid.cell


def _argmax_first(vals: np.ndarray) -> int:
    # quantize so that roundoff cannot reorder exact ties; np.argmax then
    # returns the first index in row-major (lexicographic) order
    top = np.max(vals)
    if top <= 0:
        return 0
    q = np.round(vals / top * 1e10)
    return int(np.argmax(q))


def _centers_from_mass(mass: np.ndarray, grid: GridSpec) -> np.ndarray:
    flat = mass.reshape(mass.shape[: mass.ndim - grid.d] + (-1,))
    lead = flat.shape[:-1]
    out = np.empty(lead + (grid.d,))
    xs = grid.x.reshape(-1, grid.d)
    for idx in np.ndindex(*lead):
        out[idx] = xs[_argmax_first(flat[idx])]
    return out


# --- public operations ---


def pick_time(
    family: SequenceFamily,
    sym: DispersiveSymbol,
    s: float,
    T: float,
    n_t: int = 65,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-member sampled time maximizing ``||exp(-itL) u_n||_{L^{p(s)}}`` over ``[-T, T]``.

    Ties go to the earliest time; a zero member gets time 0 and value 0.
    """
    grid = family.grid
    times = time_grid(T, n_t)
    q = float(sobolev_exponent(grid.d, s))
    vals = time_sweep(family.hat(), sym, grid, times, [q], sign=-1)[..., 0]
    return _times_from_sweep(vals, times)


def _times_from_sweep(vals: np.ndarray, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.array([_argmax_first(v) for v in vals])
    best = vals[np.arange(vals.shape[0]), idx]
    t = np.where(best > 0, times[idx], 0.0)
    return t, best


def pick_center(f: Field, s: float, window_radius: float) -> np.ndarray:
    """Center of the ball of the given radius carrying the most H^s-weighted mass."""
    grid = f.grid
    if window_radius < 2 * grid.dx:
        raise ValueError(f"window radius {window_radius} is below two grid steps ({2 * grid.dx})")
    return _centers_from_mass(localized_mass(f.hat, grid, s, window_radius), grid)


def _aligned(hat: np.ndarray, core: Core, sym: DispersiveSymbol, grid: GridSpec, idx) -> np.ndarray:
    """``exp(-i t_n L) u_n`` moved so that ``x_n`` sits at the origin, for members ``idx``."""
    idx = np.asarray(idx)
    w = _evolve_each(hat[idx], core.times[idx], sym, grid, sign=-1)
    return _translate_each(w, grid, -core.centers[idx])


def _tail_average(hat, core, sym, grid, tail, taper_radius) -> np.ndarray:
    avg = _aligned(hat, core, sym, grid, tail).mean(axis=0)
    if taper_radius is None:
        return avg
    return fft(ifft(avg, grid) * taper(grid, taper_radius), grid)


def estimate_profile(
    family: SequenceFamily,
    core: Core,
    sym: DispersiveSymbol,
    tail_fraction: float = 0.5,
    taper_radius: float | None = None,
) -> Field:
    """Tapered Cesaro average of the aligned tail ``exp(-i t_n L) u_n (. + x_n)``.

    ``taper_radius=None`` disables the taper.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    grid = family.grid
    tail = tail_indices(len(family), tail_fraction)
    return Field(grid, _tail_average(family.hat(), core, sym, grid, tail, taper_radius), "frequency")


def _peaks(mass: np.ndarray, grid: GridSpec, k: int, radius: float) -> list[np.ndarray]:
    """Up to ``k`` window centers, each at least ``2 * radius`` from the previous ones."""
    m = mass.copy()
    xs = grid.x
    out = []
    for _ in range(k):
        if np.max(m) <= 0:
            break
        c = xs.reshape(-1, grid.d)[_argmax_first(m.ravel())]
        out.append(c)
        m = np.where(grid.torus_distance(xs, c) < 2 * radius, 0.0, m)
    return out


def gamma_surrogate(
    family: SequenceFamily,
    s: float,
    window_radius: float | None = None,
    taper_radius: float | None = None,
    tail_fraction: float = 0.5,
    top_k: int = 4,
) -> float:
    """Largest H^s norm of a tapered, center-aligned tail average.

    Candidate translations are the top-k window centers of each tail member,
    held fixed across n, together with the per-n rank-r peak sequences (which
    follow profiles whose centers move with n). The maximum over candidates
    stands in for the supremum over weak limits of translated subsequences.
    """
    grid = family.grid
    hat = family.hat()
    if not np.any(hat):
        return 0.0
    wr = window_radius if window_radius is not None else max(2 * grid.dx, grid.L_box / 16)
    tr = taper_radius if taper_radius is not None else grid.L_box / 8
    tail = tail_indices(hat.shape[0], tail_fraction)
    mass = localized_mass(hat[tail], grid, s, wr)
    peaks = [_peaks(mass[i], grid, top_k, wr) for i in range(len(tail))]
    win = taper(grid, tr)
    sub = hat[tail]

    def norm_of(shifts: np.ndarray) -> float:
        avg = _translate_each(sub, grid, -shifts).mean(axis=0)
        avg = fft(ifft(avg, grid) * win, grid)
        return math.sqrt(float(hs_norm_sq(avg, grid, s)))

    best = 0.0
    seen = set()
    for plist in peaks:
        for c in plist:
            key = tuple(np.round(c / grid.dx).astype(int))
            if key in seen:
                continue
            seen.add(key)
            best = max(best, norm_of(np.tile(c, (len(tail), 1))))
    for r in range(top_k):
        if all(len(p) > r for p in peaks):
            best = max(best, norm_of(np.array([p[r] for p in peaks])))
    return best


def gerard_constant(lhs: float, hs: float, gamma: float, p: float) -> float:
    """Smallest ``C`` with ``lhs <= C * hs^{2/p} * gamma^{1-2/p}``; 0 when ``lhs`` is 0."""
    if lhs <= 0:
        return 0.0
    rhs = hs ** (2.0 / p) * gamma ** (1.0 - 2.0 / p)
    return math.inf if rhs <= 0 else lhs / rhs


class _State:
    """Mutable working set of the extraction loop."""

    def __init__(self, family: SequenceFamily, sym: DispersiveSymbol, s: float, params: DecomposeParams):
        self.grid = family.grid
        self.sym = sym
        self.s = s
        self.params = params
        self.u = family.hat()
        self.n_max = self.u.shape[0]
        self.tail = tail_indices(self.n_max, params.tail_fraction)
        self.window_radius, self.taper_radius = params.radii(self.grid)
        self.times = time_grid(params.T, params.n_t)
        self.q = float(sobolev_exponent(self.grid.d, s))
        self.r = float(diagonal_exponent(self.grid.d, s, sym.alpha))
        self.cores: list[Core] = []
        self.U: list[np.ndarray] = []
        self.P: list[np.ndarray] = []
        self.R = self.u.copy()

    def sweep(self, hat: np.ndarray, with_r: bool = True) -> np.ndarray:
        qs = [self.q, self.r] if with_r else [self.q]
        return time_sweep(hat, self.sym, self.grid, self.times, qs, sign=-1)

    def transport(self, Uhat: np.ndarray, core: Core) -> np.ndarray:
        moved = np.stack([translate_hat(Uhat, self.grid, core.centers[n]) for n in range(self.n_max)])
        return _evolve_each(moved, core.times, self.sym, self.grid, sign=1)

    def estimate(self, hat: np.ndarray, core: Core) -> np.ndarray:
        return _tail_average(hat, core, self.sym, self.grid, self.tail, self.taper_radius)

    def add(self, Uhat: np.ndarray, core: Core) -> None:
        P = self.transport(Uhat, core)
        self.cores.append(core)
        self.U.append(Uhat)
        self.P.append(P)
        self.R = self.R - P

    def pick(self, hat: np.ndarray, vals: np.ndarray | None = None) -> Core:
        """Core of the dominant concentration: sampled time, then window center."""
        if vals is None:
            vals = time_sweep(hat, self.sym, self.grid, self.times, [self.q], sign=-1)[..., 0]
        t, _ = _times_from_sweep(vals, self.times)
        w = _evolve_each(hat, t, self.sym, self.grid, sign=-1)
        centers = _centers_from_mass(localized_mass(w, self.grid, self.s, self.window_radius), self.grid)
        return Core(t, centers)

    def refit(self, sweeps: int, repick: str = "last", tol: float = 0.0) -> int:
        """Gauss-Seidel passes over the profiles; returns the number of passes run.

        ``repick`` selects whose cores are re-selected from their residual
        before re-estimation: ``"last"`` (the newest profile), ``"all"`` or
        ``"none"``. With ``tol > 0`` the passes stop once no profile changes by
        more than ``tol`` relative (H^s norm).
        """
        for k in range(sweeps):
            change = 0.0
            for i in range(len(self.U)):
                resid = self.R + self.P[i]
                if repick == "all" or (repick == "last" and i == len(self.U) - 1):
                    self.cores[i] = self.pick(resid)
                Uhat = self.estimate(resid, self.cores[i])
                ref = float(hs_norm_sq(Uhat, self.grid, self.s))
                if ref > 0:
                    change = max(change, math.sqrt(float(hs_norm_sq(Uhat - self.U[i], self.grid, self.s)) / ref))
                P = self.transport(Uhat, self.cores[i])
                self.U[i] = Uhat
                self.P[i] = P
                self.R = resid - P
            if tol > 0 and change <= tol:
                return k + 1
        return sweeps

    def solve(self, maxiter: int, tol: float) -> int:
        """Joint re-estimate of all profiles with frozen cores.

        The backfitting fixed point ``U_j = W A_j (u - sum_{k != j} T_k U_k)``
        (``T_k`` transports a profile to its cores, ``A_j`` is the aligned tail
        average, ``W`` the taper) is linear; since ``A_j T_j`` is the identity
        it reads ``U_j + W (A_j sum_k T_k U_k - U_j) = W A_j u`` and is solved
        by GMRES. Returns the number of matrix-vector products.
        """
        J = len(self.U)
        if J == 0:
            return 0
        shape = self.U[0].shape
        size = self.U[0].size
        win = taper(self.grid, self.taper_radius)
        tail = self.tail

        def W(fhat):
            return fft(ifft(fhat, self.grid) * win, self.grid)

        def transport_tail(Uhat, core):
            moved = np.stack([translate_hat(Uhat, self.grid, core.centers[n]) for n in tail])
            return _evolve_each(moved, core.times[tail], self.sym, self.grid, sign=1)

        def average(hat_tail, core):
            w = _evolve_each(hat_tail, core.times[tail], self.sym, self.grid, sign=-1)
            return _translate_each(w, self.grid, -core.centers[tail]).mean(axis=0)

        count = [0]

        def matvec(x):
            count[0] += 1
            Us = [x[j * size : (j + 1) * size].reshape(shape) for j in range(J)]
            total = sum(transport_tail(Us[j], self.cores[j]) for j in range(J))
            out = [Us[j] + W(average(total, self.cores[j]) - Us[j]) for j in range(J)]
            return np.concatenate([o.ravel() for o in out])

        u_tail = self.u[tail]
        b = np.concatenate([W(average(u_tail, self.cores[j])).ravel() for j in range(J)])
        x0 = np.concatenate([U.ravel() for U in self.U])
        op = LinearOperator((J * size, J * size), matvec=matvec, dtype=complex)
        x, _ = gmres(op, b, x0=x0, rtol=tol, atol=0.0, restart=min(40, J * size), maxiter=maxiter)
        for j in range(J):
            Uhat = x[j * size : (j + 1) * size].reshape(shape)
            self.U[j] = Uhat
            self.P[j] = self.transport(Uhat, self.cores[j])
        self.R = self.u - sum(self.P)
        return count[0]

    def polish(self, maxiter: int, tol: float, rounds: int) -> int:
        """Solve for the profiles with frozen cores, then re-select the cores
        from the converged residuals; repeat until the cores stop moving."""
        total = 0
        for _ in range(max(1, rounds)):
            if not self.U:
                break
            total += self.solve(maxiter, tol)
            before = [Core(c.times.copy(), c.centers.copy()) for c in self.cores]
            self.cores = [self.pick(self.R + self.P[i]) for i in range(len(self.U))]
            if _cores_equal(before, self.cores):
                break
        else:
            total += self.solve(maxiter, tol)
        return total


def _cores_equal(a: list[Core], b: list[Core]) -> bool:
    return all(np.array_equal(x.times, y.times) and np.array_equal(x.centers, y.centers) for x, y in zip(a, b))


def extract_step(
    family: SequenceFamily,
    sym: DispersiveSymbol,
    s: float,
    params: DecomposeParams | None = None,
    energy_floor: float = 0.0,
) -> tuple[Profile, SequenceFamily, float]:
    """One extraction: pick times and centers, average, subtract.

    Returns the profile, the remainder family and the energy defect
    ``max_n |‖R_n‖² − ‖u_n‖² + ‖U‖²| / ‖u_n‖²`` (H^s squares).
    Raises :class:`StagnationError` when the profile energy does not exceed
    ``energy_floor`` (or is exactly zero).
    """
    params = params or DecomposeParams()
    params.validate()
    st = _State(family, sym, s, params)
    vals = st.sweep(st.u, with_r=False)[..., 0]
    core = st.pick(st.u, vals)
    Uhat = st.estimate(st.u, core)
    energy = float(hs_norm_sq(Uhat, st.grid, s))
    if energy <= energy_floor or energy == 0.0:
        raise StagnationError(f"profile energy {energy:.3e} does not exceed the floor {energy_floor:.3e}")
    st.add(Uhat, core)
    e_in = hs_norm_sq(st.u, st.grid, s)
    e_out = hs_norm_sq(st.R, st.grid, s)
    defect = float(np.max(np.abs(e_out - e_in + energy) / np.maximum(e_in, 1e-300)))
    prof = Profile(Field(st.grid, Uhat, "frequency"), core, np.ones(st.n_max), energy, step=1)
    return prof, SequenceFamily.from_hat(st.R, st.grid), defect


def decompose(
    family: SequenceFamily,
    sym: DispersiveSymbol,
    s: float,
    params: DecomposeParams | None = None,
    energy_ref: float | None = None,
) -> DecompositionReport:
    """Iterate extraction until the remainder S-surrogate drops to ``delta_S``,
    ``J_max`` profiles are found, or a step stagnates.

    A step stagnates when its profile energy is below ``stagnation_ratio``
    times ``energy_ref`` (default: the largest member energy of the input).

    The report ledger is recomputed at the end from the final (refitted)
    profiles, so all per-step quantities are cumulative and consistent:
    step j compares ``R^{j-1} = u - sum_{i<j} P^i`` with ``R^j``.
    """
    params = params or DecomposeParams()
    params.validate()
    st = _State(family, sym, s, params)
    grid = st.grid
    e_max = float(np.max(hs_norm_sq(st.u, grid, s))) if energy_ref is None else float(energy_ref)
    reason = "budget"
    while True:
        vals = st.sweep(st.R, with_r=False)[..., 0]
        S_now = float(vals.max())
        if S_now <= params.delta_S:
            reason = "threshold"
            break
        if len(st.U) >= params.J_max:
            reason = "budget"
            break
        core = st.pick(st.R, vals)
        Uhat = st.estimate(st.R, core)
        energy = float(hs_norm_sq(Uhat, grid, s))
        if energy < params.stagnation_ratio * e_max or energy == 0.0:
            reason = "stagnation"
            break
        st.add(Uhat, core)
        st.refit(params.refit_sweeps)
    polish = st.polish(params.polish_sweeps, params.polish_tol, params.repick_rounds)
    report = _build_report(st, reason)
    report.meta["polish_matvecs"] = polish
    return report


def _build_report(st: _State, reason: str, scales: list | None = None) -> DecompositionReport:
    grid, sym, s, params = st.grid, st.sym, st.s, st.params
    J = len(st.U)
    scales = scales or [np.ones(st.n_max)] * J
    e_u = hs_norm_sq(st.u, grid, s)
    energies = [float(hs_norm_sq(U, grid, s)) for U in st.U]
    profiles = [
        Profile(Field(grid, st.U[j], "frequency"), st.cores[j], np.asarray(scales[j], dtype=float), energies[j], step=j + 1)
        for j in range(J)
    ]
    ledger, trace, steps = [], [], []
    R_prev = st.u
    sweep_prev = st.sweep(R_prev)
    trace.append(_trace_entry(0, sweep_prev, st))
    for j in range(J):
        R_j = R_prev - st.P[j]
        sweep_j = st.sweep(R_j)
        trace.append(_trace_entry(j + 1, sweep_j, st))
        e_in = hs_norm_sq(R_prev, grid, s)
        e_out = hs_norm_sq(R_j, grid, s)
        defect = (e_in - energies[j] - e_out) / np.maximum(e_in, 1e-300)
        ledger.append(
            {
                "step": j + 1,
                "input_energy": e_in,
                "profile_energy": energies[j],
                "remainder_energy": e_out,
                "defect": defect,
                "max_abs_defect": float(np.max(np.abs(defect))),
                "within_tolerance": bool(np.max(np.abs(defect)) <= params.defect_tol),
            }
        )
        steps.append(_step_diagnostics(st, j, R_prev, R_j, sweep_prev))
        R_prev, sweep_prev = R_j, sweep_j
    remainder = SequenceFamily.from_hat(R_prev, grid)
    e_R = hs_norm_sq(R_prev, grid, s)
    pyth = (e_u - sum(energies) - e_R) / np.maximum(e_u, 1e-300)
    recon = sum(st.P, np.zeros_like(st.u)) + R_prev
    recon_err = float(np.sqrt(np.sum(np.abs(recon - st.u) ** 2) / max(np.sum(np.abs(st.u) ** 2), 1e-300)))
    return DecompositionReport(
        profiles=profiles,
        remainder=remainder,
        ledger=ledger,
        strichartz_trace=trace,
        orthogonality=core_orthogonality(profiles, sym.alpha, grid, threshold=params.threshold, dt=2 * params.T / (params.n_t - 1)),
        stopping_reason=reason,
        steps=steps,
        params=asdict(params),
        meta={"symbol": sym.id, "s": s, "grid": grid.to_json(), "n_max": st.n_max, "p_s": st.q, "r": st.r},
        pythagorean={
            "member_energy": e_u,
            "profile_energy_sum": float(sum(energies)),
            "remainder_energy": e_R,
            "defect": pyth,
            "max_abs_defect": float(np.max(np.abs(pyth))),
            "tail_max_abs_defect": float(np.max(np.abs(pyth[st.tail]))),
            "reconstruction_error": recon_err,
        },
    )


def _trace_entry(j: int, sweep: np.ndarray, st: _State) -> dict:
    s_vals = sweep[..., 0]
    lr = np.trapezoid(sweep[..., 1] ** st.r, st.times, axis=-1) ** (1.0 / st.r)
    k = int(np.unravel_index(np.argmax(s_vals), s_vals.shape)[1]) if s_vals.size else 0
    return {
        "step": j,
        "S": float(s_vals.max()),
        "S_interior": bool(0 < k < len(st.times) - 1),
        "Lr": float(lr.max()),
        "Lr_tail_mean": float(lr[st.tail].mean()),
    }


def _step_diagnostics(st: _State, j: int, R_prev: np.ndarray, R_j: np.ndarray, sweep_prev: np.ndarray) -> dict:
    grid, s = st.grid, st.s
    core = st.cores[j]
    tidx = np.searchsorted(st.times, core.times - 1e-9)
    tidx = np.clip(tidx, 0, len(st.times) - 1)
    lp_at_pick = sweep_prev[np.arange(st.n_max), tidx, 0]
    w = _evolve_each(R_prev, core.times, st.sym, grid, sign=-1)
    hs = np.sqrt(hs_norm_sq(w, grid, s))
    gamma = gamma_surrogate(
        SequenceFamily.from_hat(w, grid),
        s,
        st.window_radius,
        st.taper_radius,
        st.params.tail_fraction,
        st.params.top_k,
    )
    lhs = float(lp_at_pick[st.tail].max())
    hs_tail = float(hs[st.tail].max())
    aligned_rem = _aligned(R_j, core, st.sym, grid, st.tail).mean(axis=0)
    U = st.U[j]
    eU = float(hs_norm_sq(U, grid, s))
    corr = abs(complex(hs_inner(aligned_rem, U, grid, s))) / eU if eU > 0 else 0.0
    return {
        "step": j + 1,
        "times": core.times,
        "centers": core.centers,
        "picked_lp": lp_at_pick,
        "gamma": gamma,
        "gerard_lhs": lhs,
        "gerard_hs": hs_tail,
        "gerard_C": gerard_constant(lhs, hs_tail, gamma, st.q),
        "weak_correlation": corr,
        "weak_vanishing": bool(corr <= st.params.corr_tol),
    }


def core_orthogonality(
    profiles: Sequence[Profile],
    alpha: float,
    grid: GridSpec,
    threshold: float = 16.0,
    dt: float = 0.0,
) -> list[dict]:
    """Pairwise divergence statistic of recovered parameters.

    A pair is declared divergent when the statistic reaches ``threshold`` at
    the last index, never decreases over the last half of the indices, and
    grows over that half by at least one grid step.
    """
    out = []
    for a in range(len(profiles)):
        for b in range(a + 1, len(profiles)):
            pa, pb = profiles[a], profiles[b]
            ratio = pa.scale / pb.scale
            stat = (
                ratio
                + 1.0 / ratio
                + np.abs(pa.core.times - pb.core.times) / pa.scale**alpha
                + grid.torus_distance(pa.core.centers, pb.core.centers) / pa.scale
            )
            half = stat[len(stat) // 2 :]
            tol = grid.dx + dt
            growth = float(half[-1] - half[0])
            nondecreasing = bool(np.all(np.diff(half) >= -tol))
            out.append(
                {
                    "pair": [a + 1, b + 1],
                    "statistic": stat,
                    "growth": growth,
                    "divergent": bool(stat[-1] >= threshold and nondecreasing and growth >= grid.dx),
                }
            )
    return out


# --- two-stage driver ---


def full_decompose(
    family: SequenceFamily,
    sym: DispersiveSymbol,
    s: float,
    params: DecomposeParams | None = None,
    scale_params: dict | None = None,
) -> DecompositionReport:
    """Scale stage, then profile extraction inside every scale component.

    Each component's scales are taken relative to its first member (a
    constant factor only relabels the profile). When every component then has
    unit scales, the scale stage is degenerate and the result is exactly
    :func:`decompose` on the input. Otherwise each component is undilated
    member by member (exact for powers of two), decomposed, and its cores are
    mapped back: times by ``h_n^alpha``, centers by ``h_n``. The merged
    report rebuilds the ledger, traces and energy identity on the input family
    with every profile transported by the full profile operator; the
    unclaimed part of the scale stage stays in the remainder.
    """
    from .scales import scale_decompose

    params = params or DecomposeParams()
    params.validate()
    sp = {"J_max": 4, "eps_besov": 1e-6}
    sp.update(scale_params or {})
    srep = scale_decompose(family, **sp)
    scales = [c.scale.normalized() for c in srep.components]
    stage = {
        "J": srep.J,
        "stopping_reason": srep.stopping_reason,
        "scales": [h.to_json() for h in scales],
        "energies": [float(c.energies.sum()) for c in srep.components],
        "pythagorean_max_abs_defect": srep.pythagorean["max_abs_defect"],
    }
    if all(np.all(h.values == 1.0) for h in scales):
        report = decompose(family, sym, s, params)
        report.meta["scale_stage"] = dict(stage, degenerate=True)
        return report

    grid = family.grid
    st = _State(family, sym, s, params)
    e_ref = float(np.max(hs_norm_sq(st.u, grid, s)))
    profiles: list[Profile] = []
    sub_steps: list[dict] = []
    reasons = []
    matvecs = 0
    for c, (comp, h) in enumerate(zip(srep.components, scales)):
        g = comp.family.hat()
        undil = np.stack([dilate_hat(g[n], grid, 1.0 / h.values[n], s) for n in range(len(family))])
        sub = decompose(SequenceFamily.from_hat(undil, grid), sym, s, params, energy_ref=e_ref)
        reasons.append(sub.stopping_reason)
        matvecs += sub.meta.get("polish_matvecs", 0)
        for p, step in zip(sub.profiles, sub.steps):
            core = Core(p.core.times * h.values**sym.alpha, p.core.centers * h.values[:, None])
            profiles.append(Profile(p.U, core, h.values.copy(), p.energy, step=len(profiles) + 1))
            sub_steps.append(dict(step, component=c + 1))
    for p in profiles:
        P = np.stack([p.member_hat(n, sym, s) for n in range(st.n_max)])
        st.cores.append(p.core)
        st.U.append(p.U.hat)
        st.P.append(P)
        st.R = st.R - P
    reason = "budget" if "budget" in reasons else ("stagnation" if "stagnation" in reasons else "threshold")
    report = _merged_report(st, profiles, reason)
    report.steps = sub_steps
    report.meta["scale_stage"] = dict(stage, degenerate=False)
    report.meta["polish_matvecs"] = matvecs
    return report


def _merged_report(st: _State, profiles: list[Profile], reason: str) -> DecompositionReport:
    grid, s, params = st.grid, st.s, st.params
    e_u = hs_norm_sq(st.u, grid, s)
    energies = [p.energy for p in profiles]
    ledger, trace = [], []
    R_prev = st.u
    trace.append(_trace_entry(0, st.sweep(R_prev), st))
    for j, P in enumerate(st.P):
        R_j = R_prev - P
        trace.append(_trace_entry(j + 1, st.sweep(R_j), st))
        e_in = hs_norm_sq(R_prev, grid, s)
        e_out = hs_norm_sq(R_j, grid, s)
        defect = (e_in - energies[j] - e_out) / np.maximum(e_in, 1e-300)
        ledger.append(
            {
                "step": j + 1,
                "input_energy": e_in,
                "profile_energy": energies[j],
                "remainder_energy": e_out,
                "defect": defect,
                "max_abs_defect": float(np.max(np.abs(defect))),
                "within_tolerance": bool(np.max(np.abs(defect)) <= params.defect_tol),
            }
        )
        R_prev = R_j
    e_R = hs_norm_sq(R_prev, grid, s)
    pyth = (e_u - sum(energies) - e_R) / np.maximum(e_u, 1e-300)
    recon = sum(st.P, np.zeros_like(st.u)) + R_prev
    recon_err = float(np.sqrt(np.sum(np.abs(recon - st.u) ** 2) / max(np.sum(np.abs(st.u) ** 2), 1e-300)))
    return DecompositionReport(
        profiles=profiles,
        remainder=SequenceFamily.from_hat(R_prev, grid),
        ledger=ledger,
        strichartz_trace=trace,
        orthogonality=core_orthogonality(
            profiles, st.sym.alpha, grid, threshold=params.threshold, dt=2 * params.T / (params.n_t - 1)
        ),
        stopping_reason=reason,
        params=asdict(params),
        meta={"symbol": st.sym.id, "s": s, "grid": grid.to_json(), "n_max": st.n_max, "p_s": st.q, "r": st.r},
        pythagorean={
            "member_energy": e_u,
            "profile_energy_sum": float(sum(energies)),
            "remainder_energy": e_R,
            "defect": pyth,
            "max_abs_defect": float(np.max(np.abs(pyth))),
            "tail_max_abs_defect": float(np.max(np.abs(pyth[st.tail]))),
            "reconstruction_error": recon_err,
        },
    )
