"""Standalone checks of the structural hypotheses and the auxiliary results.

Every checker recomputes what it needs from fields (norms, propagations,
pairings) and returns a :class:`Verdict` carrying the measured quantities,
traces suitable for CSV export and a pass flag. A flag of ``None`` means the
hypothesis of the checked statement is not met, so nothing is asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .field import (
    Field,
    SequenceFamily,
    get_propagator,
    hs_inner,
    hs_norm_sq,
    ifft,
    lq_norm,
    profile_operator,
    sobolev_norm,
    strichartz_norm,
    translate_hat,
)
from .symbols import AdmissibilityError, DispersiveSymbol, homogeneity_defect, is_admissible, sobolev_exponent

UNITARITY_TOL = 1e-10
HOMOGENEITY_TOL = 1e-10
SQUARE_TOL = 1e-12


class WrapError(ValueError):
    """A schedule reaches past the time (or distance) at which the torus wraps around."""


@dataclass
class Verdict:
    check: str
    passed: bool | None
    measured: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)

    @property
    def applicable(self) -> bool:
        return self.passed is not None

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "passed": self.passed,
            "measured": self.measured,
            "traces": {k: list(v) for k, v in self.traces.items()},
        }


def _fields(battery) -> list[Field]:
    if isinstance(battery, SequenceFamily):
        return list(battery)
    if isinstance(battery, Field):
        return [battery]
    return list(battery)


# --- hypotheses on the symbol ---


def check_unitarity(sym: DispersiveSymbol, battery, s: float, times: Iterable[float], tol: float = UNITARITY_TOL) -> Verdict:
    """Largest relative drift of the H^s norm under the flow, over battery and times."""
    times = [float(t) for t in times]
    drift = 0.0
    per_time = np.zeros(len(times))
    prop = None
    for f in _fields(battery):
        f = f.to_frequency()
        if prop is None:
            prop = get_propagator(sym, f.grid)
            root_w = np.sqrt(f.grid.sobolev_weight(s))
        # the flow commutes with the H^s weight, so propagate the weighted
        # coefficients and read the norm off a plain l^2 sum
        fw = f.samples * root_w
        n0 = math.sqrt(abs(np.vdot(fw, fw)) * f.grid.cell)
        if n0 == 0:
            continue
        state = prop.prepare(fw)
        for k, t in enumerate(times):
            e = prop.evolve(state, t)
            nt = math.sqrt(abs(np.vdot(e, e)) * f.grid.cell)
            per_time[k] = max(per_time[k], abs(nt - n0) / n0)
    drift = float(per_time.max()) if per_time.size else 0.0
    return Verdict(
        "unitarity",
        drift <= tol,
        {"symbol": sym.id, "s": s, "max_drift": drift, "tol": tol},
        {"time": times, "drift": per_time.tolist()},
    )


def check_homogeneity(sym: DispersiveSymbol, n_samples: int = 1000, seed: int = 0, tol: float = HOMOGENEITY_TOL) -> Verdict:
    """``L(lam xi) = lam^alpha L(xi)`` at random frequencies and dilations."""
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(n_samples, sym.d))
    lam = np.exp(rng.uniform(-3, 3, size=n_samples))
    defect = homogeneity_defect(sym, xi, lam)
    return Verdict("homogeneity", defect <= tol, {"symbol": sym.id, "max_defect": defect, "tol": tol})


def check_dirac_square(sym: DispersiveSymbol, n_samples: int = 1000, seed: int = 0, tol: float = SQUARE_TOL) -> Verdict:
    """``L(xi)^2 = |xi|^2 I`` for a Dirac-type symbol, relative to ``|xi|^2``."""
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(n_samples, sym.d))
    L = sym(xi)
    sq = L @ L
    target = np.sum(xi**2, axis=-1)[:, None, None] * np.eye(sym.N)
    err = float(np.max(np.abs(sq - target)) / np.max(np.sum(xi**2, axis=-1)))
    return Verdict("dirac_square", err <= tol, {"symbol": sym.id, "max_error": err, "tol": tol})


# --- Strichartz bound ---


def check_strichartz(
    sym: DispersiveSymbol,
    battery,
    p: float,
    q: float,
    s: float,
    T: float,
    n_t: int = 65,
    stable_tol: float = 0.05,
) -> Verdict:
    """Ratios ``||exp(itL) f||_{L^p_t L^q_x} / ||f||_{H^s}`` on ``[-T, T]`` and ``[-2T, 2T]``.

    Passes when the largest ratio is finite and changes by at most
    ``stable_tol`` (relative) when the window doubles at equal time step.
    Fields with zero H^s norm are skipped.
    """
    if not is_admissible(sym.d, s, sym.alpha, p, q):
        raise AdmissibilityError(f"(p, q) = ({p}, {q}) is not admissible for d={sym.d}, s={s}, alpha={sym.alpha}")
    r1, r2 = [], []
    for f in _fields(battery):
        hs = sobolev_norm(f, s)
        if hs == 0:
            continue
        r1.append(strichartz_norm(f, sym, p, q, T, n_t, s=s) / hs)
        r2.append(strichartz_norm(f, sym, p, q, 2 * T, 2 * n_t - 1, s=s) / hs)
    if not r1:
        return Verdict("strichartz", None, {"symbol": sym.id, "reason": "empty battery"})
    m1, m2 = max(r1), max(r2)
    change = abs(m2 - m1) / m1 if m1 > 0 else 0.0
    ok = bool(math.isfinite(m1) and math.isfinite(m2) and change <= stable_tol)
    return Verdict(
        "strichartz",
        ok,
        {
            "symbol": sym.id,
            "p": p,
            "q": q,
            "s": s,
            "T": T,
            "max_ratio": m1,
            "max_ratio_doubled": m2,
            "relative_change": change,
            "median_ratio": float(np.median(r1)),
        },
        {"ratio": r1, "ratio_doubled": r2},
    )


# --- decay and weak vanishing ---


def wrap_time(sym: DispersiveSymbol, f: Field, rel_tol: float = 1e-12) -> float:
    """``L_box / (4 v)`` with ``v`` the largest group speed over the populated spectrum."""
    v = get_propagator(sym, f.grid).group_speed(f.hat, rel_tol)
    return math.inf if v == 0 else f.grid.L_box / (4 * v)


def geometric_schedule(t_max: float, t0: float = 1.0) -> list[float]:
    """``t0, 2 t0, 4 t0, ...`` up to ``t_max``."""
    out = []
    t = t0
    while t <= t_max * (1 + 1e-12):
        out.append(t)
        t *= 2
    return out


def check_lq_decay(
    sym: DispersiveSymbol,
    f: Field,
    q: float,
    time_schedule: Sequence[float] | None = None,
    drop: float = 0.2,
) -> Verdict:
    """``||exp(itL) f||_{L^q}`` along a geometric schedule below the wrap time.

    Passes when the last value is at most ``drop`` times the value at
    ``t = 0`` and the trace does not increase after its maximum.
    """
    if not 2 < q <= math.inf:
        raise ValueError(f"decay needs 2 < q, got {q}")
    cap = wrap_time(sym, f)
    if time_schedule is None:
        time_schedule = geometric_schedule(cap)
    times = [0.0] + [float(t) for t in time_schedule]
    if max(abs(t) for t in times) > cap:
        raise WrapError(f"schedule reaches t={max(times):g} beyond the wrap cap {cap:g}")
    prop = get_propagator(sym, f.grid)
    state = prop.prepare(f.hat)
    vals = np.array([float(lq_norm(ifft(prop.evolve(state, t), f.grid), f.grid, q)) for t in times])
    ratio = vals / vals[0] if vals[0] > 0 else np.zeros_like(vals)
    k = int(np.argmax(vals))
    after = vals[k:]
    monotone = bool(np.all(np.diff(after) <= 1e-12 * vals[0]))
    ok = bool(ratio[-1] <= drop and monotone)
    return Verdict(
        "lqdecay",
        ok,
        {"symbol": sym.id, "q": q, "wrap_cap": cap, "final_ratio": float(ratio[-1]), "monotone_after_max": monotone},
        {"time": times, "lq": vals.tolist(), "ratio": ratio.tolist()},
    )


def check_weak_vanishing(
    sym: DispersiveSymbol,
    f: Field,
    times: Sequence[float],
    shifts: Sequence,
    tests: Sequence[Field],
    s: float,
    fall: float = 0.1,
) -> Verdict:
    """Pairings ``<exp(i t_n L) f(. + x_n), g>_{H^s}`` along a parameter path.

    The path must move off to infinity (``max(|t_n|, |x_n|)`` nondecreasing
    and growing); otherwise the verdict is not applicable. It must also stay
    below the wrap cap in time and within half the box in space. Passes when
    every trace ends at most ``fall`` times its initial maximum and does not
    trend upward over the last half.
    """
    grid = f.grid
    times = np.asarray(times, dtype=float)
    shifts = np.asarray(shifts, dtype=float).reshape(len(times), grid.d)
    size = np.maximum(np.abs(times), np.max(np.abs(shifts), axis=-1))
    if not (np.all(np.diff(size) >= 0) and size[-1] > size[0]):
        return Verdict("weak", None, {"symbol": sym.id, "reason": "bounded path"})
    cap = wrap_time(sym, f)
    if np.max(np.abs(times)) > cap:
        raise WrapError(f"path reaches t={np.max(np.abs(times)):g} beyond the wrap cap {cap:g}")
    if np.max(np.abs(shifts)) >= grid.L_box / 2:
        raise WrapError("path translates by half the box or more")
    prop = get_propagator(sym, grid)
    traces = np.zeros((len(tests), len(times)))
    for n, (t, x) in enumerate(zip(times, shifts)):
        moved = translate_hat(prop.apply(f.hat, float(t)), grid, -x)
        for k, g in enumerate(tests):
            traces[k, n] = abs(complex(hs_inner(moved, g.hat, grid, s)))
    verdicts = []
    half = len(times) // 2
    idx = np.arange(half, len(times))
    for tr in traces:
        top = tr.max()
        if top == 0:
            verdicts.append(True)
            continue
        falls = tr[-1] <= fall * top
        slope = np.polyfit(idx, tr[idx], 1)[0] if idx.size > 1 else 0.0
        verdicts.append(bool(falls and (slope <= 0 or tr[-1] <= 1e-8 * top)))
    return Verdict(
        "weak",
        bool(all(verdicts)),
        {
            "symbol": sym.id,
            "s": s,
            "final_over_max": [float(tr[-1] / tr.max()) if tr.max() > 0 else 0.0 for tr in traces],
            "per_test": verdicts,
        },
        {"n": list(range(1, len(times) + 1)), **{f"test_{k + 1}": tr.tolist() for k, tr in enumerate(traces)}},
    )


# --- interpolation inequality ---


def gerard_terms(family: SequenceFamily, s: float, tail_fraction: float = 0.5, **gamma_kw) -> dict:
    """Tail-max ``L^{p(s)}`` and H^s norms of the members and the gamma surrogate."""
    from .extraction import gamma_surrogate, tail_indices

    grid = family.grid
    p = float(sobolev_exponent(grid.d, s))
    hat = family.hat()
    tail = tail_indices(hat.shape[0], tail_fraction)
    lhs = float(lq_norm(ifft(hat[tail], grid), grid, p).max())
    hs = float(np.sqrt(hs_norm_sq(hat[tail], grid, s)).max())
    gamma = gamma_surrogate(family, s, tail_fraction=tail_fraction, **gamma_kw)
    return {"p": p, "lhs": lhs, "hs": hs, "gamma": gamma}


def check_gerard(families: Sequence[SequenceFamily], s: float, limit: float = 10.0, names: Sequence[str] | None = None) -> Verdict:
    """Smallest ``C`` with ``lhs <= C hs^{2/p} gamma^{1-2/p}`` on every family.

    Families with vanishing left side impose nothing; a positive left side
    with a vanishing right side makes ``C`` infinite.
    """
    rows = []
    worst = 0.0
    for k, fam in enumerate(families):
        t = gerard_terms(fam, s)
        p = t["p"]
        rhs = t["hs"] ** (2 / p) * t["gamma"] ** (1 - 2 / p)
        if t["lhs"] == 0:
            c = 0.0
        elif rhs == 0:
            c = math.inf
        else:
            c = t["lhs"] / rhs
        worst = max(worst, c)
        rows.append(dict(t, C=c, name=names[k] if names else f"family_{k + 1}"))
    return Verdict(
        "gerard",
        bool(worst <= limit),
        {"s": s, "C": worst, "limit": limit, "families": rows},
        {"C": [r["C"] for r in rows]},
    )


# --- energy identity ---


def check_pythagorean(report, family: SequenceFamily, sym: DispersiveSymbol, s: float, tol: float | None = None) -> Verdict:
    """Recompute the energy identity of a decomposition from raw fields.

    Checks that the recorded profile energies match the profiles, that the
    profiles and the remainder rebuild the input (relative L^2 error at most
    1e-8), and that ``max_n |E(u_n) - sum_j E(U^j) - E(R_n)| / E(u_n)``
    is within ``tol`` (default: the report's declared defect tolerance).
    """
    grid = family.grid
    if tol is None:
        tol = float(report.params.get("defect_tol", 5e-2)) if getattr(report, "params", None) else 5e-2
    u = family.hat()
    R = report.remainder.hat()
    e_u = hs_norm_sq(u, grid, s)
    e_R = hs_norm_sq(R, grid, s)
    recon = R.copy()
    energy_mismatch = 0.0
    e_profiles = 0.0
    for prof in report.profiles:
        e = sobolev_norm(prof.U, s) ** 2
        e_profiles += e
        energy_mismatch = max(energy_mismatch, abs(e - prof.energy) / max(e, 1e-300))
        for n in range(u.shape[0]):
            recon[n] += profile_operator(prof.U, float(prof.scale[n]), prof.core.centers[n], float(prof.core.times[n]), sym, s).hat
    defect = (e_u - e_profiles - e_R) / np.maximum(e_u, 1e-300)
    recon_err = float(np.sqrt(np.sum(np.abs(recon - u) ** 2) / max(np.sum(np.abs(u) ** 2), 1e-300)))
    max_defect = float(np.max(np.abs(defect))) if defect.size else 0.0
    ok = bool(max_defect <= tol and energy_mismatch <= 1e-8 and recon_err <= 1e-8)
    return Verdict(
        "pythagorean",
        ok,
        {
            "J": len(report.profiles),
            "max_abs_defect": max_defect,
            "tol": tol,
            "energy_mismatch": energy_mismatch,
            "reconstruction_error": recon_err,
        },
        {"n": list(range(1, u.shape[0] + 1)), "defect": defect.tolist()},
    )


# --- default batteries ---


def random_battery(grid, N: int, count: int, seed: int = 0, width: float | None = None) -> list[Field]:
    """Smooth random fields: complex gaussian spectra under a gaussian envelope, unit L^2 norm."""
    rng = np.random.default_rng(seed)
    sigma = width if width is not None else grid.nyquist / 4
    env = np.exp(-(grid.xi_abs**2) / (2 * sigma**2))
    out = []
    for _ in range(count):
        spec = (rng.normal(size=(N,) + grid.shape) + 1j * rng.normal(size=(N,) + grid.shape)) * env
        spec /= math.sqrt(grid.cell * np.sum(np.abs(spec) ** 2))
        out.append(Field(grid, spec, "frequency"))
    return out


def smooth_bump(grid, N: int = 1, width: float | None = None) -> Field:
    """Centered gaussian of width ``max(4 dx, L/32)`` in the first component."""
    w = width if width is not None else max(4 * grid.dx, grid.L_box / 32)
    arr = np.zeros((N,) + grid.shape, dtype=complex)
    arr[0] = np.exp(-(grid.x_abs**2) / (2 * w * w))
    return Field(grid, arr, "physical")


def default_decay_exponent(sym: DispersiveSymbol, d: int) -> float:
    """``q`` solving ``alpha/4 + d/q = d/2 - s`` at ``s = max(0, (d - alpha)/2)``.

    The scaling relation is solved directly because ``s = 0`` (allowed here,
    the decay statement needs no Sobolev embedding) is outside the index range
    of :func:`admissible_exponents`.
    """
    s = max(0.0, (d - float(sym.alpha)) / 2)
    rhs = d / 2 - s - float(sym.alpha) / 4
    if rhs < 0:
        raise AdmissibilityError(f"no decay exponent with p = 4 for d={d}, alpha={sym.alpha}")
    return math.inf if rhs == 0 else d / rhs


def default_path(sym: DispersiveSymbol, f: Field, kind: str, n_max: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Translation path up to 0.45 L along the first axis, or a time path up to the wrap cap."""
    g = f.grid
    n = np.arange(n_max)
    shifts = np.zeros((n_max, g.d))
    times = np.zeros(n_max)
    if kind == "translation":
        shifts[:, 0] = 0.45 * g.L_box * n / (n_max - 1)
    elif kind == "time":
        times = wrap_time(sym, f) * n / (n_max - 1)
    else:
        raise ValueError(f"path kind must be 'translation' or 'time', got {kind!r}")
    return times, shifts


def test_battery(grid, N: int = 1) -> list[Field]:
    """Localized test fields at the origin: gaussians of widths ``b, 2b, 4b`` with ``b = max(dx, L/64)``."""
    out = []
    base = max(grid.dx, grid.L_box / 64)
    for w in (base, 2 * base, 4 * base):
        arr = np.zeros((N,) + grid.shape, dtype=complex)
        arr[:] = np.exp(-(grid.x_abs**2) / (2 * w * w))
        out.append(Field(grid, arr, "physical"))
    return out


def standard_gerard_battery(grid, s: float, seed: int = 0, n_max: int = 16, N: int = 1) -> tuple[list[SequenceFamily], list[str]]:
    """Planted profiles, a spreading family and noise, each normalized to unit H^s energy.

    * ``single``: one static Ricker profile;
    * ``pair``: a static profile plus a second one translating away;
    * ``spreading``: modulated gaussians whose frequency grows geometrically up to half the Nyquist frequency;
    * ``noise``: independent white H^s noise.
    """
    from .synthesis import make_shape, white_hs_noise

    rng = np.random.default_rng(seed)
    w = max(2.0, 3 * grid.dx)
    U = make_shape(grid, {"kind": "ricker", "width": w, "energy": 1.0}, N, s).hat
    V = make_shape(grid, {"kind": "ricker", "width": w, "energy": 0.5}, N, s).hat
    single = SequenceFamily.from_hat(np.stack([U] * n_max), grid)
    step = max(grid.dx, 0.35 * grid.L_box / n_max)
    shift = np.zeros((n_max, grid.d))
    shift[:, 0] = 4 * w + step * np.arange(n_max)
    pair = SequenceFamily.from_hat(np.stack([U + translate_hat(V, grid, shift[n]) for n in range(n_max)]), grid)
    xi0 = 2.0 / w
    top = 0.5 * grid.nyquist
    growth = (top / xi0) ** (1.0 / max(n_max - 1, 1))
    spread = []
    for n in range(n_max):
        f = make_shape(grid, {"kind": "modulated_gaussian", "width": 2 * w, "xi0": xi0 * growth**n, "energy": 1.0}, N, s)
        spread.append(f.hat)
    spreading = SequenceFamily.from_hat(np.stack(spread), grid)
    noise = SequenceFamily.from_hat(np.stack([white_hs_noise(grid, N, s, 1.0, rng) for _ in range(n_max)]), grid)
    return [single, pair, spreading, noise], ["single", "pair", "spreading", "noise"]
