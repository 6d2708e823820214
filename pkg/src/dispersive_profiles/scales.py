"""Dyadic scale analysis of a finite family.

A family is h-oscillatory when its frequency mass sits in the band
``1/R <= h_n |xi| <= R`` for large ``R``, and h-singular when every fixed band
``a <= h_n |xi| <= b`` empties as ``n`` grows. Both notions are asymptotic;
here they are read off tail statistics over the available members and a short
schedule of band widths.

The scale stage of the decomposition splits a family into scale-pure
components by sharp projections onto unions of dyadic annuli. Because the
projections are disjoint, the L^2 energies add up exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .field import SequenceFamily, annulus_masses, besov_sup_norm

R_SCHEDULE = (2, 4, 8, 16)
ORTHOGONALITY_THRESHOLD = 16.0


class ScaleError(ValueError):
    pass


@dataclass(frozen=True)
class ScaleSequence:
    """Positive scales ``h_n``, one per member."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ScaleError("empty scale sequence")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ScaleError("scales must be finite and strictly positive")
        object.__setattr__(self, "values", v)

    @classmethod
    def ones(cls, n: int) -> "ScaleSequence":
        return cls(np.ones(n))

    @classmethod
    def dyadic(cls, exponents) -> "ScaleSequence":
        """``h_n = 2^{k_n}``."""
        return cls(np.ldexp(1.0, np.asarray(exponents, dtype=int)))

    def __len__(self) -> int:
        return self.values.size

    @property
    def exponents(self) -> np.ndarray | None:
        """Integer ``k_n`` with ``h_n = 2^{k_n}``, or None if some scale is not a power of two."""
        m, e = np.frexp(self.values)
        if np.any(m != 0.5):
            return None
        return e - 1

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def normalized(self) -> "ScaleSequence":
        """Scales relative to the first member, so that a constant sequence becomes all ones."""
        return ScaleSequence(self.values / self.values[0])

    def to_json(self) -> list:
        return [float(v) for v in self.values]


@dataclass
class DyadicProfile:
    """L^2 mass of every member on each dyadic annulus ``2^j <= |xi| < 2^(j+1)``."""

    masses: np.ndarray  # (n, n_annuli)
    j_min: int

    @property
    def annuli(self) -> np.ndarray:
        return self.j_min + np.arange(self.masses.shape[-1])

    @property
    def totals(self) -> np.ndarray:
        return self.masses.sum(axis=-1)

    def to_json(self) -> dict:
        return {"j_min": self.j_min, "masses": self.masses.tolist()}


def dyadic_profile(family: SequenceFamily, s: float = 0.0) -> DyadicProfile:
    """Exact annulus masses by summation over frequency samples (zero mode excluded)."""
    return DyadicProfile(annulus_masses(family.hat(), family.grid, s), family.grid.j_range[0])


def _check_scales(family: SequenceFamily, h: ScaleSequence) -> np.ndarray:
    if not isinstance(h, ScaleSequence):
        h = ScaleSequence(h)
    if len(h) != len(family):
        raise ScaleError(f"scale sequence has {len(h)} entries for {len(family)} members")
    return h.values


def _radial_density(family: SequenceFamily) -> np.ndarray:
    fh = family.hat()
    g = family.grid
    return g.cell * np.sum(fh.real**2 + fh.imag**2, axis=1)


def oscillatory_defect(family: SequenceFamily, h, R: float) -> float:
    """Largest fraction of a member's (mean-zero) L^2 mass outside ``1/R <= h_n|xi| <= R``.

    Members without mass contribute zero.
    """
    if R <= 1:
        raise ScaleError("R must exceed 1")
    hv = _check_scales(family, h)
    dens = _radial_density(family)
    xi = family.grid.xi_abs
    nz = xi > 0
    worst = 0.0
    for n in range(len(family)):
        total = float(dens[n][nz].sum())
        if total <= 0:
            continue
        k = hv[n] * xi
        inside = nz & (k >= 1.0 / R) & (k <= R)
        worst = max(worst, 1.0 - float(dens[n][inside].sum()) / total)
    return max(worst, 0.0)


def oscillatory_trace(family: SequenceFamily, h, schedule=R_SCHEDULE) -> list[float]:
    return [oscillatory_defect(family, h, R) for R in schedule]


def is_oscillatory(family: SequenceFamily, h, eps: float, schedule=R_SCHEDULE) -> bool:
    """True when the defect falls below ``eps`` by the end of the R-schedule."""
    return oscillatory_trace(family, h, schedule)[-1] <= eps


def singular_band_mass(family: SequenceFamily, h, a: float, b: float) -> np.ndarray:
    """Per-member squared L^2 mass in the band ``a <= h_n|xi| <= b``."""
    if not 0 < a < b:
        raise ScaleError("need 0 < a < b")
    hv = _check_scales(family, h)
    dens = _radial_density(family)
    xi = family.grid.xi_abs
    out = np.empty(len(family))
    for n in range(len(family)):
        k = hv[n] * xi
        out[n] = dens[n][(k >= a) & (k <= b)].sum()
    return out


def singularity_report(family: SequenceFamily, h, a: float, b: float, eps: float = 1e-3) -> dict:
    """Band-mass trend: per-member masses, least-squares slope over n, and the final verdict.

    The family is declared h-singular for the band when the last member keeps
    less than ``eps`` of its squared L^2 norm there.
    """
    mass = singular_band_mass(family, h, a, b)
    norms = np.sum(_radial_density(family).reshape(len(family), -1), axis=-1)
    n = np.arange(1, len(family) + 1)
    slope = float(np.polyfit(n, mass, 1)[0]) if len(family) > 1 else 0.0
    final = float(mass[-1])
    return {
        "mass": mass.tolist(),
        "slope": slope,
        "final": final,
        "singular": bool(final <= eps * float(norms[-1])),
    }


@dataclass
class ScaleOrthogonality:
    statistic: float
    orthogonal: bool
    ratios: np.ndarray

    def to_json(self) -> dict:
        return {
            "statistic": self.statistic,
            "orthogonal": self.orthogonal,
            "ratios": self.ratios.tolist(),
        }


def _tail_start(n: int, fraction: float) -> int:
    return n - max(1, math.ceil(fraction * n))


def scales_orthogonal(h, h_tilde, threshold: float = ORTHOGONALITY_THRESHOLD) -> ScaleOrthogonality:
    """Divergence of ``max(h_n/h~_n, h~_n/h_n)``.

    The statistic is the minimum of the ratio over the last quarter of indices;
    the pair is orthogonal when it exceeds ``threshold`` and the ratio never
    decreases over the last half.
    """
    a = ScaleSequence(h).values if not isinstance(h, ScaleSequence) else h.values
    b = ScaleSequence(h_tilde).values if not isinstance(h_tilde, ScaleSequence) else h_tilde.values
    if a.size != b.size:
        raise ScaleError("scale sequences differ in length")
    ratio = np.maximum(a / b, b / a)
    stat = float(ratio[_tail_start(ratio.size, 0.25) :].min())
    half = ratio[_tail_start(ratio.size, 0.5) :]
    monotone = bool(np.all(np.diff(half) >= -1e-12 * half[:-1]))
    return ScaleOrthogonality(stat, bool(stat > threshold and monotone), ratio)


# --- scale stage ---


@dataclass
class ScaleComponent:
    scale: ScaleSequence
    family: SequenceFamily
    bands: np.ndarray  # (n, n_annuli) boolean, annuli owned by this component
    energies: np.ndarray  # per-member squared L^2 norm
    R: int
    capture_defect: float
    oscillatory_defect: float
    tracking: bool

    def to_json(self) -> dict:
        return {
            "scale": self.scale.to_json(),
            "energies": self.energies.tolist(),
            "energy": float(self.energies.sum()),
            "R": self.R,
            "capture_defect": self.capture_defect,
            "oscillatory_defect": self.oscillatory_defect,
            "tracking": self.tracking,
        }


@dataclass
class ScaleReport:
    components: list[ScaleComponent]
    remainder: SequenceFamily
    besov_trace: list[float]
    stopping_reason: str
    pythagorean: dict
    orthogonality: list[dict] = field(default_factory=list)
    singularity: list[dict] = field(default_factory=list)

    @property
    def J(self) -> int:
        return len(self.components)

    def pairs(self) -> list[tuple[ScaleSequence, SequenceFamily]]:
        return [(c.scale, c.family) for c in self.components]

    def energy_fractions(self) -> list[float]:
        total = sum(float(c.energies.sum()) for c in self.components)
        total += float(np.sum(self.pythagorean["remainder_energy"]))
        return [float(c.energies.sum()) / total for c in self.components] if total > 0 else []

    def to_json(self) -> dict:
        return {
            "J": self.J,
            "components": [c.to_json() for c in self.components],
            "energy_fractions": self.energy_fractions(),
            "besov_trace": list(self.besov_trace),
            "stopping_reason": self.stopping_reason,
            "pythagorean": self.pythagorean,
            "orthogonality": self.orthogonality,
            "singularity": self.singularity,
        }


def _quantized_argmax(vals: np.ndarray) -> int:
    top = np.max(vals)
    if top <= 0:
        return 0
    return int(np.argmax(np.round(vals / top * 1e10)))


def _track(masses: np.ndarray, free: np.ndarray, start: int) -> np.ndarray:
    """Per-member peak annulus, followed backwards from the last member one step at a time."""
    n, nj = masses.shape
    c = np.empty(n, dtype=int)
    prev = start
    for i in range(n - 1, -1, -1):
        lo, hi = max(prev - 1, 0), min(prev + 1, nj - 1)
        cand = np.where(free[i, lo : hi + 1], masses[i, lo : hi + 1], -1.0)
        prev = lo + _quantized_argmax(cand)
        c[i] = prev
    return c


def _hill(row: np.ndarray, free: np.ndarray, c: int) -> tuple[int, int]:
    """Annuli around ``c`` over which the mass descends monotonically (valley clipping)."""
    lo = c
    while lo - 1 >= 0 and free[lo - 1] and row[lo - 1] <= row[lo]:
        lo -= 1
    hi = c
    while hi + 1 < row.size and free[hi + 1] and row[hi + 1] <= row[hi]:
        hi += 1
    return lo, hi


def scale_decompose(
    family: SequenceFamily,
    J_max: int = 4,
    eps_besov: float = 1e-6,
    eps_osc: float | None = None,
    min_energy: float = 0.0,
    tail_fraction: float = 0.5,
    schedule=R_SCHEDULE,
    threshold: float = ORTHOGONALITY_THRESHOLD,
) -> ScaleReport:
    """Greedy split of ``family`` into scale-pure components.

    Each round scores every annulus by the tail minimum over members of the
    free mass in the three annuli around it and keeps the best. The per-member
    peak is then tracked from the last member backwards; a constant peak gives
    a constant scale, a drifting one a scale that follows it, with
    ``h_n = 2^{-c_n}`` for peak annulus ``c_n``. The component takes, per
    member, the descending hill of free mass around the peak, clipped to
    ``1/R <= h_n|xi| <= R`` for the first ``R`` in ``schedule`` that loses at
    most ``eps_osc`` of the hill (the largest ``R`` otherwise). A lost mass
    fraction ``eps`` leaves a Besov amplitude of about ``sqrt(eps)``, so
    ``eps_osc`` defaults to ``(eps_besov / 10)**2``.

    The loop stops when the remainder's Besov sup-norm is at most
    ``eps_besov`` times the largest member L^2 norm (``threshold``), when the
    best tail score falls below ``min_energy`` (``threshold``), or after
    ``J_max`` components (``budget``).
    """
    if eps_osc is None:
        eps_osc = (0.1 * eps_besov) ** 2
    grid = family.grid
    fh = family.hat()
    n = len(family)
    prof = dyadic_profile(family)
    masses = prof.masses
    nj = masses.shape[1]
    free = np.ones_like(masses, dtype=bool)
    idx = (grid.annulus_index - prof.j_min).ravel()
    norms = np.sqrt(np.sum(_radial_density(family).reshape(n, -1), axis=-1))
    scale_ref = float(norms.max()) if n else 0.0
    tail = _tail_start(n, tail_fraction)

    def besov(mask):
        rem = np.where(mask, masses, 0.0)
        return float(np.sqrt(rem.max())) if rem.size else 0.0

    components: list[ScaleComponent] = []
    trace = [besov(free)]
    reason = "budget"
    while True:
        if trace[-1] <= eps_besov * scale_ref:
            reason = "threshold"
            break
        if len(components) >= J_max:
            reason = "budget"
            break
        avail = np.where(free, masses, 0.0)
        padded = np.pad(avail, ((0, 0), (1, 1)))
        band = padded[:, :-2] + padded[:, 1:-1] + padded[:, 2:]
        score = band[tail:].min(axis=0)
        j_star = _quantized_argmax(score)
        if score[j_star] <= min_energy or score[j_star] <= 0:
            reason = "threshold"
            break
        lo, hi = max(j_star - 1, 0), min(j_star + 1, nj - 1)
        last = np.where(free[-1, lo : hi + 1], avail[-1, lo : hi + 1], -1.0)
        c = _track(avail, free, lo + _quantized_argmax(last))
        hills = [_hill(avail[i], free[i], c[i]) for i in range(n)]

        chosen = None
        for R in schedule:
            k = int(round(math.log2(R)))
            bands = np.zeros_like(free)
            lost = 0.0
            for i, (a, b) in enumerate(hills):
                a2, b2 = max(a, c[i] - k), min(b, c[i] + k - 1)
                bands[i, a2 : b2 + 1] = True
                hill_mass = avail[i, a : b + 1].sum()
                if hill_mass > 0:
                    lost = max(lost, 1.0 - avail[i, a2 : b2 + 1].sum() / hill_mass)
            chosen = (R, bands, max(lost, 0.0))
            if lost <= eps_osc:
                break
        R, bands, lost = chosen
        bands &= free
        free &= ~bands

        mask = np.zeros((n, idx.size), dtype=bool)
        valid = idx >= 0
        for i in range(n):
            mask[i, valid] = bands[i][idx[valid]]
        mask = mask.reshape((n, 1) + grid.shape)
        comp_hat = np.where(mask, fh, 0.0)
        comp = SequenceFamily.from_hat(comp_hat, grid)
        # peak annulus j covers 2^j <= |xi| < 2^(j+1), so h = 2^-j puts it at h|xi| in [1, 2)
        h = ScaleSequence.dyadic(-(c + prof.j_min))
        components.append(
            ScaleComponent(
                scale=h,
                family=comp,
                bands=bands,
                energies=np.where(bands, masses, 0.0).sum(axis=1),
                R=int(R),
                capture_defect=float(lost),
                oscillatory_defect=oscillatory_defect(comp, h, R),
                tracking=not h.is_constant,
            )
        )
        trace.append(besov(free))

    used = np.zeros((n, idx.size), dtype=bool)
    for comp in components:
        valid = idx >= 0
        for i in range(n):
            used[i, valid] |= comp.bands[i][idx[valid]]
    used = used.reshape((n, 1) + grid.shape)
    remainder = SequenceFamily.from_hat(np.where(used, 0.0, fh), grid)

    def l2(hat):
        return grid.cell * np.sum((hat.real**2 + hat.imag**2).reshape(hat.shape[0], -1), axis=-1)

    total = l2(fh)
    rem_e = l2(remainder.hat())
    comp_e = sum((l2(c.family.hat()) for c in components), np.zeros(n))
    safe = np.where(total > 0, total, 1.0)
    defect = (total - comp_e - rem_e) / safe
    pyth = {
        "total_energy": total.tolist(),
        "remainder_energy": rem_e.tolist(),
        "defect": defect.tolist(),
        "max_abs_defect": float(np.abs(defect).max()) if n else 0.0,
    }
    orth = []
    for a in range(len(components)):
        for b in range(a + 1, len(components)):
            o = scales_orthogonal(components[a].scale, components[b].scale, threshold)
            orth.append({"pair": [a + 1, b + 1], **o.to_json()})
    sing = []
    for j, comp in enumerate(components):
        rep = singularity_report(remainder, comp.scale, 0.5, 2.0, eps=1e-3)
        sing.append({"component": j + 1, **rep})
    return ScaleReport(components, remainder, trace, reason, pyth, orth, sing)


def remainder_besov(family: SequenceFamily) -> float:
    """Largest Besov sup-norm over members."""
    return max((besov_sup_norm(f) for f in family), default=0.0)
