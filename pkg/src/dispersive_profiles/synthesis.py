"""Ground-truth families built from the profile ansatz plus controlled noise.

Every member is an exact finite sum

    u_n = sum_j profile_operator(U^j, h^j_n, x^j_n, t^j_n) + noise_n

and the accompanying ledger records every planted parameter so that an
extraction run can be scored against the truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .field import (
    Field,
    GridSpec,
    SequenceFamily,
    hs_norm_sq,
    profile_operator,
    time_grid,
    time_sweep,
)
from .symbols import DispersiveSymbol, sobolev_exponent

DIVERGENCE_THRESHOLD = 16.0


class PlantError(ValueError):
    """A plant specification cannot be realized on the grid."""


# --- shapes ---


def make_shape(grid: GridSpec, shape: dict, N: int = 1, s: float | None = None) -> Field:
    """Named profile shape centered at the origin.

    ``shape`` is a dict with ``kind`` in {gaussian, ricker, bump, modulated_gaussian}
    plus ``width`` and, for the modulated kind, ``xi0`` (scalar along the first
    axis, or a d-vector). Vector-valued shapes use ``polarization`` (defaults
    to the first basis vector). With ``energy`` and ``s`` set, the shape is
    rescaled to that squared H^s norm.
    """
    kind = shape.get("kind", "gaussian")
    width = float(shape.get("width", 2.0))
    if width <= 0:
        raise PlantError(f"shape width must be positive, got {width}")
    r2 = np.sum(grid.x**2, axis=-1)
    if kind == "gaussian":
        base = np.exp(-r2 / (2 * width**2)).astype(complex)
    elif kind == "modulated_gaussian":
        xi0 = np.zeros(grid.d)
        raw = np.atleast_1d(np.asarray(shape.get("xi0", 1.0), dtype=float))
        if raw.size == 1:
            xi0[0] = raw[0]
        elif raw.size == grid.d:
            xi0 = raw
        else:
            raise PlantError(f"xi0 must be a scalar or a {grid.d}-vector")
        base = np.exp(-r2 / (2 * width**2)) * np.exp(1j * grid.x @ xi0)
    elif kind == "ricker":
        # minus the scaled Laplacian of the gaussian: real, radial, and its
        # spectrum vanishes to second order at the origin
        base = ((grid.d - r2 / width**2) * np.exp(-r2 / (2 * width**2))).astype(complex)
    elif kind == "bump":
        rho = r2 / width**2
        inside = rho < 1
        base = np.zeros(grid.shape, dtype=complex)
        base[inside] = np.exp(1.0 - 1.0 / (1.0 - rho[inside]))
    else:
        raise PlantError(f"unknown shape kind {kind!r}")
    pol = np.asarray(shape.get("polarization", np.eye(N)[0]), dtype=complex)
    if pol.shape != (N,):
        raise PlantError(f"polarization needs {N} entries, got shape {pol.shape}")
    pol = pol / np.linalg.norm(pol)
    samples = pol.reshape((N,) + (1,) * grid.d) * base
    f = Field(grid, samples)
    energy = shape.get("energy")
    if energy is not None:
        if s is None:
            raise PlantError("energy normalization needs the Sobolev index s")
        e0 = float(hs_norm_sq(f.hat, grid, s))
        f = f * math.sqrt(float(energy) / e0)
    return f


# --- parameter laws ---


@dataclass
class ProfileLaw:
    """Per-n scale, time and center of one planted profile."""

    scale: np.ndarray
    times: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        self.scale = np.asarray(self.scale, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        n = self.scale.shape[0]
        if self.times.shape != (n,) or self.centers.shape[0] != n:
            raise PlantError("scale, time and center laws must have equal lengths")
        if np.any(self.scale <= 0) or not np.all(np.isfinite(self.scale)):
            raise PlantError("scales must be positive and finite")

    @classmethod
    def static(cls, n_max: int, d: int, x=None, t: float = 0.0, h: float = 1.0) -> "ProfileLaw":
        x = np.zeros(d) if x is None else np.asarray(x, dtype=float)
        return cls(np.full(n_max, h), np.full(n_max, t), np.tile(x, (n_max, 1)))

    def to_json(self) -> dict:
        return {
            "scale": self.scale.tolist(),
            "times": self.times.tolist(),
            "centers": self.centers.tolist(),
        }


def divergence_statistic(a: ProfileLaw, b: ProfileLaw, alpha: float, grid: GridSpec | None = None) -> np.ndarray:
    """Per-n value of ``h/h' + h'/h + |t - t'|/h^alpha + |x - x'|/h``.

    ``h`` is the scale of ``a``. Distances are taken on the torus when a grid
    is supplied.
    """
    ratio = a.scale / b.scale
    dt = np.abs(a.times - b.times) / a.scale**alpha
    if grid is None:
        dx = np.sqrt(np.sum((a.centers - b.centers) ** 2, axis=-1))
    else:
        dx = grid.torus_distance(a.centers, b.centers)
    return ratio + 1.0 / ratio + dt + dx / a.scale


def _snap(v, step: float) -> float:
    return float(np.round(np.asarray(v) / step) * step)


def orthogonal_laws(
    J: int,
    n_max: int,
    kind: str,
    grid: GridSpec,
    width: float = 2.0,
    dt: float = 0.25,
    sep: float | None = None,
    step: float | None = None,
    tau: float | None = None,
) -> list[ProfileLaw]:
    """Parameter laws whose pairwise divergence statistic grows with n.

    ``space_divergent`` places profile j at ``(j-1) * n * step`` along the
    first axis (``step`` defaults to ``4 * width``); ``time_divergent`` uses
    ``t = (j-1) * n * tau``; ``scale_divergent`` uses ``h = 2^{-(j-1) floor(n/4)}``.
    ``mixed`` (J <= 4) combines a static profile, one drifting away from
    ``+sep`` by ``step`` per index (default one grid step), one parked at
    ``-sep`` with time ``n * tau`` and one that shrinks in scale. The default
    ``sep`` keeps all pairwise distances below half the box. Centers are snapped to the grid and times to the time
    step ``dt``.
    """
    if J < 1:
        raise PlantError(f"need J >= 1, got {J}")
    d = grid.d
    n = np.arange(1, n_max + 1)
    drift = grid.dx if step is None else step
    step = 4 * width if step is None else step
    tau = dt if tau is None else tau
    tau = max(dt, _snap(tau, dt)) if dt > 0 else tau
    margin = grid.L_box / 2 - 4 * width
    e1 = np.zeros(d)
    e1[0] = 1.0

    def centers_along(offsets):
        return np.outer([_snap(o, grid.dx) for o in offsets], e1)

    laws = []
    if kind == "space_divergent":
        for j in range(J):
            laws.append(ProfileLaw(np.ones(n_max), np.zeros(n_max), centers_along(j * n * step)))
    elif kind == "time_divergent":
        for j in range(J):
            laws.append(ProfileLaw(np.ones(n_max), j * n * tau, np.zeros((n_max, d))))
    elif kind == "scale_divergent":
        for j in range(J):
            laws.append(ProfileLaw(2.0 ** (-j * (n // 4)), np.zeros(n_max), np.zeros((n_max, d))))
    elif kind == "mixed":
        if J > 4:
            raise PlantError("the mixed construction supports at most J = 4 profiles")
        if sep is None:
            # keep the drifting and parked profiles within half a box of each other
            sep = _snap((grid.L_box / 2 - n_max * drift) / 2 - width, grid.dx)
        laws.append(ProfileLaw.static(n_max, d))
        if J > 1:
            laws.append(ProfileLaw(np.ones(n_max), np.zeros(n_max), centers_along(sep + n * drift)))
        if J > 2:
            laws.append(ProfileLaw(np.ones(n_max), n * tau, centers_along(np.full(n_max, -sep))))
        if J > 3:
            laws.append(ProfileLaw(2.0 ** (-(n // 4)), np.zeros(n_max), np.zeros((n_max, d))))
    else:
        raise PlantError(f"unknown law kind {kind!r}")
    for a in range(len(laws)):
        for b in range(a + 1, len(laws)):
            gap = np.sqrt(np.sum((laws[a].centers - laws[b].centers) ** 2, axis=-1))
            if np.max(gap) > grid.L_box / 2:
                raise PlantError(
                    f"profiles {a} and {b} drift {np.max(gap):.3g} apart, more than half the box; "
                    "divergence would be ambiguous on the torus"
                )
    for law in laws:
        if np.max(np.abs(law.centers)) > margin:
            raise PlantError(
                f"J={J} {kind} laws need centers up to {np.max(np.abs(law.centers)):.3g}, "
                f"beyond the box margin {margin:.3g}"
            )
    return laws


# --- plant ---


@dataclass
class PlantedProfile:
    shape: dict | Field
    law: ProfileLaw
    amplitude: float = 1.0


@dataclass
class PlantSpec:
    """Planted profiles, white H^s noise and the run size."""

    grid: GridSpec
    profiles: list[PlantedProfile] = field(default_factory=list)
    n_max: int = 16
    noise_level: float = 0.0
    seed: int = 0
    require_orthogonal: bool = False
    threshold: float = DIVERGENCE_THRESHOLD
    T: float = 8.0
    n_t: int = 65

    @classmethod
    def from_json(cls, obj: dict) -> "PlantSpec":
        """Build from a JSON-style dict (the ``synthesize`` CLI input)."""
        g = obj.get("grid", {})
        d = int(obj.get("d", g.get("d", 1)))
        grid = GridSpec.default(d)
        grid = GridSpec(d, int(g.get("M", grid.M)), float(g.get("L_box", grid.L_box)))
        n_max = int(obj.get("n_max", 16))
        profiles = []
        laws_cfg = obj.get("laws")
        if laws_cfg is not None:
            width = float(obj.get("profiles", [{}])[0].get("width", 2.0)) if obj.get("profiles") else 2.0
            laws = orthogonal_laws(
                len(obj["profiles"]),
                n_max,
                laws_cfg.get("kind", "mixed"),
                grid,
                width=float(laws_cfg.get("width", width)),
                dt=float(laws_cfg.get("dt", 2 * float(obj.get("T", 8.0)) / (int(obj.get("n_t", 65)) - 1))),
                sep=laws_cfg.get("sep"),
                step=laws_cfg.get("step"),
                tau=laws_cfg.get("tau"),
            )
        for j, p in enumerate(obj.get("profiles", [])):
            if laws_cfg is not None:
                law = laws[j]
            else:
                law = ProfileLaw(
                    p.get("scale", [1.0] * n_max),
                    p.get("times", [0.0] * n_max),
                    p.get("centers", [[0.0] * d] * n_max),
                )
            shape = {k: v for k, v in p.items() if k not in ("scale", "times", "centers", "amplitude")}
            profiles.append(PlantedProfile(shape, law, float(p.get("amplitude", 1.0))))
        noise = obj.get("noise", {})
        return cls(
            grid=grid,
            profiles=profiles,
            n_max=n_max,
            noise_level=float(noise.get("level", 0.0)),
            seed=int(obj.get("seed", 0)),
            require_orthogonal=bool(obj.get("orthogonal", False)),
            threshold=float(obj.get("threshold", DIVERGENCE_THRESHOLD)),
            T=float(obj.get("T", 8.0)),
            n_t=int(obj.get("n_t", 65)),
        )


def white_hs_noise(grid: GridSpec, N: int, s: float, level: float, rng: np.random.Generator) -> np.ndarray:
    """Frequency coefficients with amplitude ``|xi|^{-s}`` times complex gaussians,
    scaled to H^s norm ``level`` exactly; the zero mode is left empty."""
    z = rng.standard_normal((N,) + grid.shape) + 1j * rng.standard_normal((N,) + grid.shape)
    w = np.zeros(grid.shape)
    nz = grid.xi_abs > 0
    w[nz] = grid.xi_abs[nz] ** (-s)
    noise = z * w
    norm = math.sqrt(float(hs_norm_sq(noise, grid, s)))
    return noise * (level / norm) if level > 0 else np.zeros_like(noise)


def s_surrogate(fhat: np.ndarray, sym: DispersiveSymbol, grid: GridSpec, s: float, T: float, n_t: int) -> float:
    """Max over members and sampled times of ``||exp(itL) f||_{L^{p(s)}}``."""
    q = float(sobolev_exponent(grid.d, s))
    vals = time_sweep(fhat, sym, grid, time_grid(T, n_t), [q])
    return float(vals.max()) if vals.size else 0.0


def plant(spec: PlantSpec, sym: DispersiveSymbol, s: float) -> tuple[SequenceFamily, dict]:
    """Realize ``spec`` as a family and return it with its ground-truth ledger."""
    grid = spec.grid
    n_max = spec.n_max
    if spec.require_orthogonal:
        for a in range(len(spec.profiles)):
            for b in range(a + 1, len(spec.profiles)):
                stat = divergence_statistic(spec.profiles[a].law, spec.profiles[b].law, sym.alpha, grid)
                if stat[-1] < spec.threshold:
                    raise PlantError(
                        f"profiles {a} and {b} reach divergence {stat[-1]:.3g} at n_max, "
                        f"below the threshold {spec.threshold:g}"
                    )
    rng = np.random.default_rng(spec.seed)
    total = np.zeros((n_max, sym.N) + grid.shape, dtype=complex)
    entries = []
    for j, prof in enumerate(spec.profiles):
        if prof.law.scale.shape[0] != n_max:
            raise PlantError(f"profile {j} law has {prof.law.scale.shape[0]} entries, n_max is {n_max}")
        U = prof.shape if isinstance(prof.shape, Field) else make_shape(grid, prof.shape, sym.N, s)
        U = U * prof.amplitude
        for n in range(n_max):
            total[n] += profile_operator(
                U, prof.law.scale[n], prof.law.centers[n], prof.law.times[n], sym, s
            ).hat
        entries.append(
            {
                "shape": prof.shape if isinstance(prof.shape, dict) else "field",
                "amplitude": prof.amplitude,
                "energy": float(hs_norm_sq(U.hat, grid, s)),
                **prof.law.to_json(),
            }
        )
    noise = np.stack([white_hs_noise(grid, sym.N, s, spec.noise_level, rng) for _ in range(n_max)])
    total += noise
    family = SequenceFamily.from_hat(total, grid)
    member_energy = hs_norm_sq(total, grid, s)
    planted_energy = sum(e["energy"] for e in entries)
    noise_energy = hs_norm_sq(noise, grid, s)
    pairs = []
    for a in range(len(spec.profiles)):
        for b in range(a + 1, len(spec.profiles)):
            stat = divergence_statistic(spec.profiles[a].law, spec.profiles[b].law, sym.alpha, grid)
            pairs.append({"pair": [a, b], "statistic": stat.tolist()})
    ledger = {
        "grid": grid.to_json(),
        "symbol": sym.id,
        "s": s,
        "n_max": n_max,
        "seed": spec.seed,
        "profiles": entries,
        "noise": {
            "kind": "white_hs",
            "level": spec.noise_level,
            "hs_energy": noise_energy.tolist(),
            "s_floor": s_surrogate(noise, sym, grid, s, spec.T, spec.n_t) if spec.noise_level > 0 else 0.0,
            "T": spec.T,
            "n_t": spec.n_t,
        },
        "member_energy": member_energy.tolist(),
        "cross_term_defect": (
            np.abs(member_energy - planted_energy - noise_energy) / np.maximum(member_energy, 1e-300)
        ).tolist(),
        "divergence": pairs,
    }
    return family, ledger
