"""Point observations of the advected scalar.

A design is a set of space-time points drawn uniformly on [0, T] x [0,1]^2.
In the default paired mode every point is observed under both members of an
initial-condition pair, and the data vector interleaves them: entry 2j-1 is
the first initial condition at point j, entry 2j the second (1-based).  Data
are the noiseless values plus independent centered Gaussian noise drawn from
a stream that never mixes with the design stream.

The pair must pass a spanning check: the rotated gradient of the first
initial state must not be orthogonal to the gradient of the second except on
a negligible set, otherwise distinct velocities can produce identical data.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import rng as rng_streams
from .errors import ConfigError, NumericsError
from .fields import (FourierScalarField, FourierVelocityField, ModeLattice,
                     TWO_PI, _grid_synthesis)
from .solver import (MAX_BLOCK_NNZ, SPAN_BASIS_MAX, SolverConfig,
                     _BatchAdvection, _SpanBatchAdvection, _Workspace,
                     _effective_dt, _ifrk4_segment_packed,
                     _integrate_block_sparse, _integrate_span, _sup_speed,
                     _velocity_grids)

IC_MODES = ("paired", "single", "alternating")


@dataclass(frozen=True)
class ObservationDesign:
    """Space-time observation points; regeneration from the seed is bit-exact."""

    t: np.ndarray
    x: np.ndarray
    T: float
    seed: int

    def __post_init__(self):
        self.t.setflags(write=False)
        self.x.setflags(write=False)
        if len(self.t) != len(self.x):
            raise ConfigError("design arrays t and x must have equal length")
        if len(self.t) and (self.t.min() < 0 or self.t.max() > self.T):
            raise ConfigError("design times must lie in [0, T]")

    @property
    def n_points(self) -> int:
        return len(self.t)

    def head(self, n: int) -> "ObservationDesign":
        return ObservationDesign(self.t[:n].copy(), self.x[:n].copy(), self.T, self.seed)


def sample_design(n_points: int, T: float, seed: int) -> ObservationDesign:
    """Draw n_points i.i.d. uniform space-time observation locations."""
    if n_points < 0:
        raise ConfigError("n_points must be nonnegative")
    if T <= 0:
        raise ConfigError("design horizon T must be positive")
    g = rng_streams.stream(seed, rng_streams.DESIGN)
    t = g.random(n_points) * T
    x = g.random((n_points, 2))
    return ObservationDesign(t, x, T, seed)


# ---------------------------------------------------------------------------
# spanning check

@dataclass(frozen=True)
class SpanningReport:
    """Grid census of d(x) = perp(grad theta1) . grad theta2."""

    grid_n: int
    tol: float
    threshold: float
    min_abs: float
    max_abs: float
    fraction: float
    passed: bool
    _sorted_abs: np.ndarray = None

    def fraction_below(self, tol: float) -> float:
        return float(np.searchsorted(self._sorted_abs, tol) / len(self._sorted_abs))


def check_spanning(theta1: FourierScalarField, theta2: FourierScalarField,
                   grid_n: int = 64, tol: float | None = None,
                   max_curves: int = 4) -> SpanningReport:
    """Census of the gradient determinant on a grid.

    The pair passes when the fraction of grid points with |d| below tol stays
    within the budget for max_curves smooth zero curves (each curve crosses
    about grid_n cells, allowed a 4-point-wide band).
    """
    d1a, d2a = theta1.gradient_coeffs()
    d1b, d2b = theta2.gradient_coeffs()
    K = max(theta1.lattice.K, theta2.lattice.K)
    if grid_n < 4 * K + 2:
        # the determinant is a product field; resolve it alias-free
        grid_n = 4 * K + 2
    la, lb = theta1.lattice, theta2.lattice
    g1a = _grid_synthesis(la, d1a, grid_n, check_real=False).real
    g2a = _grid_synthesis(la, d2a, grid_n, check_real=False).real
    g1b = _grid_synthesis(lb, d1b, grid_n, check_real=False).real
    g2b = _grid_synthesis(lb, d2b, grid_n, check_real=False).real
    det = g1a * g2b - g2a * g1b
    absd = np.sort(np.abs(det).ravel())
    max_abs = float(absd[-1]) if absd.size else 0.0
    if tol is None:
        tol = 1e-8 * max(max_abs, 1e-300)
    frac = float(np.searchsorted(absd, tol) / len(absd)) if absd.size else 1.0
    threshold = max_curves * 4.0 / grid_n
    return SpanningReport(grid_n=grid_n, tol=float(tol), threshold=float(threshold),
                          min_abs=float(absd[0]) if absd.size else 0.0,
                          max_abs=max_abs, fraction=frac,
                          passed=bool(frac <= threshold), _sorted_abs=absd)


@dataclass(frozen=True)
class ICPair:
    """Two initial states observed jointly; spanning result is cached."""

    theta1: FourierScalarField
    theta2: FourierScalarField
    label: str = "pair"

    @cached_property
    def spanning(self) -> SpanningReport:
        return check_spanning(self.theta1, self.theta2)

    def require_spanning(self, allow_degenerate: bool = False):
        if not self.spanning.passed and not allow_degenerate:
            raise ConfigError(
                f"initial-condition pair {self.label!r} fails the spanning check "
                f"(low-determinant fraction {self.spanning.fraction:.3f} > "
                f"{self.spanning.threshold:.3f}); distinct velocities may be "
                "indistinguishable; pass allow_degenerate=True only for "
                "controlled degeneracy studies")


def canonical_ic_pair(K: int = 1) -> ICPair:
    """sin(2 pi x1) with sin(2 pi x2): gradient determinant 4 pi^2 cos cos."""
    from .presets import sin_x1, sin_x2

    return ICPair(sin_x1(K), sin_x2(K), label="canonical")


# ---------------------------------------------------------------------------
# forward maps

def pack_ic_pair(ic_pair: ICPair, lattice: ModeLattice) -> np.ndarray:
    """Both initial states as one complex vector theta1 + i theta2."""
    return (ic_pair.theta1.embed(lattice).coeffs
            + 1j * ic_pair.theta2.embed(lattice).coeffs)


def unpack_components(Z: np.ndarray, lattice: ModeLattice):
    """Split a packed state back into the two scalar coefficient arrays.

    Any coefficient vector decomposes uniquely as C1 + i C2 with both parts
    reality-symmetric; the flip is conj(Z) reindexed by the conjugate map.
    """
    flip = np.conj(Z[..., lattice.conj_index])
    return 0.5 * (Z + flip), -0.5j * (Z - flip)


def run_paired_batch(vs, ic_pair: ICPair, config: SolverConfig, landmark_times,
                     on_landmark, chunk: int = 4096):
    """Advance both initial states under every velocity in vs.

    The pair rides through one integration as the packed complex state
    theta1 + i theta2 (the dealiased step is complex-linear), halving the
    work.  on_landmark(batch_slice, i, t, Z) fires at each landmark with Z
    of shape (b, n_modes) for that chunk of velocities; the array is reused,
    so hooks must copy what they keep.  Point values of the packed state
    carry theta1 in the real part and theta2 in the imaginary part.
    """
    vs = list(vs)
    if not vs:
        return
    Kv = max(v.lattice.K for v in vs)
    if any(v.lattice.K != Kv for v in vs):
        big = ModeLattice(Kv)
        vs = [v.embed(big) for v in vs]
    v_lattice = vs[0].lattice
    lattice = ModeLattice(config.K)
    Z0 = pack_ic_pair(ic_pair, lattice)
    grid_n = config.resolve_grid(Kv)
    ws = _Workspace(lattice, grid_n, config.kappa)
    times = np.asarray(landmark_times, dtype=float)
    for lo in range(0, len(vs), chunk):
        sl = slice(lo, min(lo + chunk, len(vs)))
        u1, u2 = _velocity_grids(vs[sl], grid_n)
        b = sl.stop - sl.start
        Z = np.broadcast_to(Z0, (b, lattice.n_modes)).copy()
        dt = _effective_dt(config.dt_max, grid_n, _sup_speed(u1, u2))

        coeff_rows = np.stack([v.coeffs for v in vs[sl]])
        present = np.abs(coeff_rows).max(axis=0) > 0.0
        if Kv <= 2:
            rep_idx = [j for j in np.flatnonzero(v_lattice.half_mask)
                       if present[j] or present[v_lattice.conj_index[j]]]
            if 2 * len(rep_idx) <= SPAN_BASIS_MAX:
                # whole batch lives in a few coefficient directions: advance
                # it against fixed basis matrices
                adv = _SpanBatchAdvection(lattice, v_lattice, coeff_rows, rep_idx)
                del u1, u2

                def fire(i, t, Zv):
                    on_landmark(sl, i, t, Zv)

                _integrate_span(adv, ws.lam, Z, dt, times, fire)
                continue
        n_present = int(np.count_nonzero(present))
        if n_present * lattice.n_modes * b <= MAX_BLOCK_NNZ and Kv <= 2:
            # few distinct velocity modes: one sparse matvec per advection
            # evaluation beats four grid transforms by a wide margin
            adv = _BatchAdvection(lattice, v_lattice, coeff_rows)
            del u1, u2

            def fire(i, t, Zv):
                on_landmark(sl, i, t, Zv)

            _integrate_block_sparse(adv, ws.lam, Z, dt, times, fire)
            continue

        on_landmark(sl, 0, float(times[0]), Z)
        for i in range(1, len(times)):
            Z = _ifrk4_segment_packed(ws, Z, u1, u2,
                                      float(times[i - 1]), float(times[i]), dt)
            if i % 32 == 0 or i == len(times) - 1:
                if not np.isfinite(Z).all():
                    from .errors import SolverBlowupError
                    raise SolverBlowupError(float(times[i]),
                                            f"batch rows {sl.start}..{sl.stop - 1}")
            on_landmark(sl, i, float(times[i]), Z)


def _observation_landmarks(design: ObservationDesign):
    """Sorted unique observation times with 0 prepended, and the design-point
    indices observed at each landmark index."""
    uniq, inverse = np.unique(design.t, return_inverse=True)
    starts_at_zero = bool(uniq.size and uniq[0] == 0.0)
    times = uniq if starts_at_zero else np.concatenate([[0.0], uniq])
    offset = 0 if starts_at_zero else 1
    points_at = {}
    for p, iu in enumerate(inverse):
        points_at.setdefault(int(iu) + offset, []).append(p)
    return times, points_at


def forward_map_batch(vs, design: ObservationDesign, ic_pair: ICPair,
                      config: SolverConfig, ic_mode: str = "paired",
                      allow_degenerate: bool = False, chunk: int = 2048) -> np.ndarray:
    """Noiseless data vectors for every velocity, shape (len(vs), n_data).

    Paired mode interleaves the two initial conditions at every point;
    single mode observes only the first; alternating mode switches initial
    condition with point parity.  Output ordering is deterministic.
    """
    if ic_mode not in IC_MODES:
        raise ConfigError(f"ic_mode must be one of {IC_MODES}, got {ic_mode!r}")
    if ic_mode != "single":
        ic_pair.require_spanning(allow_degenerate)
    vs = list(vs)
    n_pts = design.n_points
    n_data = 2 * n_pts if ic_mode == "paired" else n_pts
    out = np.empty((len(vs), n_data), dtype=float)
    if n_pts == 0 or not vs:
        return out
    times, points_at = _observation_landmarks(design)
    lattice = ModeLattice(config.K)
    modes_f = lattice.modes.T.astype(float)

    def hook(sl, i, t, Z):
        pts = points_at.get(i)
        if not pts:
            return
        phase = np.exp((TWO_PI * 1j) * (design.x[pts] @ modes_f))
        vals = Z @ phase.T              # (b, len(pts)): re = first IC, im = second
        for c, p in enumerate(pts):
            if ic_mode == "paired":
                out[sl, 2 * p] = vals[:, c].real
                out[sl, 2 * p + 1] = vals[:, c].imag
            elif ic_mode == "single":
                out[sl, p] = vals[:, c].real
            else:
                out[sl, p] = vals[:, c].real if p % 2 == 0 else vals[:, c].imag

    run_paired_batch(vs, ic_pair, config, times, hook, chunk=chunk)
    return out


def forward_map(v: FourierVelocityField, design: ObservationDesign, ic_pair: ICPair,
                config: SolverConfig, ic_mode: str = "paired",
                allow_degenerate: bool = False) -> np.ndarray:
    """Noiseless data vector for one velocity (see forward_map_batch)."""
    return forward_map_batch([v], design, ic_pair, config, ic_mode=ic_mode,
                             allow_degenerate=allow_degenerate)[0]


# ---------------------------------------------------------------------------
# data synthesis

@dataclass(frozen=True)
class ObservationSet:
    """Design, noiseless values, and noisy data for one truth velocity."""

    design: ObservationDesign
    g_true: np.ndarray
    values: np.ndarray
    sigma_eta: float
    noise_seed: int
    ic_mode: str = "paired"

    def __post_init__(self):
        self.g_true.setflags(write=False)
        self.values.setflags(write=False)
        if self.sigma_eta < 0:
            raise ConfigError("sigma_eta must be nonnegative")
        if self.ic_mode not in IC_MODES:
            raise ConfigError(f"ic_mode must be one of {IC_MODES}")
        expect = 2 * self.design.n_points if self.ic_mode == "paired" else self.design.n_points
        if len(self.values) != expect or len(self.g_true) != expect:
            raise ConfigError(
                f"{self.ic_mode} mode over {self.design.n_points} points needs "
                f"{expect} data values, got {len(self.values)}")

    @property
    def n_data(self) -> int:
        return len(self.values)

    def head(self, n_data: int) -> "ObservationSet":
        """The observation set truncated to its first n_data values."""
        if n_data > self.n_data:
            raise ConfigError(f"cannot take {n_data} of {self.n_data} data values")
        if self.ic_mode == "paired":
            if n_data % 2:
                raise ConfigError("paired data truncates in whole pairs")
            n_pts = n_data // 2
        else:
            n_pts = n_data
        return ObservationSet(self.design.head(n_pts), self.g_true[:n_data].copy(),
                              self.values[:n_data].copy(), self.sigma_eta,
                              self.noise_seed, self.ic_mode)


def synthesize_data(v_star: FourierVelocityField, design: ObservationDesign,
                    ic_pair: ICPair, sigma_eta: float, noise_seed: int,
                    config: SolverConfig, ic_mode: str = "paired",
                    allow_degenerate: bool = False) -> ObservationSet:
    """Evaluate the truth velocity at the design and add independent noise."""
    g = forward_map(v_star, design, ic_pair, config, ic_mode=ic_mode,
                    allow_degenerate=allow_degenerate)
    noise_rng = rng_streams.stream(noise_seed, rng_streams.NOISE)
    eta = noise_rng.normal(0.0, 1.0, size=len(g)) * sigma_eta
    return ObservationSet(design, g, g + eta, sigma_eta, noise_seed, ic_mode)


# ---------------------------------------------------------------------------
# serialization

def save_observations_csv(obs: ObservationSet, path):
    d = obs.design
    lines = [
        f"# sigma_eta={float(obs.sigma_eta)!r},design_seed={d.seed},"
        f"noise_seed={obs.noise_seed},T={float(d.T)!r},ic_mode={obs.ic_mode}",
        "j,t,x1,x2,ic,G_true,Y",
    ]
    for j in range(obs.n_data):
        if obs.ic_mode == "paired":
            p, ic = divmod(j, 2)
            ic += 1
        elif obs.ic_mode == "single":
            p, ic = j, 1
        else:
            p, ic = j, 1 + (j % 2)
        lines.append(f"{j + 1},{float(d.t[p])!r},{float(d.x[p, 0])!r},"
                     f"{float(d.x[p, 1])!r},{ic},"
                     f"{float(obs.g_true[j])!r},{float(obs.values[j])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_observations_csv(path) -> ObservationSet:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# "):
            raise ConfigError(f"missing metadata header in {path}")
        kv = dict(item.split("=", 1) for item in header[2:].split(","))
        cols = fh.readline().strip()
        if cols != "j,t,x1,x2,ic,G_true,Y":
            raise ConfigError(f"unexpected column header {cols!r} in {path}")
        t, x, g, y = [], [], [], []
        ic_mode = kv["ic_mode"]
        for line in fh:
            line = line.strip()
            if not line:
                continue
            _j, tj, x1, x2, ic, gj, yj = line.split(",")
            is_new_point = (ic_mode != "paired") or int(ic) == 1
            if is_new_point:
                t.append(float(tj))
                x.append((float(x1), float(x2)))
            g.append(float(gj))
            y.append(float(yj))
    design = ObservationDesign(np.asarray(t, dtype=float),
                               np.asarray(x, dtype=float).reshape(-1, 2),
                               T=float(kv["T"]), seed=int(kv["design_seed"]))
    return ObservationSet(design, np.asarray(g), np.asarray(y),
                          sigma_eta=float(kv["sigma_eta"]),
                          noise_seed=int(kv["noise_seed"]), ic_mode=ic_mode)
