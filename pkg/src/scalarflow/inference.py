"""Bayesian inversion for the background velocity.

The unknown velocity is parameterized by a small set of representative
lattice modes; each contributes two real degrees of freedom (real and
imaginary part of its amplitude), with the conjugate partner implied by the
reality constraint.  Priors are supported on a ball of the higher-regularity
norm around a center field, in two flavors: a Gaussian with polynomially
decaying per-mode scales truncated to the ball, and the uniform distribution
on the ball.  Compact support discharges the tail-control hypothesis of the
posterior-consistency argument, so no extra moment bookkeeping is needed.

Sampling is preconditioned Crank-Nicolson with ball-rejection.  For the
Gaussian kind the proposal fluctuation is the prior's own Gaussian and the
plain likelihood ratio min{1, exp(Phi(v) - Phi(v'))} already leaves the
truncated prior invariant.  For the uniform kind the fluctuation is a
Gaussian with the ball measure's covariance (std radius/sqrt(d+2) per ball
coordinate), and the acceptance ratio carries the reference-density factor
exp((|w'|^2 - |w|^2) / (2 s^2)) on top of the likelihood ratio; without
that factor a potential-free chain would drift to the Gaussian reference
law instead of preserving the uniform ball measure.

The quadrature oracle integrates prior x likelihood over a tensor midpoint
grid in ball coordinates.  It refuses more than four parameter dimensions:
past that, tensor grids stop being a trustworthy independent check.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from . import rng as rng_streams
from .errors import (BudgetExceededError, ConfigError, NumericsError,
                     PriorRejectionError)
from .fields import (DEFAULT_REGULARITY, FourierVelocityField, ModeLattice,
                     RegularityIndices, TWO_PI)
from .observations import (ObservationSet, ICPair, _observation_landmarks,
                           forward_map_batch, pack_ic_pair)
from .solver import SingleVelocityPropagator, SolverConfig

PHI_CLAMP = 700.0          # log-ratio clamp before exponentiation
MIN_QUAD_GRID = 17
MAX_QUAD_DIM = 4
PRIOR_KINDS = ("gaussian", "uniform")


def _canonical_rep(k) -> tuple:
    k1, k2 = int(k[0]), int(k[1])
    if k1 == 0 and k2 == 0:
        raise ConfigError("the zero mode carries no degree of freedom")
    if not (k1 > 0 or (k1 == 0 and k2 > 0)):
        raise ConfigError(
            f"mode {(k1, k2)} is not a canonical representative; use its "
            "conjugate partner (k1 > 0, or k1 = 0 with k2 > 0)")
    return (k1, k2)


@dataclass(frozen=True)
class ParamMap:
    """Bijection between real parameter vectors and velocity fields.

    Parameter layout: (re, im) per representative mode, in the given order.
    """

    modes: tuple

    def __post_init__(self):
        reps = tuple(_canonical_rep(k) for k in self.modes)
        if len(set(reps)) != len(reps):
            raise ConfigError(f"duplicate representative modes in {reps}")
        object.__setattr__(self, "modes", reps)

    @property
    def d(self) -> int:
        return 2 * len(self.modes)

    @cached_property
    def lattice(self) -> ModeLattice:
        return ModeLattice(max(max(abs(k1), abs(k2)) for k1, k2 in self.modes))

    @cached_property
    def mode_norms(self) -> np.ndarray:
        return np.sqrt(np.array([k1 * k1 + k2 * k2 for k1, k2 in self.modes], dtype=float))

    def dof_scales(self, s: float) -> np.ndarray:
        """Per-dof weights turning parameters into H^s coordinates.

        |v|_{H^s}^2 = sum over pairs of 2 |k|^{2s} |v_k|^2, so each of the
        two real dofs of a pair carries weight sqrt(2) |k|^s.
        """
        per_mode = math.sqrt(2.0) * self.mode_norms ** s
        return np.repeat(per_mode, 2)

    def to_field(self, params) -> FourierVelocityField:
        p = np.asarray(params, dtype=float)
        if p.shape != (self.d,):
            raise ConfigError(f"expected {self.d} parameters, got shape {p.shape}")
        entries = {k: p[2 * i] + 1j * p[2 * i + 1] for i, k in enumerate(self.modes)}
        return FourierVelocityField.from_mode_dict(self.lattice, entries)

    def from_field(self, v: FourierVelocityField) -> np.ndarray:
        out = np.empty(self.d)
        for i, k in enumerate(self.modes):
            c = v.coeffs[v.lattice.index_of(k)]
            out[2 * i] = c.real
            out[2 * i + 1] = c.imag
        return out

    def param_distance(self, p1, p2, s: float) -> float:
        """H^s distance between the fields of two parameter vectors."""
        diff = (np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float))
        return float(np.sqrt(np.sum((self.dof_scales(s) * diff) ** 2)))

    def dof_names(self):
        return [f"{part}_{k1}_{k2}" for k1, k2 in self.modes for part in ("re", "im")]


@dataclass(frozen=True)
class PriorSpec:
    """Ball-supported prior over velocity parameters.

    tau0 and alpha shape the Gaussian kind's per-mode scales
    tau_k = tau0 |k|^-alpha; alpha must exceed m_star + 1 so that draws are
    almost surely smoother than the ball norm requires.
    """

    param_map: ParamMap
    kind: str = "uniform"
    radius: float = 1.0
    tau0: float = 1.0
    alpha: float = 4.5
    center: np.ndarray = None
    regularity: RegularityIndices = DEFAULT_REGULARITY

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ConfigError(f"prior kind must be one of {PRIOR_KINDS}, got {self.kind!r}")
        if self.radius < 0:
            raise ConfigError("ball radius must be nonnegative")
        if self.kind == "gaussian":
            if not self.tau0 > 0:
                raise ConfigError("tau0 must be positive")
            if not self.alpha > self.regularity.m_star + 1:
                raise ConfigError(
                    f"alpha={self.alpha} must exceed m_star + 1 = "
                    f"{self.regularity.m_star + 1} for the Gaussian kind")
        c = (np.zeros(self.param_map.d) if self.center is None
             else np.asarray(self.center, dtype=float).copy())
        if c.shape != (self.param_map.d,):
            raise ConfigError(f"center needs {self.param_map.d} parameters")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    @property
    def d(self) -> int:
        return self.param_map.d

    @cached_property
    def ball_scales(self) -> np.ndarray:
        """Map param offsets to ball coordinates w; the support is |w| <= radius."""
        return self.param_map.dof_scales(self.regularity.m_star)

    @cached_property
    def tau_dof(self) -> np.ndarray:
        """Gaussian-kind std per real dof."""
        per_mode = self.tau0 * self.param_map.mode_norms ** (-self.alpha)
        return np.repeat(per_mode, 2)

    def contains(self, params) -> bool:
        w = self.ball_scales * (np.asarray(params, dtype=float) - self.center)
        return bool(np.sqrt(np.sum(w * w)) <= self.radius)

    def log_density(self, params_batch) -> np.ndarray:
        """Unnormalized log prior density at a batch of parameter vectors."""
        p = np.atleast_2d(np.asarray(params_batch, dtype=float))
        w = (p - self.center) * self.ball_scales
        inside = np.sqrt((w * w).sum(axis=1)) <= self.radius
        if self.kind == "uniform":
            out = np.where(inside, 0.0, -np.inf)
        else:
            q = ((p - self.center) / self.tau_dof) ** 2
            out = np.where(inside, -0.5 * q.sum(axis=1), -np.inf)
        return out

    def center_field(self) -> FourierVelocityField:
        return self.param_map.to_field(self.center)


def sample_prior(spec: PriorSpec, rng: np.random.Generator) -> np.ndarray:
    """One draw of the prior, as a parameter vector."""
    if spec.radius == 0.0:
        return spec.center.copy()
    if spec.kind == "uniform":
        z = rng.standard_normal(spec.d)
        nrm = float(np.sqrt(np.sum(z * z)))
        while nrm == 0.0:
            z = rng.standard_normal(spec.d)
            nrm = float(np.sqrt(np.sum(z * z)))
        r = spec.radius * rng.random() ** (1.0 / spec.d)
        return spec.center + (r / nrm) * z / spec.ball_scales
    tries = 0
    accepted = 0
    while True:
        p = spec.center + rng.standard_normal(spec.d) * spec.tau_dof
        tries += 1
        if spec.contains(p):
            return p
        if tries >= 100000 and accepted == 0:
            raise PriorRejectionError(
                f"ball rejection accepted nothing in {tries} tries; "
                "increase radius or decrease tau0")


def sample_prior_field(spec: PriorSpec, rng) -> FourierVelocityField:
    return spec.param_map.to_field(sample_prior(spec, rng))


# ---------------------------------------------------------------------------
# potential

class Potential:
    """Negative log likelihood Phi(v) = sum (Y_j - G_j(v))^2 / (2 sigma^2).

    Holds the data, the initial-condition pair, and the solver settings; each
    evaluation runs one paired solve.  With sigma_eta = 0 the value is the
    indicator limit: 0 on exact fits, +inf otherwise (oracle tests only).
    """

    def __init__(self, obs: ObservationSet, ic_pair: ICPair, config: SolverConfig,
                 allow_degenerate: bool = False):
        self.obs = obs
        self.ic_pair = ic_pair
        self.config = config
        self.allow_degenerate = allow_degenerate
        self.eval_count = 0
        self._single_ctx = None

    def forward_batch(self, vs) -> np.ndarray:
        vs = list(vs)
        self.eval_count += len(vs)
        return forward_map_batch(vs, self.obs.design, self.ic_pair, self.config,
                                 ic_mode=self.obs.ic_mode,
                                 allow_degenerate=self.allow_degenerate)

    def forward_single(self, v) -> np.ndarray:
        """Data vector of one velocity via the sparse single-state propagator.

        Matches forward_batch to roundoff but skips the batch machinery;
        this is the MCMC inner loop, so the landmark schedule and the point
        phase tables are cached on first use.
        """
        if self._single_ctx is None:
            des = self.obs.design
            if self.obs.ic_mode != "single":
                self.ic_pair.require_spanning(self.allow_degenerate)
            times, points_at = _observation_landmarks(des)
            lattice = ModeLattice(self.config.K)
            modes_f = lattice.modes.T.astype(float)
            phases = {i: np.exp((TWO_PI * 1j) * (des.x[pts] @ modes_f))
                      for i, pts in points_at.items()}
            self._single_ctx = (times, points_at, phases,
                                pack_ic_pair(self.ic_pair, lattice))
        times, points_at, phases, Z0 = self._single_ctx
        self.eval_count += 1
        mode = self.obs.ic_mode
        n_pts = self.obs.design.n_points
        out = np.empty(2 * n_pts if mode == "paired" else n_pts)

        def hook(i, t, Z):
            pts = points_at.get(i)
            if not pts:
                return
            vals = phases[i] @ Z
            for c, p in enumerate(pts):
                if mode == "paired":
                    out[2 * p] = vals[c].real
                    out[2 * p + 1] = vals[c].imag
                elif mode == "single":
                    out[p] = vals[c].real
                else:
                    out[p] = vals[c].real if p % 2 == 0 else vals[c].imag

        SingleVelocityPropagator(v, self.config).run(Z0, times, hook)
        return out

    def single(self, v) -> float:
        return float(self.from_forward(self.forward_single(v)[None, :])[0])

    def batch(self, vs) -> np.ndarray:
        G = self.forward_batch(vs)
        return self.from_forward(G)

    def from_forward(self, G: np.ndarray) -> np.ndarray:
        """Potentials from precomputed forward values (rows of G)."""
        r2 = ((self.obs.values[None, :] - G) ** 2).sum(axis=1)
        if self.obs.sigma_eta == 0.0:
            return np.where(r2 == 0.0, 0.0, np.inf)
        return 0.5 * r2 / self.obs.sigma_eta ** 2

    def __call__(self, v) -> float:
        if isinstance(v, np.ndarray):
            raise TypeError("Potential takes a velocity field; map parameters first")
        return float(self.batch([v])[0])


class ZeroPotential:
    """Potential of an empty data record; Phi is identically zero."""

    def batch(self, vs):
        return np.zeros(len(list(vs)))

    def single(self, v) -> float:
        return 0.0

    def __call__(self, v) -> float:
        return 0.0


# ---------------------------------------------------------------------------
# preconditioned Crank-Nicolson

@dataclass(frozen=True)
class ChainTrace:
    """Full pCN output: row 0 is the initial state, then one row per step."""

    params: np.ndarray      # (n_steps + 1, d)
    phi: np.ndarray         # (n_steps + 1,)
    accepted: np.ndarray    # (n_steps,) 0/1
    beta_final: float
    burn_in: int
    dof_names: tuple

    def __post_init__(self):
        for a in (self.params, self.phi, self.accepted):
            a.setflags(write=False)

    @property
    def n_steps(self) -> int:
        return len(self.accepted)

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if self.n_steps else 0.0

    def tail(self) -> np.ndarray:
        """Post-burn-in parameter rows."""
        return self.params[self.burn_in + 1:]

    def mean(self) -> np.ndarray:
        return self.tail().mean(axis=0)

    def standard_errors(self, n_batches: int = 20) -> np.ndarray:
        """Batch-means standard error of the post-burn-in mean, per dof."""
        tail = self.tail()
        nb = max(2, min(n_batches, len(tail) // 8 or 2))
        usable = (len(tail) // nb) * nb
        bm = tail[:usable].reshape(nb, -1, tail.shape[1]).mean(axis=1)
        return bm.std(axis=0, ddof=1) / math.sqrt(nb)

    def verify_phi(self, pot, index: int = -1) -> float:
        """Recompute Phi at one recorded state and return the discrepancy."""
        idx = range(len(self.phi))[index]
        return abs(float(self.phi[idx]) - _phi_of_params(pot, self._map, self.params[idx]))

    _map: ParamMap = None


def _phi_of_params(pot, pmap: ParamMap, params) -> float:
    v = pmap.to_field(params)
    if hasattr(pot, "single"):
        return float(pot.single(v))
    return float(pot.batch([v])[0])


def pcn_chain(spec: PriorSpec, pot, beta: float, n_steps: int,
              rng: np.random.Generator, init_params=None, burn_in: int = 0,
              adapt_window: int = 50) -> ChainTrace:
    """Run preconditioned Crank-Nicolson targeting prior x exp(-Phi).

    Proposals contract toward the prior center and add a Gaussian
    fluctuation with the prior's covariance; any proposal leaving the
    support ball is rejected outright.  The Gaussian kind accepts with the
    likelihood ratio alone (reversible for the truncated prior as is); the
    uniform kind adds the reference-density correction in ball coordinates
    so that the flat ball measure is exactly invariant when Phi vanishes.
    When burn_in > 0, beta adapts every adapt_window steps during burn-in
    toward acceptance in [0.2, 0.4], then freezes.
    """
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must lie in [0, 1], got {beta}")
    if n_steps < 1:
        raise ConfigError("n_steps must be positive")
    if burn_in >= n_steps:
        raise ConfigError("burn_in must be smaller than n_steps")
    pmap = spec.param_map
    safe_scales = np.where(spec.ball_scales > 0, spec.ball_scales, 1.0)
    if spec.kind == "gaussian":
        fluct = spec.tau_dof
        half_inv_s2 = 0.0           # no correction: fluctuation matches prior
    else:
        s_w = spec.radius / math.sqrt(spec.d + 2.0)
        fluct = s_w / safe_scales
        half_inv_s2 = 0.5 / (s_w * s_w) if s_w > 0 else 0.0

    def wnorm2(p):
        w = spec.ball_scales * (p - spec.center)
        return float(np.dot(w, w))

    cur = np.array(sample_prior(spec, rng) if init_params is None else init_params,
                   dtype=float)
    if not spec.contains(cur):
        raise ConfigError("initial state lies outside the prior support ball")
    cur_phi = _phi_of_params(pot, pmap, cur)
    cur_wn2 = wnorm2(cur)
    params = np.empty((n_steps + 1, spec.d))
    phis = np.empty(n_steps + 1)
    accepted = np.zeros(n_steps, dtype=np.int8)
    params[0] = cur
    phis[0] = cur_phi
    contract = math.sqrt(max(0.0, 1.0 - beta * beta))
    window_accepts = 0
    for step in range(1, n_steps + 1):
        xi = rng.standard_normal(spec.d) * fluct
        prop = spec.center + contract * (cur - spec.center) + beta * xi
        take = False
        if spec.contains(prop):
            prop_phi = _phi_of_params(pot, pmap, prop)
            prop_wn2 = wnorm2(prop)
            if math.isinf(cur_phi) and math.isinf(prop_phi):
                take = False
            else:
                dlog = (cur_phi - prop_phi) + half_inv_s2 * (prop_wn2 - cur_wn2)
                dlog = max(-PHI_CLAMP, min(PHI_CLAMP, dlog))
                take = math.log(rng.random()) < min(0.0, dlog)
        if take:
            cur = prop
            cur_phi = prop_phi
            cur_wn2 = prop_wn2
            accepted[step - 1] = 1
            window_accepts += 1
        params[step] = cur
        phis[step] = cur_phi
        if burn_in > 0 and step <= burn_in and step % adapt_window == 0:
            rate = window_accepts / adapt_window
            if rate < 0.2:
                beta = max(1e-4, beta * 0.7)
            elif rate > 0.4:
                beta = min(1.0, beta * 1.3)
            contract = math.sqrt(max(0.0, 1.0 - beta * beta))
            window_accepts = 0
    trace = ChainTrace(params, phis, accepted, beta_final=float(beta),
                       burn_in=burn_in, dof_names=tuple(pmap.dof_names()))
    object.__setattr__(trace, "_map", pmap)
    return trace


def save_trace_csv(trace: ChainTrace, path):
    cols = ",".join(trace.dof_names)
    lines = [f"step,accepted,phi,{cols}"]
    for i in range(len(trace.params)):
        acc = 1 if i == 0 else int(trace.accepted[i - 1])
        vals = ",".join(repr(float(x)) for x in trace.params[i])
        lines.append(f"{i},{acc},{float(trace.phi[i])!r},{vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trace_csv(path) -> ChainTrace:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["step", "accepted", "phi"]:
            raise ConfigError(f"unexpected trace header in {path}")
        names = tuple(header[3:])
        rows = [line.strip().split(",") for line in fh if line.strip()]
    n = len(rows) - 1
    d = len(names)
    params = np.empty((n + 1, d))
    phis = np.empty(n + 1)
    accepted = np.zeros(n, dtype=np.int8)
    for i, row in enumerate(rows):
        phis[i] = float(row[2])
        params[i] = [float(x) for x in row[3:]]
        if i > 0:
            accepted[i - 1] = int(row[1])
    return ChainTrace(params, phis, accepted, beta_final=float("nan"),
                      burn_in=0, dof_names=names)


# ---------------------------------------------------------------------------
# quadrature oracle

@dataclass(frozen=True)
class QuadratureResult:
    """Midpoint-rule posterior over the prior support box."""

    spec: PriorSpec
    grid_per_dim: int
    params: np.ndarray          # (n_nodes, d) all box nodes
    log_prior: np.ndarray       # -inf outside the support ball
    phi: np.ndarray             # +inf where never evaluated (zero-prior nodes)
    weights: np.ndarray         # normalized posterior masses, sum 1
    log_normalizer: float
    normalizer: float
    cell_volume: object         # scalar, or one volume per node

    def __post_init__(self):
        for a in (self.params, self.log_prior, self.phi, self.weights):
            a.setflags(write=False)
        if isinstance(self.cell_volume, np.ndarray):
            self.cell_volume.setflags(write=False)

    def mean_params(self) -> np.ndarray:
        return self.weights @ self.params

    def mean_field(self) -> FourierVelocityField:
        return self.spec.param_map.to_field(self.mean_params())

    def ball_mass(self, center_params, radius: float, s: float) -> float:
        """Posterior mass of the H^s ball around a parameter vector."""
        scales = self.spec.param_map.dof_scales(s)
        diff = (self.params - np.asarray(center_params, dtype=float)) * scales
        dist = np.sqrt((diff * diff).sum(axis=1))
        return float(self.weights[dist <= radius].sum())

    def total_variation_to(self, other: "QuadratureResult") -> float:
        if self.params.shape != other.params.shape:
            raise ConfigError("cannot compare quadratures on different grids")
        return 0.5 * float(np.abs(self.weights - other.weights).sum())


def quadrature_nodes(spec: PriorSpec, grid_per_dim: int, box=None):
    """Midpoint tensor grid in ball coordinates.

    By default the grid tiles the full support box [-R, R]^d; a (lo, hi)
    pair of length-d arrays restricts it to a sub-box, still expressed in
    ball coordinates.  Returns (params, log_prior, cell_volume).  Nodes
    outside the ball keep log_prior = -inf and need no potential evaluation.
    """
    if grid_per_dim < MIN_QUAD_GRID:
        raise ConfigError(f"grid_per_dim must be at least {MIN_QUAD_GRID}")
    if spec.d > MAX_QUAD_DIM:
        raise BudgetExceededError(grid_per_dim ** spec.d,
                                  grid_per_dim ** MAX_QUAD_DIM)
    if spec.radius == 0.0:
        params = spec.center[None, :].copy()
        return params, np.zeros(1), 1.0
    R = spec.radius
    if box is None:
        lo = np.full(spec.d, -R)
        hi = np.full(spec.d, R)
    else:
        lo = np.asarray(box[0], dtype=float)
        hi = np.asarray(box[1], dtype=float)
        if lo.shape != (spec.d,) or hi.shape != (spec.d,):
            raise ConfigError("box must be a (lo, hi) pair of length-d arrays")
        if not (hi > lo).all():
            raise ConfigError("box must have positive extent in every dimension")
    step = (hi - lo) / grid_per_dim
    axes = [lo[i] + (np.arange(grid_per_dim) + 0.5) * step[i]
            for i in range(spec.d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    W = np.stack([m.ravel() for m in mesh], axis=1)      # (g^d, d) ball coords
    params = spec.center[None, :] + W / spec.ball_scales
    log_prior = spec.log_density(params)
    cell_w = float(np.prod(step))
    cell_volume = cell_w / float(np.prod(spec.ball_scales))
    return params, log_prior, cell_volume


def posterior_from_phis(spec: PriorSpec, grid_per_dim: int, params, log_prior,
                        phi, cell_volume) -> QuadratureResult:
    """Assemble normalized weights from per-node prior and potential values.

    cell_volume is a scalar for a uniform grid, or one value per node when
    the caller stitches refinement patches into a single midpoint rule
    (zero-volume nodes drop out of the sum).
    """
    vol = np.asarray(cell_volume, dtype=float)
    if vol.ndim == 0:
        log_vol_term = math.log(float(vol))
        logw = log_prior - phi
        stored_vol = float(vol)
    else:
        if vol.shape != (len(params),):
            raise ConfigError("cell_volume must be scalar or one value per node")
        log_vol_term = 0.0
        with np.errstate(divide="ignore"):
            logw = log_prior - phi + np.log(vol)
        stored_vol = vol
    finite = np.isfinite(logw)
    if not finite.any():
        raise NumericsError("posterior weights vanished everywhere on the grid")
    peak = float(logw[finite].max())
    wun = np.where(finite, np.exp(np.clip(logw - peak, -PHI_CLAMP, None)), 0.0)
    total = float(wun.sum())
    log_norm = peak + math.log(total) + log_vol_term
    norm = math.exp(log_norm) if log_norm > -745 else 0.0
    return QuadratureResult(spec=spec, grid_per_dim=grid_per_dim, params=params,
                            log_prior=log_prior, phi=phi, weights=wun / total,
                            log_normalizer=log_norm, normalizer=norm,
                            cell_volume=stored_vol)


def quadrature_posterior(spec: PriorSpec, pot, grid_per_dim: int,
                         chunk: int = 2048) -> QuadratureResult:
    """Brute-force posterior: evaluate Phi at every in-support node."""
    params, log_prior, cell_volume = quadrature_nodes(spec, grid_per_dim)
    phi = np.full(len(params), np.inf)
    active = np.flatnonzero(np.isfinite(log_prior))
    if active.size:
        fields = [spec.param_map.to_field(params[i]) for i in active]
        phi[active] = pot.batch(fields) if not isinstance(pot, ZeroPotential) \
            else np.zeros(active.size)
    return posterior_from_phis(spec, grid_per_dim, params, log_prior, phi,
                               cell_volume)


def save_quadrature_json(result: QuadratureResult, path, ball_specs=()):
    """Write the posterior summary; ball_specs rows are (center_id, center_params,
    radius, norm exponent)."""
    masses = [{"center_id": str(cid),
               "radius": float(r),
               "norm": float(s),
               "mass": result.ball_mass(center, r, s)}
              for cid, center, r, s in ball_specs]
    payload = {
        "normalizer": result.normalizer,
        "log_normalizer": result.log_normalizer,
        "mean": [float(x) for x in result.mean_params()],
        "ball_masses": masses,
        "grid_per_dim": result.grid_per_dim,
    }
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
