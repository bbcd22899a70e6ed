"""Desk-scale numerical studies of the inverse problem's statistical claims.

Five packaged experiments probe, in order: non-identifiability from a single
symmetric initial condition, injectivity of the paired forward map, the
large-N decomposition of the empirical misfit into noise floor plus model
separation, posterior contraction around the data-generating velocity, and
agreement between the pCN sampler and a deterministic quadrature of the same
posterior.

Every run is wrapped in an ExperimentRecord: seeds, the fully resolved
configuration, the schedule, and float summaries travel together in one JSON
file, and `rerun` reproduces the summaries exactly (chain traces byte for
byte) because all randomness flows through named counter-based streams.
"""

import hashlib
import json
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, ConfigError, NumericsError
from .fields import ModeLattice
from .inference import (ParamMap, Potential, PriorSpec, ZeroPotential,
                        pcn_chain, posterior_from_phis, quadrature_nodes,
                        save_trace_csv)
from .observations import (ICPair, ObservationSet, canonical_ic_pair,
                           run_paired_batch, sample_design, synthesize_data,
                           _observation_landmarks)
from .presets import radial_flow, symmetric_ic
from .rng import CHAIN, stream
from .solver import TWO_PI, SolverConfig, solve

EXPERIMENT_KINDS = ("illposedness", "injectivity", "decomposition",
                    "contraction", "sampler_check")

# weights that fall this far below the running peak cannot move a mean
LOG_WEIGHT_FLOOR = -700.0


# ---------------------------------------------------------------------------
# experiment records

@dataclass
class ExperimentRecord:
    """Self-contained description of one completed experiment run."""

    experiment_id: str
    kind: str
    seeds: tuple
    config: dict
    schedule: dict
    summaries: dict
    wall_clock_s: float = 0.0


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def save_record(record: ExperimentRecord, path) -> None:
    """Atomic JSON dump; float repr round-trips bit exactly."""
    payload = {
        "experiment_id": record.experiment_id,
        "kind": record.kind,
        "seeds": list(record.seeds),
        "config": _jsonable(record.config),
        "schedule": _jsonable(record.schedule),
        "summaries": _jsonable(record.summaries),
        "wall_clock_s": float(record.wall_clock_s),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_record(path) -> ExperimentRecord:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        return ExperimentRecord(
            experiment_id=payload["experiment_id"],
            kind=payload["kind"],
            seeds=tuple(payload["seeds"]),
            config=payload["config"],
            schedule=payload["schedule"],
            summaries=payload["summaries"],
            wall_clock_s=float(payload.get("wall_clock_s", 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"record file {path} is missing field {exc}") from exc


def compare_records(a: ExperimentRecord, b: ExperimentRecord) -> dict:
    """Walk two summary trees and report the largest float discrepancy.

    Wall-clock time is excluded.  Layout mismatches (different keys, lengths,
    or leaf types) are reported rather than raised so callers can show both
    verdicts at once.
    """
    state = {"max_float_diff": 0.0, "exact_match": True, "layout_match": True}

    def walk(x, y):
        if isinstance(x, dict) and isinstance(y, dict):
            if set(x) != set(y):
                state["layout_match"] = False
                return
            for k in x:
                walk(x[k], y[k])
        elif isinstance(x, (list, tuple)) and isinstance(y, (list, tuple)):
            if len(x) != len(y):
                state["layout_match"] = False
                return
            for u, v in zip(x, y):
                walk(u, v)
        elif isinstance(x, bool) or isinstance(y, bool):
            if x is not y:
                state["exact_match"] = False
        elif isinstance(x, (int, float)) and isinstance(y, (int, float)):
            d = abs(float(x) - float(y))
            if d > state["max_float_diff"]:
                state["max_float_diff"] = d
        elif isinstance(x, str) and isinstance(y, str):
            if x != y:
                state["exact_match"] = False
        elif x is None and y is None:
            pass
        else:
            state["layout_match"] = False

    walk(a.summaries, b.summaries)
    if not state["layout_match"] or not state["exact_match"]:
        state["max_float_diff"] = float("inf")
    return state


def _digest(config: dict, schedule: dict, seeds: tuple) -> str:
    blob = json.dumps([_jsonable(config), _jsonable(schedule), list(seeds)],
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:10]


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# shared numerical core

def _residual_prefix_batch(vs, obs: ObservationSet, ic_pair: ICPair, cutoffs,
                           config: SolverConfig, ref_index=None,
                           max_landings=None, chunk=4096):
    """Summed squared data residuals at every observation-count cutoff.

    The forward value at an observation point does not depend on how many
    observations a posterior uses, so one batched pass over all landing
    times serves every cutoff at once: a point with design index j feeds
    the accumulators of all cutoffs N > j.

    Returns (acc, dist2, times): acc[b, c] is the squared-residual sum for
    velocity b under cutoff c, dist2[b, i] (only when ref_index is given)
    the squared coefficient distance between state b and the reference
    state at landing i, and times the landing schedule.  With ref_index the
    schedule is extended to the final time so trajectory distances cover
    the whole window.
    """
    vs = list(vs)
    cut = np.asarray(cutoffs, dtype=np.intp)
    if cut.ndim != 1 or len(cut) == 0 or (np.diff(cut) <= 0).any():
        raise ConfigError("cutoffs must be a strictly increasing sequence")
    design = obs.design
    if cut[-1] > design.n_points:
        raise ConfigError(f"cutoff {int(cut[-1])} exceeds the "
                          f"{design.n_points}-point design")
    if obs.sigma_eta <= 0:
        raise ConfigError("residual accumulation needs sigma_eta > 0")
    times, pts_at = _observation_landmarks(design)
    if ref_index is not None and times[-1] < config.T:
        times = np.append(times, config.T)
    if max_landings is not None and len(vs) * len(times) > max_landings:
        raise BudgetExceededError(len(vs) * len(times), max_landings)

    lattice = ModeLattice(config.K)
    modes_f = lattice.modes.T.astype(float)
    y = obs.values
    paired = obs.ic_mode == "paired"
    y1 = y[0::2] if paired else y
    y2 = y[1::2] if paired else None

    b_tot = len(vs)
    acc = np.zeros((b_tot, len(cut)))
    dist2 = None
    if ref_index is not None:
        if b_tot > chunk:
            raise ConfigError("reference distances need the whole batch in "
                              "one chunk; raise chunk or shrink the batch")
        dist2 = np.zeros((b_tot, len(times)))

    def on_landing(sl, i, t, Z):
        if dist2 is not None:
            diff = Z - Z[ref_index]
            dist2[sl, i] = (diff.real ** 2 + diff.imag ** 2).sum(axis=1)
        pts = pts_at.get(i)
        if not pts:
            return
        pa = np.asarray(pts, dtype=np.intp)
        phase = np.exp((TWO_PI * 1j) * (design.x[pa] @ modes_f))
        vals = Z @ phase.T
        if paired:
            res2 = ((y1[pa] - vals.real) ** 2 + (y2[pa] - vals.imag) ** 2)
        elif obs.ic_mode == "single":
            res2 = (y[pa] - vals.real) ** 2
        else:
            sim = pa % 2 == 1
            r = vals.real.copy()
            r[:, sim] = vals.imag[:, sim]
            res2 = (y[pa] - r) ** 2
        for c in range(len(pa)):
            k0 = int(np.searchsorted(cut, pa[c], side="right"))
            if k0 < len(cut):
                acc[sl, k0:] += res2[:, c:c + 1]

    run_paired_batch(vs, ic_pair, config, times, on_landing, chunk=chunk)
    return acc, dist2, times


def _phi_at_nodes(params, log_prior, pmap: ParamMap, obs, ic_pair, cutoffs,
                  config, max_landings=None):
    """Potential values at quadrature nodes, one column per cutoff.

    Nodes outside the prior support stay at +inf without touching the
    solver.
    """
    phi = np.full((len(params), len(cutoffs)), np.inf)
    active = np.flatnonzero(np.isfinite(log_prior))
    if active.size:
        fields = [pmap.to_field(params[i]) for i in active]
        acc, _, _ = _residual_prefix_batch(fields, obs, ic_pair, cutoffs,
                                           config, max_landings=max_landings)
        phi[active] = acc / (2.0 * obs.sigma_eta ** 2)
    return phi


def _child_box(level: dict, spec: PriorSpec, anchor: int,
               half_mult: float, sigma_mult: float):
    """Zoom box for the next refinement level, in ball coordinates.

    Centered on the anchor-cutoff posterior mean with half-width the larger
    of `half_mult` parent cells and `sigma_mult` posterior standard
    deviations, then snapped outward to parent cell edges so each parent
    cell is either fully inside or fully outside the box.
    """
    lw = level["logp"] - level["phi"][:, anchor]
    finite = np.isfinite(lw)
    if not finite.any():
        raise NumericsError("zoom anchor posterior vanished on the grid")
    lw = lw - lw[finite].max()
    wts = np.where(finite, np.exp(np.maximum(lw, LOG_WEIGHT_FLOOR)), 0.0)
    wts /= wts.sum()
    W = spec.ball_scales * (level["params"] - spec.center)
    mean = wts @ W
    var = wts @ (W - mean) ** 2
    std = np.sqrt(np.maximum(var, 0.0))
    spacing = (level["hi"] - level["lo"]) / level["grid"]
    half = np.maximum(half_mult * spacing, sigma_mult * std)
    lo = level["lo"] + np.floor((mean - half - level["lo"]) / spacing) * spacing
    hi = level["lo"] + np.ceil((mean + half - level["lo"]) / spacing) * spacing
    lo = np.maximum(lo, level["lo"])
    hi = np.minimum(hi, level["hi"])
    if not (hi > lo).all():
        raise NumericsError("zoom box collapsed to zero extent")
    return lo, hi


def _stitched_posterior(spec: PriorSpec, obs, ic_pair, config, cutoffs,
                        grids, anchors, half_mult=2.5, sigma_mult=6.0,
                        max_landings=None):
    """Posterior quadrature on a stack of nested refinement grids.

    Level 0 tiles the full support box; each later level tiles a zoom box
    chosen from the previous level's posterior at the anchor cutoff.  Box
    edges land on parent cell edges, so parent cells covered by a child
    simply drop their volume and the union remains an exact partition fed
    through one midpoint rule.

    Returns (results, boxes): one QuadratureResult per cutoff, all sharing
    the stitched node set, plus the per-level box descriptions.
    """
    grids = list(grids)
    anchors = list(anchors)
    if len(anchors) != len(grids) - 1:
        raise ConfigError("need one zoom anchor per refinement step")
    if any(a < 0 or a >= len(cutoffs) for a in anchors):
        raise ConfigError("zoom anchors index into cutoffs")
    R = spec.radius
    levels = []
    box = None
    for li, g in enumerate(grids):
        params, logp, vol = quadrature_nodes(spec, g, box=box)
        phi = _phi_at_nodes(params, logp, spec.param_map, obs, ic_pair,
                            cutoffs, config, max_landings=max_landings)
        if box is None:
            lo, hi = np.full(spec.d, -R), np.full(spec.d, R)
        else:
            lo, hi = box
        levels.append({"params": params, "logp": logp, "phi": phi,
                       "vol": np.full(len(params), vol), "grid": g,
                       "lo": lo, "hi": hi})
        if li + 1 < len(grids):
            box = _child_box(levels[-1], spec, anchors[li],
                             half_mult, sigma_mult)
    for li in range(len(levels) - 1):
        child = levels[li + 1]
        W = spec.ball_scales * (levels[li]["params"] - spec.center)
        covered = np.all((W >= child["lo"]) & (W <= child["hi"]), axis=1)
        levels[li]["vol"][covered] = 0.0

    params_cat = np.concatenate([L["params"] for L in levels])
    logp_cat = np.concatenate([L["logp"] for L in levels])
    vol_cat = np.concatenate([L["vol"] for L in levels])
    phi_cat = np.concatenate([L["phi"] for L in levels])
    results = [posterior_from_phis(spec, grids[0], params_cat, logp_cat,
                                   phi_cat[:, ci].copy(), vol_cat)
               for ci in range(len(cutoffs))]
    boxes = [{"grid": int(L["grid"]), "lo": L["lo"].tolist(),
              "hi": L["hi"].tolist()} for L in levels]
    return results, boxes


def _prior_and_truth(cfg: dict):
    """Build the (ParamMap, PriorSpec, vstar params) triple used by the
    parametric experiments, validating that the truth sits inside the
    support."""
    pmap = ParamMap(tuple(tuple(int(x) for x in m) for m in cfg["modes"]))
    spec = PriorSpec(param_map=pmap, kind=cfg["prior_kind"],
                     radius=float(cfg["radius"]))
    vstar = np.asarray(cfg["vstar"], dtype=float)
    if vstar.shape != (pmap.d,):
        raise ConfigError(f"vstar must have {pmap.d} entries")
    if not spec.contains(vstar):
        raise ConfigError("vstar lies outside the prior support")
    return pmap, spec, vstar


# ---------------------------------------------------------------------------
# experiment runners

def illposedness_demo(cfg: dict, seeds, sched: dict, workdir, experiment_id):
    """Radial flows around a radially symmetric scalar leave no trace.

    Part A integrates the rotation family at several strengths from the
    invariant initial condition and records the worst coefficient spread
    across the family.  Part B fits the rotation strength from single-IC
    data and reports total variation to the flat prior on the strength
    grid.  Part C repeats the fit with the spanning IC pair and reports how
    much mass lands near the data-generating strength.
    """
    solver_cfg = SolverConfig(kappa=cfg["kappa"], T=cfg["T"], K=cfg["K"])
    n_obs = int(sched["n_obs"])
    seed = int(seeds[0])
    K = cfg["K"]
    theta_r = symmetric_ic(K)

    trajs = [solve(radial_flow(c), theta_r, solver_cfg)
             for c in cfg["c_values"]]
    base = trajs[0]
    coincidence = 0.0
    for traj in trajs[1:]:
        if len(traj.times) != len(base.times):
            raise NumericsError("family members checkpointed differently")
        coincidence = max(coincidence,
                          float(np.abs(traj.coeffs - base.coeffs).max()))

    design = sample_design(n_obs, cfg["T"], seed)
    c_star = float(cfg["c_star"])
    degenerate = ICPair(theta_r, theta_r, label="radial-invariant")
    n_grid = int(cfg["c_grid"])
    c_nodes = (np.arange(n_grid) + 0.5) * (cfg["c_max"] / n_grid)
    fields = [radial_flow(float(c)) for c in c_nodes]
    max_landings = cfg["max_node_landings"]

    obs1 = synthesize_data(radial_flow(c_star), design, degenerate,
                           cfg["sigma_eta"], seed, solver_cfg,
                           ic_mode="single", allow_degenerate=True)
    acc1, _, _ = _residual_prefix_batch(fields, obs1, degenerate, [n_obs],
                                        solver_cfg, max_landings=max_landings)
    phi1 = acc1[:, 0] / (2.0 * obs1.sigma_eta ** 2)

    def weights_of(phi):
        lw = -(phi - phi.min())
        w = np.exp(np.maximum(lw, LOG_WEIGHT_FLOOR))
        return w / w.sum()

    w1 = weights_of(phi1)
    tv_single = 0.5 * float(np.abs(w1 - 1.0 / n_grid).sum())

    spanning = canonical_ic_pair(K=K)
    obs2 = synthesize_data(radial_flow(c_star), design, spanning,
                           cfg["sigma_eta"], seed, solver_cfg)
    acc2, _, _ = _residual_prefix_batch(fields, obs2, spanning, [n_obs],
                                        solver_cfg, max_landings=max_landings)
    w2 = weights_of(acc2[:, 0] / (2.0 * obs2.sigma_eta ** 2))
    near = np.abs(c_nodes - c_star) <= cfg["concentration_halfwidth"]
    mass_near = float(w2[near].sum())
    c_mean = float(w2 @ c_nodes)

    return {
        "coincidence_sup": coincidence,
        "tv_single_ic_to_prior": tv_single,
        "single_ic_weight_range": [float(w1.min()), float(w1.max())],
        "mass_near_cstar_two_ic": mass_near,
        "c_mean_two_ic": c_mean,
        "c_grid_nodes": int(n_grid),
    }


def injectivity_probe(cfg: dict, seeds, sched: dict, workdir, experiment_id):
    """Pairwise trajectory separation over a plane of one-mode velocities.

    All fields advance together; a trapezoid-weighted Gram matrix of the
    packed states turns into every pairwise time-integrated L2 distance at
    once.  Halving the time grid gives a quadrature error estimate, and a
    deliberately degenerate initial condition supplies the control pair
    whose distance should vanish.
    """
    solver_cfg = SolverConfig(kappa=cfg["kappa"], T=cfg["T"], K=cfg["K"])
    pmap = ParamMap(((1, 0),))
    a = float(cfg["grid_extent"])
    gn = int(cfg["grid_points"])
    axis = np.linspace(-a, a, gn)
    P = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    fields = [pmap.to_field(p) for p in P]
    b = len(fields)
    nt = int(sched["time_grid"])
    if nt < 5 or nt % 2 == 0:
        raise ConfigError("time_grid must be odd and at least 5")
    times = np.linspace(0.0, cfg["T"], nt)

    def trapezoid_weights(ts):
        w = np.empty(len(ts))
        w[0] = 0.5 * (ts[1] - ts[0])
        w[-1] = 0.5 * (ts[-1] - ts[-2])
        w[1:-1] = 0.5 * (ts[2:] - ts[:-2])
        return w

    wf = trapezoid_weights(times)
    wc = trapezoid_weights(times[::2])
    gram_f = np.zeros((b, b), dtype=complex)
    gram_c = np.zeros((b, b), dtype=complex)

    def on_landing(sl, i, t, Z):
        G = Z @ Z.conj().T
        gram_f[:] += wf[i] * G
        if i % 2 == 0:
            gram_c[:] += wc[i // 2] * G

    ics = canonical_ic_pair(K=cfg["K"])
    run_paired_batch(fields, ics, solver_cfg, times, on_landing)

    def pair_distances(gram):
        diag = np.real(np.diag(gram))
        D2 = diag[:, None] + diag[None, :] - 2.0 * np.real(gram)
        return np.sqrt(np.maximum(D2, 0.0))

    Df = pair_distances(gram_f)
    Dc = pair_distances(gram_c)
    off = ~np.eye(b, dtype=bool)
    d_min = float(Df[off].min())
    d_median = float(np.median(Df[off]))
    err_est = float(np.abs(Df - Dc)[off].max())
    margin = d_min / err_est if err_est > 0 else float("inf")

    theta_r = symmetric_ic(cfg["K"])
    degenerate = ICPair(theta_r, theta_r, label="radial-invariant")
    ctrl_fields = [radial_flow(0.0), radial_flow(float(cfg["control_c"]))]
    gram_ctrl = np.zeros((2, 2), dtype=complex)

    def on_ctrl(sl, i, t, Z):
        gram_ctrl[:] += wf[i] * (Z @ Z.conj().T)

    run_paired_batch(ctrl_fields, degenerate, solver_cfg, times, on_ctrl)
    Dctrl = pair_distances(gram_ctrl)

    return {
        "n_fields": int(b),
        "min_pair_distance": d_min,
        "median_pair_distance": d_median,
        "quadrature_error_estimate": err_est,
        "margin_ratio": float(margin),
        "control_distance": float(Dctrl[0, 1]),
    }


def decomposition_experiment(cfg: dict, seeds, sched: dict, workdir,
                             experiment_id):
    """Empirical misfit splits into noise variance plus trajectory gap.

    Over a small net of velocities around the truth, the running mean of
    squared residuals should approach sigma^2 plus half the time-averaged
    squared trajectory distance to the truth.  The worst-case deviation
    over the net is tracked against the observation count and fitted with
    a power law.
    """
    solver_cfg = SolverConfig(kappa=cfg["kappa"], T=cfg["T"], K=cfg["K"])
    pmap, spec, vstar = _prior_and_truth(cfg)
    h = float(cfg["net_halfwidth"])
    offsets = np.stack(np.meshgrid(*([np.array([-h, 0.0, h])] * pmap.d),
                                   indexing="ij"), axis=-1).reshape(-1, pmap.d)
    net = vstar[None, :] + offsets
    ref_index = int(np.flatnonzero((offsets == 0).all(axis=1))[0])
    fields = [pmap.to_field(p) for p in net]
    ics = canonical_ic_pair(K=cfg["K"])
    cutoffs = [int(n) for n in sched["n_obs"]]
    n_max = cutoffs[-1]
    sigma = float(cfg["sigma_eta"])
    T = float(cfg["T"])
    vstar_f = pmap.to_field(vstar)

    sup_res = np.empty((len(seeds), len(cutoffs)))
    exponents = np.empty(len(seeds))
    for si, seed in enumerate(seeds):
        design = sample_design(n_max, T, int(seed))
        obs = synthesize_data(vstar_f, design, ics, sigma, int(seed),
                              solver_cfg)
        acc, dist2, times = _residual_prefix_batch(
            fields, obs, ics, cutoffs, solver_cfg, ref_index=ref_index,
            max_landings=cfg["max_node_landings"])
        D2 = np.trapezoid(dist2, times, axis=1)
        limit = sigma ** 2 + D2 / (2.0 * T)
        Ns = np.asarray(cutoffs, dtype=float)
        resid = np.abs(acc / (2.0 * Ns[None, :]) - limit[:, None])
        sup_res[si] = resid.max(axis=0)
        slope = np.polyfit(np.log(Ns), np.log(sup_res[si]), 1)[0]
        exponents[si] = -slope

    med_sup = np.median(sup_res, axis=0)
    med_exp = float(np.median(exponents))
    return {
        "n_obs": cutoffs,
        "sup_residual_per_seed": sup_res.tolist(),
        "sup_residual_median": med_sup.tolist(),
        "decay_exponent_per_seed": exponents.tolist(),
        "decay_exponent_median": med_exp,
        "residual_decreases": bool(med_sup[-1] < med_sup[0]),
        "net_size": int(len(fields)),
    }


def contraction_experiment(cfg: dict, seeds, sched: dict, workdir,
                           experiment_id):
    """Posterior ball mass around the truth as observations accumulate.

    For each seed one long design is drawn, data are synthesized at the
    true velocity, and the stitched quadrature evaluates the posterior at
    every observation-count cutoff in a single batched pass.  Medians over
    seeds of the epsilon-ball mass and the mean-to-truth distance are the
    quantities of interest.
    """
    solver_cfg = SolverConfig(kappa=cfg["kappa"], T=cfg["T"], K=cfg["K"])
    pmap, spec, vstar = _prior_and_truth(cfg)
    vstar_f = pmap.to_field(vstar)
    ics = canonical_ic_pair(K=cfg["K"])
    cutoffs = [int(n) for n in sched["n_obs"]]
    n_max = cutoffs[-1]
    sigma = float(cfg["sigma_eta"])
    eps = float(cfg["eps"])
    eps_grid = [float(e) for e in cfg["eps_grid"]]
    if eps not in eps_grid:
        raise ConfigError("eps_grid must contain the headline eps")
    grids = [int(g) for g in cfg["level_grids"]]
    anchors = [int(a) for a in cfg["zoom_anchor_cutoffs"]]
    m = spec.regularity.m

    node_bound = sum(g ** pmap.d for g in grids)
    est = node_bound * (n_max + 2) * len(seeds)
    if est > cfg["max_node_landings"]:
        raise BudgetExceededError(est, cfg["max_node_landings"])

    per_seed = []
    masses = np.empty((len(seeds), len(cutoffs)))
    dists = np.empty((len(seeds), len(cutoffs)))
    for si, seed in enumerate(seeds):
        design = sample_design(n_max, cfg["T"], int(seed))
        obs = synthesize_data(vstar_f, design, ics, sigma, int(seed),
                              solver_cfg)
        results, boxes = _stitched_posterior(
            spec, obs, ics, solver_cfg, cutoffs, grids, anchors,
            half_mult=cfg["zoom_half_mult"], sigma_mult=cfg["zoom_sigma_mult"])
        entry = {"seed": int(seed), "boxes": boxes, "mass": [], "dist": [],
                 "mean": [], "log_normalizer": [],
                 "mass_grid": [[float(res.ball_mass(vstar, e, m))
                                for res in results] for e in eps_grid]}
        for ci, res in enumerate(results):
            mass = res.ball_mass(vstar, eps, m)
            mean = res.mean_params()
            dist = pmap.param_distance(mean, vstar, m)
            masses[si, ci] = mass
            dists[si, ci] = dist
            entry["mass"].append(float(mass))
            entry["dist"].append(float(dist))
            entry["mean"].append([float(x) for x in mean])
            entry["log_normalizer"].append(float(res.log_normalizer))
        per_seed.append(entry)

    med_mass = np.median(masses, axis=0)
    med_dist = np.median(dists, axis=0)
    grid_stack = np.array([e["mass_grid"] for e in per_seed])
    return {
        "n_obs": cutoffs,
        "eps_grid": eps_grid,
        "per_seed": per_seed,
        "mass_median": med_mass.tolist(),
        "dist_median": med_dist.tolist(),
        "mass_grid_median": np.median(grid_stack, axis=0).tolist(),
        "mass_monotone": bool((np.diff(med_mass) >= 0).all()),
        "final_mass": float(med_mass[-1]),
        "dist_decreasing": bool((np.diff(med_dist) < 0).all()),
    }


def sampler_check(cfg: dict, seeds, sched: dict, workdir, experiment_id):
    """pCN sampler against its two exact references.

    A chain with the potential switched off must reproduce prior moments; a
    chain with data must agree with the stitched quadrature mean to within
    a few batch-means standard errors.  Chain traces are written to CSV and
    hashed so reruns can assert byte identity.
    """
    solver_cfg = SolverConfig(kappa=cfg["kappa"], T=cfg["T"], K=cfg["K"])
    pmap, spec, vstar = _prior_and_truth(cfg)
    seed = int(seeds[0])
    d = spec.d
    R = spec.radius

    free = pcn_chain(spec, ZeroPotential(), cfg["beta_free"],
                     int(sched["free_steps"]), stream(seed, CHAIN, 0))
    W = spec.ball_scales * (free.params - spec.center)
    second = (W ** 2).mean(axis=0)
    target = R ** 2 / (d + 2.0)
    moment_rel_err = np.abs(second - target) / target

    tiny = pcn_chain(spec, ZeroPotential(), cfg["beta_tiny"],
                     int(sched["tiny_steps"]), stream(seed, CHAIN, 1))

    n_obs = int(sched["n_obs"])
    ics = canonical_ic_pair(K=cfg["K"])
    design = sample_design(n_obs, cfg["T"], seed)
    obs = synthesize_data(pmap.to_field(vstar), design, ics,
                          cfg["sigma_eta"], seed, solver_cfg)
    pot = Potential(obs, ics, solver_cfg)
    data = pcn_chain(spec, pot, cfg["beta_data"], int(sched["data_steps"]),
                     stream(seed, CHAIN, 2), burn_in=int(sched["burn_in"]))
    chain_mean = data.mean()
    chain_se = data.standard_errors()

    results, _ = _stitched_posterior(
        spec, obs, ics, solver_cfg, [n_obs],
        [int(g) for g in cfg["quad_grids"]],
        [int(a) for a in cfg["quad_anchor_cutoffs"]],
        half_mult=cfg["zoom_half_mult"], sigma_mult=cfg["zoom_sigma_mult"],
        max_landings=cfg["max_node_landings"])
    quad_mean = results[0].mean_params()
    mean_z = np.abs(chain_mean - quad_mean) / chain_se

    own_dir = workdir is None
    out_dir = tempfile.mkdtemp(prefix="chains-") if own_dir else str(workdir)
    os.makedirs(out_dir, exist_ok=True)
    hashes = {}
    try:
        for name, trace in (("free", free), ("data", data)):
            path = os.path.join(out_dir, f"{experiment_id}-{name}.csv")
            save_trace_csv(trace, path)
            hashes[name] = _sha256_file(path)
            if own_dir:
                os.unlink(path)
    finally:
        if own_dir:
            os.rmdir(out_dir)

    return {
        "free_moment_rel_err": moment_rel_err.tolist(),
        "free_moment_rel_err_max": float(moment_rel_err.max()),
        "free_acceptance": float(free.acceptance_rate),
        "tiny_beta_acceptance": float(tiny.acceptance_rate),
        "data_acceptance": float(data.acceptance_rate),
        "data_beta_final": float(data.beta_final),
        "chain_mean": chain_mean.tolist(),
        "chain_se": chain_se.tolist(),
        "quadrature_mean": quad_mean.tolist(),
        "mean_z": mean_z.tolist(),
        "mean_z_max": float(mean_z.max()),
        "trace_sha256": hashes,
    }


# ---------------------------------------------------------------------------
# dispatch

_COMMON = {"kappa": 0.05, "T": 1.0, "K": 5}

DEFAULT_CONFIGS = {
    "illposedness": dict(_COMMON, c_values=[0.0, 1.0, 5.0], c_star=1.0,
                         c_max=5.0, c_grid=41, sigma_eta=0.05,
                         concentration_halfwidth=0.25,
                         max_node_landings=2_000_000),
    "injectivity": dict(_COMMON, grid_extent=0.35, grid_points=5,
                        control_c=1.0, max_node_landings=1_000_000),
    "decomposition": dict(_COMMON, modes=[[1, 0]], prior_kind="uniform",
                          radius=1.0, vstar=[0.35, -0.2], net_halfwidth=0.25,
                          sigma_eta=0.05, max_node_landings=10_000_000),
    "contraction": dict(_COMMON, modes=[[1, 0]], prior_kind="uniform",
                        radius=1.0, vstar=[0.35, -0.2], sigma_eta=0.05,
                        eps=0.1, eps_grid=[0.05, 0.1, 0.2],
                        level_grids=[27, 27, 33],
                        zoom_anchor_cutoffs=[0, 1], zoom_half_mult=2.5,
                        zoom_sigma_mult=6.0, max_node_landings=200_000_000),
    "sampler_check": dict(_COMMON, modes=[[1, 0]], prior_kind="uniform",
                          radius=1.0, vstar=[0.35, -0.2], sigma_eta=0.05,
                          beta_free=0.6, beta_tiny=0.005, beta_data=0.1,
                          quad_grids=[27, 27], quad_anchor_cutoffs=[0],
                          zoom_half_mult=2.5, zoom_sigma_mult=6.0,
                          max_node_landings=5_000_000),
}

DEFAULT_SCHEDULES = {
    "illposedness": {"n_obs": 10000},
    "injectivity": {"time_grid": 129},
    "decomposition": {"n_obs": [100, 450, 2000, 9000, 40000]},
    "contraction": {"n_obs": [100, 1000, 10000]},
    "sampler_check": {"free_steps": 100000, "tiny_steps": 20000,
                      "data_steps": 25000, "burn_in": 2000, "n_obs": 200},
}

DEFAULT_SEEDS = {
    "illposedness": (401,),
    "injectivity": (),
    "decomposition": (801, 802, 803, 804, 805, 806, 807, 808, 809, 810),
    "contraction": (701, 702, 703, 704, 705),
    "sampler_check": (2024,),
}

_RUNNERS = {
    "illposedness": illposedness_demo,
    "injectivity": injectivity_probe,
    "decomposition": decomposition_experiment,
    "contraction": contraction_experiment,
    "sampler_check": sampler_check,
}


def _merge(kind: str, given, defaults: dict, label: str) -> dict:
    merged = {k: v for k, v in defaults.items()}
    if given:
        unknown = sorted(set(given) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown {label} keys for {kind}: "
                              f"{', '.join(unknown)}")
        merged.update(given)
    return merged


def run_experiment(kind: str, config=None, seeds=None, schedule=None,
                   workdir=None, experiment_id=None) -> ExperimentRecord:
    """Run one named experiment and wrap the outcome in a record.

    config and schedule override the kind's defaults key by key; unknown
    keys are rejected rather than ignored.  The record stores the resolved
    values, so rerunning a record never depends on the defaults staying
    fixed.
    """
    if kind not in _RUNNERS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choices: "
                          f"{', '.join(EXPERIMENT_KINDS)}")
    cfg = _merge(kind, config, DEFAULT_CONFIGS[kind], "config")
    sched = _merge(kind, schedule, DEFAULT_SCHEDULES[kind], "schedule")
    use_seeds = tuple(int(s) for s in
                      (DEFAULT_SEEDS[kind] if seeds is None else seeds))
    if kind != "injectivity" and not use_seeds:
        raise ConfigError(f"{kind} needs at least one seed")
    eid = experiment_id or f"{kind}-{_digest(cfg, sched, use_seeds)}"
    t0 = time.perf_counter()
    summaries = _RUNNERS[kind](cfg, use_seeds, sched, workdir, eid)
    wall = time.perf_counter() - t0
    return ExperimentRecord(experiment_id=eid, kind=kind, seeds=use_seeds,
                            config=cfg, schedule=sched,
                            summaries=_jsonable(summaries),
                            wall_clock_s=wall)


def rerun(record: ExperimentRecord, workdir=None) -> ExperimentRecord:
    """Repeat a recorded experiment from its stored inputs."""
    return run_experiment(record.kind, config=record.config,
                          seeds=record.seeds, schedule=record.schedule,
                          workdir=workdir, experiment_id=record.experiment_id)
