"""Command-line front end for reproducible batch runs.

Four work commands (`solve`, `observe`, `posterior`, `consistency`) each read
one flat JSON config file and write their outputs into --out; `defaults`
prints the documented key set.  Every command is a pure function of the
config and input files: all randomness flows through named seeds, files are
atomically renamed into place, and identical inputs give byte-identical
outputs (the experiment record's wall_clock_s field is the one labeled
exception).

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 budget guard.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import consistency
from .errors import BudgetExceededError, ConfigError, NumericsError
from .inference import (MAX_QUAD_DIM, ParamMap, Potential, PriorSpec,
                        ZeroPotential, pcn_chain, quadrature_posterior,
                        save_quadrature_json, save_trace_csv)
from .observations import (ICPair, canonical_ic_pair, load_observations_csv,
                           sample_design, save_observations_csv,
                           synthesize_data)
from .presets import (radial_flow, random_scalar, random_velocity, sin_x1,
                      sin_x2, stream_cos_x2, symmetric_ic)
from .rng import CHAIN, stream
from .solver import SolverConfig, energy_report, export_trajectory, solve
from .fields import FourierVelocityField, load_field_csv

_REQUIRED = object()

# key -> (default, caster, help); _REQUIRED defaults must appear in the config
_FLOAT = float
_INT = int


def _str(x):
    if not isinstance(x, str):
        raise ConfigError(f"expected a string, got {type(x).__name__}")
    return x


def _int_list(x):
    if not isinstance(x, list) or not x:
        raise ConfigError("expected a non-empty list of integers")
    return [int(v) for v in x]


def _mode_list(x):
    if not isinstance(x, list) or not x:
        raise ConfigError("expected a non-empty list of [k1, k2] pairs")
    out = []
    for m in x:
        if not isinstance(m, list) or len(m) != 2:
            raise ConfigError("each mode must be a [k1, k2] pair")
        out.append((int(m[0]), int(m[1])))
    return tuple(out)


_SOLVER_KEYS = {
    "kappa": (_REQUIRED, _FLOAT, "diffusivity, must be positive"),
    "T": (1.0, _FLOAT, "final time"),
    "K": (16, _INT, "scalar truncation radius"),
    "dt_max": (0.01, _FLOAT, "step ceiling; shrinks further under the CFL cap"),
    "grid_n": (0, _INT, "dealiasing grid per side, 0 = automatic"),
}

_VELOCITY_KEYS = {
    "velocity_preset": ("heat", _str,
                        "heat | radial-symmetry | stream-cos | random"),
    "velocity_c": (1.0, _FLOAT, "strength for the radial-symmetry preset"),
    "velocity_K": (2, _INT, "truncation for the random velocity preset"),
    "velocity_s": (3.0, _FLOAT, "spectral decay for the random velocity preset"),
    "velocity_norm": (1.0, _FLOAT, "L2 norm for the random velocity preset"),
    "velocity_seed": (1, _INT, "seed for the random velocity preset"),
    "velocity_file": ("", _str, "coefficient CSV; overrides velocity_preset"),
}

_IC_PAIR_KEYS = {
    "ic_pair": ("canonical", _str, "canonical | radial-invariant"),
    "ic_K": (1, _INT, "truncation of the initial conditions"),
    "ic_mode": ("paired", _str, "paired | single | alternating"),
    "ic1_file": ("", _str, "scalar field CSV for the first initial state; "
                           "overrides ic_pair, needs ic2_file"),
    "ic2_file": ("", _str, "scalar field CSV for the second initial state"),
}

_SCHEMAS = {
    "solve": dict(_SOLVER_KEYS, **_VELOCITY_KEYS, **{
        "h_chk": (1.0 / 64.0, _FLOAT, "snapshot spacing of the export"),
        "energy_h_chk": (0.001, _FLOAT,
                         "snapshot spacing of the energy report solve"),
        "theta0_preset": ("sin-x1", _str,
                          "sin-x1 | sin-x2 | radial-invariant | random"),
        "theta0_seed": (2, _INT, "seed for the random scalar preset"),
        "theta0_file": ("", _str, "coefficient CSV; overrides theta0_preset"),
    }),
    "observe": dict(_SOLVER_KEYS, **_VELOCITY_KEYS, **_IC_PAIR_KEYS, **{
        "n_obs": (_REQUIRED, _INT, "number of design points"),
        "sigma_eta": (0.05, _FLOAT, "noise level; 0 stores exact values"),
        "seed": (0, _INT, "master seed for design and noise streams"),
    }),
    "posterior": dict(_SOLVER_KEYS, **_IC_PAIR_KEYS, **{
        "obs_file": (_REQUIRED, _str, "observation CSV produced by observe"),
        "prior_modes": ([[1, 0]], _mode_list,
                        "represented velocity modes, one [k1, k2] per dof pair"),
        "prior_kind": ("uniform", _str, "uniform | gaussian"),
        "prior_radius": (1.0, _FLOAT, "support radius of the prior"),
        "prior_alpha": (4.5, _FLOAT, "spectral decay of the gaussian kind"),
        "prior_tau0": (1.0, _FLOAT, "scale of the gaussian kind"),
        "beta": (0.1, _FLOAT, "pCN proposal size"),
        "n_steps": (20000, _INT, "chain length"),
        "burn_in": (2000, _INT, "discarded prefix; beta adapts inside it"),
        "seed": (0, _INT, "master seed for the chain stream"),
        "quad_grid": (33, _INT, "quadrature nodes per dimension"),
    }),
    "consistency": {
        "experiment": (_REQUIRED, _str,
                       " | ".join(consistency.EXPERIMENT_KINDS)),
        "seeds": ([], _int_list, "replicate seeds; empty keeps the defaults"),
        "n_schedule": ([], _int_list,
                       "size schedule; empty keeps the kind's default"),
        "budget": (0, _INT, "node-landing budget cap; 0 keeps the default"),
    },
}

_IC_PAIR_CHOICES = ("canonical", "radial-invariant")


def _load_config(path, command: str) -> dict:
    schema = _SCHEMAS[command]
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") \
            from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: "
                          f"{', '.join(unknown)}")
    cfg = {}
    for key, (default, caster, _help) in schema.items():
        if key in raw:
            try:
                cfg[key] = caster(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for config key {key}: {exc}") \
                    from None
        elif default is _REQUIRED:
            raise ConfigError(
                f"missing required config key for {command}: {key}")
        else:
            cfg[key] = default
    return cfg


def _atomic_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, payload) -> None:
    _atomic_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, float)
                              else str(x) for x in row))
    _atomic_text(path, "\n".join(lines) + "\n")


def _resolve_velocity(cfg: dict):
    if cfg["velocity_file"]:
        field = load_field_csv(cfg["velocity_file"])
        if not isinstance(field, FourierVelocityField):
            raise ConfigError(f"{cfg['velocity_file']} does not hold a "
                              "velocity field")
        return field
    preset = cfg["velocity_preset"]
    if preset == "heat":
        return radial_flow(0.0)
    if preset == "radial-symmetry":
        return radial_flow(cfg["velocity_c"])
    if preset == "stream-cos":
        return stream_cos_x2()
    if preset == "random":
        return random_velocity(cfg["velocity_K"],
                               stream(cfg["velocity_seed"], CHAIN, 99),
                               cfg["velocity_s"], norm=cfg["velocity_norm"])
    raise ConfigError(f"unknown velocity_preset {preset!r}")


def _resolve_theta0(cfg: dict):
    if cfg["theta0_file"]:
        return load_field_csv(cfg["theta0_file"])
    preset = cfg["theta0_preset"]
    if preset == "sin-x1":
        return sin_x1()
    if preset == "sin-x2":
        return sin_x2()
    if preset == "radial-invariant":
        return symmetric_ic()
    if preset == "random":
        return random_scalar(2, stream(cfg["theta0_seed"], CHAIN, 98))
    raise ConfigError(f"unknown theta0_preset {preset!r}")


def _resolve_ic_pair(cfg: dict):
    if cfg["ic1_file"] or cfg["ic2_file"]:
        if not (cfg["ic1_file"] and cfg["ic2_file"]):
            raise ConfigError("ic1_file and ic2_file must be given together")
        thetas = []
        for key in ("ic1_file", "ic2_file"):
            field = load_field_csv(cfg[key])
            if isinstance(field, FourierVelocityField):
                raise ConfigError(f"{cfg[key]} holds a velocity field, "
                                  "not a scalar initial state")
            thetas.append(field)
        # user-supplied pairs go through the normal spanning check
        return ICPair(thetas[0], thetas[1], label="custom"), False
    name = cfg["ic_pair"]
    if name == "canonical":
        return canonical_ic_pair(K=cfg["ic_K"]), False
    if name == "radial-invariant":
        theta = symmetric_ic(cfg["ic_K"])
        return ICPair(theta, theta, label="radial-invariant"), True
    raise ConfigError(f"unknown ic_pair {name!r}; choices: "
                      f"{', '.join(_IC_PAIR_CHOICES)}")


def _solver_config(cfg: dict, h_chk=None) -> SolverConfig:
    return SolverConfig(kappa=cfg["kappa"], T=cfg["T"], K=cfg["K"],
                        dt_max=cfg["dt_max"],
                        grid_n=cfg["grid_n"] or None, h_chk=h_chk)


def cmd_solve(cfg: dict, out: str) -> None:
    v = _resolve_velocity(cfg)
    theta0 = _resolve_theta0(cfg)
    traj = solve(v, theta0, _solver_config(cfg, h_chk=cfg["h_chk"]))
    export_trajectory(traj, os.path.join(out, "trajectory"))
    fine = solve(v, theta0, _solver_config(cfg, h_chk=cfg["energy_h_chk"]))
    rep = energy_report(fine)
    _write_csv(os.path.join(out, "energy_report.csv"),
               "t,l2_sq,grad_sq,dissipation_integral,residual",
               zip(map(float, rep.t), map(float, rep.l2_sq),
                   map(float, rep.grad_sq),
                   map(float, rep.dissipation_integral),
                   map(float, rep.residual)))
    print(f"solve: {traj.n_snapshots} snapshots, "
          f"worst energy residual {rep.worst:.3e}")


def cmd_observe(cfg: dict, out: str) -> None:
    v = _resolve_velocity(cfg)
    ic_pair, degenerate = _resolve_ic_pair(cfg)
    design = sample_design(cfg["n_obs"], cfg["T"], cfg["seed"])
    obs = synthesize_data(v, design, ic_pair, cfg["sigma_eta"], cfg["seed"],
                          _solver_config(cfg), ic_mode=cfg["ic_mode"],
                          allow_degenerate=degenerate)
    save_observations_csv(obs, os.path.join(out, "observations.csv"))
    print(f"observe: wrote {obs.n_data} rows for {cfg['n_obs']} design points")


def cmd_posterior(cfg: dict, out: str) -> None:
    obs = load_observations_csv(cfg["obs_file"])
    ic_pair, degenerate = _resolve_ic_pair(cfg)
    pmap = ParamMap(cfg["prior_modes"])
    spec = PriorSpec(param_map=pmap, kind=cfg["prior_kind"],
                     radius=cfg["prior_radius"], alpha=cfg["prior_alpha"],
                     tau0=cfg["prior_tau0"])
    solver_cfg = _solver_config(cfg)
    if obs.design.n_points == 0:
        pot = ZeroPotential()
    else:
        pot = Potential(obs, ic_pair, solver_cfg,
                        allow_degenerate=degenerate)
    trace = pcn_chain(spec, pot, cfg["beta"], cfg["n_steps"],
                      stream(cfg["seed"], CHAIN, 0), burn_in=cfg["burn_in"])
    save_trace_csv(trace, os.path.join(out, "chain.csv"))
    summary = {
        "chain_mean": trace.mean().tolist(),
        "chain_se": trace.standard_errors().tolist(),
        "acceptance_rate": trace.acceptance_rate,
        "beta_final": trace.beta_final,
        "dof_names": list(pmap.dof_names()),
    }
    if pmap.d <= MAX_QUAD_DIM:
        quad = quadrature_posterior(spec, pot, cfg["quad_grid"])
        save_quadrature_json(quad, os.path.join(out, "quadrature.json"))
        qmean = quad.mean_params()
        z = np.abs(trace.mean() - qmean) / trace.standard_errors()
        summary["quadrature_mean"] = qmean.tolist()
        summary["mean_z"] = z.tolist()
        summary["mean_agreement_3se"] = bool(z.max() <= 3.0)
    else:
        msg = (f"quadrature refused: {pmap.d} dofs exceed the "
               f"{MAX_QUAD_DIM}-dimensional grid limit; chain output only")
        summary["quadrature_refused"] = msg
        print(msg, file=sys.stderr)
    _write_json(os.path.join(out, "posterior_summary.json"), summary)
    print(f"posterior: acceptance {trace.acceptance_rate:.3f}, "
          f"chain written to {os.path.join(out, 'chain.csv')}")


def _consistency_overrides(kind: str, cfg: dict):
    seeds = tuple(cfg["seeds"]) or None
    sched = None
    if cfg["n_schedule"]:
        ns = cfg["n_schedule"]
        if kind in ("decomposition", "contraction"):
            sched = {"n_obs": ns}
        elif kind == "injectivity":
            if len(ns) != 1:
                raise ConfigError("injectivity takes a single-entry "
                                  "n_schedule (the time grid size)")
            sched = {"time_grid": ns[0]}
        else:
            if len(ns) != 1:
                raise ConfigError(f"{kind} takes a single-entry n_schedule")
            sched = {"n_obs": ns[0]}
    overrides = None
    if cfg["budget"]:
        overrides = {"max_node_landings": cfg["budget"]}
    return overrides, seeds, sched


def cmd_consistency(cfg: dict, out: str) -> None:
    kind = cfg["experiment"]
    if kind not in consistency.EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment {kind!r}; choices: "
                          f"{', '.join(consistency.EXPERIMENT_KINDS)}")
    overrides, seeds, sched = _consistency_overrides(kind, cfg)
    record = consistency.run_experiment(kind, config=overrides, seeds=seeds,
                                        schedule=sched, workdir=out)
    consistency.save_record(record,
                            os.path.join(out, f"{record.experiment_id}.json"))
    s = record.summaries
    if kind == "contraction":
        rows = [(float(e), int(n), float(s["mass_grid_median"][ei][ni]),
                 float(s["dist_median"][ni]))
                for ei, e in enumerate(s["eps_grid"])
                for ni, n in enumerate(s["n_obs"])]
        _write_csv(os.path.join(out, "contraction.csv"),
                   "eps,n_obs,mass_median,dist_median", rows)
    elif kind == "decomposition":
        rows = [(int(n), float(s["sup_residual_median"][ni]))
                for ni, n in enumerate(s["n_obs"])]
        _write_csv(os.path.join(out, "decomposition.csv"),
                   "n_obs,sup_residual_median", rows)
    print(f"consistency: {record.experiment_id} done in "
          f"{record.wall_clock_s:.1f}s")


def cmd_defaults(command=None) -> None:
    names = [command] if command else sorted(_SCHEMAS)
    if command and command not in _SCHEMAS:
        raise ConfigError(f"unknown command {command!r}; choices: "
                          f"{', '.join(sorted(_SCHEMAS))}")
    payload = {}
    for name in names:
        payload[name] = {
            key: {"default": ("(required)" if default is _REQUIRED
                              else default),
                  "help": help_}
            for key, (default, _caster, help_) in _SCHEMAS[name].items()
        }
    print(json.dumps(payload, indent=2, sort_keys=True))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scalarflow",
        description="advected scalar solves, synthetic observations, and "
                    "posterior inference on the periodic unit square")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
            ("solve", "integrate one velocity/scalar pair and export it"),
            ("observe", "synthesize a noisy point-observation set"),
            ("posterior", "run pCN and quadrature against an observation set"),
            ("consistency", "run one packaged verification experiment")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True,
                       help="flat JSON config file; see the defaults command")
        p.add_argument("--out", default=".",
                       help="output directory (created if absent)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap; computations are deterministic and "
                            "currently single-threaded")
    p = sub.add_parser("defaults", help="print the documented config keys")
    p.add_argument("target", nargs="?",
                   help="limit the listing to one command")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "defaults":
            cmd_defaults(args.target)
            return 0
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = _load_config(args.config, args.command)
        os.makedirs(args.out, exist_ok=True)
        {"solve": cmd_solve, "observe": cmd_observe,
         "posterior": cmd_posterior, "consistency": cmd_consistency}[
             args.command](cfg, args.out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceededError as exc:
        print(f"budget guard: {exc}", file=sys.stderr)
        return 4
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
