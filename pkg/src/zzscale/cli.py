"""Command-line front end.

Every subcommand reads an optional ``--config`` file (flat key=value, see
``--help`` for the key registry) with flags overriding file values, honors
``--seed`` (drawing and recording a fresh seed when omitted) and writes its
outputs plus a manifest under ``--out``.

Exit codes: 0 ok, 1 in-run assertion failure, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import secrets
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .asymptotics import DriftFunction, ou_params, simulate_ou, solve_fluid_ode
from .config import CONFIG_KEYS, ConfigError, RunConfig, parse_config, parse_n_grid, parse_x_grid
from .models import Dataset, fit_mle, generate_data
from .pdmp import BoundViolation, PhaseState, SimBudget, simulate
from .rates import ZigZagProcess

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_FLAG_TO_KEY = {
    "model": "model.kind",
    "x0": "model.x0",
    "truth": "model.truth",
    "scheme": "scheme",
    "m": "scheme.m",
    "reference": "scheme.reference",
    "mixed_radius": "scheme.mixed_radius",
    "n": "run.n",
    "ngrid": "run.n_grid",
    "t_max": "run.t_max",
    "dt": "run.dt",
    "replicates": "run.replicates",
    "start_offset": "run.start_offset",
    "epsilon": "run.epsilon",
    "grid": "run.grid",
    "xstar": "run.x_star",
    "schemes": "run.schemes",
    "seed": "seed",
    "out": "out",
}

_SUBCOMMANDS = (
    "generate-data",
    "sample",
    "fluid",
    "ou",
    "drift-table",
    "scaling",
    "transient",
    "stationary",
    "mixed",
)


def _config_epilog() -> str:
    lines = ["config keys (file form; flags override):"]
    for key, (help_text, default) in CONFIG_KEYS.items():
        dflt = f" [default: {default}]" if default else ""
        lines.append(f"  {key:<22} {help_text}{dflt}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zzscale",
        description="Zig-Zag sampling with exact sub-sampling and its large-sample limits.",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, epilog=_config_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", type=Path, help="key=value config file")
        p.add_argument("--model", help="model family (model.kind)")
        p.add_argument("--x0", help="true parameter, comma separated (model.x0)")
        p.add_argument("--truth", help="data-generating law (model.truth)")
        p.add_argument("--scheme", help="rate estimator (scheme)")
        p.add_argument("--m", help="mini-batch size (scheme.m)")
        p.add_argument("--reference", help="cv/mixed reference point (scheme.reference)")
        p.add_argument("--mixed-radius", dest="mixed_radius", help="mixed switch radius (scheme.mixed_radius)")
        p.add_argument("--n", help="dataset size (run.n)")
        p.add_argument("--ngrid", help="dataset-size grid (run.n_grid)")
        p.add_argument("--t-max", dest="t_max", help="horizon (run.t_max)")
        p.add_argument("--dt", help="output step (run.dt)")
        p.add_argument("--replicates", help="replicates (run.replicates)")
        p.add_argument("--start-offset", dest="start_offset", help="transient start offset (run.start_offset)")
        p.add_argument("--epsilon", help="confinement tube half-width (run.epsilon)")
        p.add_argument("--grid", help="drift-table grid lo:hi:step (run.grid)")
        p.add_argument("--xstar", help="limiting reference point (run.x_star)")
        p.add_argument("--schemes", help="comma list of schemes (run.schemes)")
        p.add_argument("--seed", help="root seed (seed)")
        p.add_argument("--out", help="output directory (out)")
        p.add_argument("--data", type=Path, help="existing dataset CSV (sample only)")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = RunConfig({})
    if args.config is not None:
        cfg = parse_config(Path(args.config).read_text())
    for flag, key in _FLAG_TO_KEY.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg.set(key, val)
    if not cfg.get("seed"):
        cfg.set("seed", secrets.randbits(63))
    return cfg


def _scheme_spec(cfg: RunConfig) -> ex.SchemeSpec:
    radius = cfg.get("scheme.mixed_radius")
    return ex.SchemeSpec(
        kind=cfg.get("scheme"),
        m=cfg.get_int("scheme.m"),
        reference=cfg.get("scheme.reference"),
        mixed_radius=float(radius) if radius else None,
    )


def _scheme_list(cfg: RunConfig) -> tuple:
    names = {"can": "canonical", "canonical": "canonical", "ss": "ss", "cv": "cv", "mixed": "mixed"}
    specs = []
    for tok in cfg.get("run.schemes").split(","):
        tok = tok.strip()
        if tok not in names:
            raise ConfigError(f"unknown scheme {tok!r} in run.schemes")
        specs.append(
            ex.SchemeSpec(
                kind=names[tok],
                m=cfg.get_int("scheme.m"),
                reference=cfg.get("scheme.reference"),
                mixed_radius=float(cfg.get("scheme.mixed_radius")) if cfg.get("scheme.mixed_radius") else None,
            )
        )
    return tuple(specs)


def _experiment_config(cfg: RunConfig, schemes) -> ex.ExperimentConfig:
    return ex.ExperimentConfig(
        model_kind=cfg.get("model.kind"),
        x0=cfg.get_floats("model.x0"),
        truth_kind=cfg.get("model.truth") or None,
        schemes=schemes,
        n=cfg.get_int("run.n"),
        n_grid=parse_n_grid(cfg.get("run.n_grid")) if cfg.get("run.n_grid") else (),
        replicates=cfg.get_int("run.replicates"),
        t_max=cfg.get_float("run.t_max"),
        dt=cfg.get_float("run.dt"),
        seed=cfg.get_int("seed"),
        start_offset=cfg.get_float("run.start_offset"),
        epsilon=cfg.get_float("run.epsilon"),
        out_dir=cfg.get("out"),
    )


def cmd_generate_data(cfg: RunConfig, args) -> int:
    model, truth = ex.make_model_truth(cfg.get("model.kind"), cfg.get_floats("model.x0"), cfg.get("model.truth") or None)
    data = generate_data(truth, cfg.get_int("run.n"), cfg.get_int("seed"))
    out = Path(cfg.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    data.to_csv(out / "dataset.csv", out / "dataset.meta")
    ex.write_manifest(out / "generate_data.manifest", {"seed": cfg.get_int("seed"), **data.provenance, "n": data.n})
    print(f"wrote {out / 'dataset.csv'} (n={data.n})")
    return EXIT_OK


def cmd_sample(cfg: RunConfig, args) -> int:
    model, truth = ex.make_model_truth(cfg.get("model.kind"), cfg.get_floats("model.x0"), cfg.get("model.truth") or None)
    seed = cfg.get_int("seed")
    if args.data is not None:
        meta = args.data.with_suffix(".meta")
        data = Dataset.from_csv(args.data, meta if meta.exists() else None)
    else:
        data = generate_data(truth, cfg.get_int("run.n"), np.random.default_rng([seed, 0]))
    spec = _scheme_spec(cfg)
    scheme = ex.make_scheme(spec, data, model)
    process = ZigZagProcess(scheme, data, model)
    x_hat = fit_mle(data, model)
    rng = np.random.default_rng([seed, 1])
    v0 = np.where(rng.random(model.dim) < 0.5, -1.0, 1.0)
    skel, ledger = simulate(process, PhaseState(x_hat, v0), SimBudget(t_max=cfg.get_float("run.t_max")), rng)
    out = Path(cfg.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    skel.to_csv(out / "skeleton.csv")
    ex.write_csv(
        out / "ledger.csv",
        ["proposals", "accepted", "grad_term_evals", "setup_grad_evals"],
        [(ledger.proposals, ledger.accepted, ledger.grad_term_evals, process.setup_grad_evals)],
    )
    ex.write_manifest(
        out / "sample.manifest",
        {"seed": seed, "scheme": spec.kind, "m": spec.m, "n": data.n, "t_max": cfg.get_float("run.t_max"), "model": cfg.get("model.kind")},
    )
    print(f"wrote {out / 'skeleton.csv'} ({skel.n_events} events, {ledger.proposals} proposals)")
    return EXIT_OK


def cmd_fluid(cfg: RunConfig, args) -> int:
    model, truth = ex.make_model_truth(cfg.get("model.kind"), cfg.get_floats("model.x0"), cfg.get("model.truth") or None)
    spec = _scheme_spec(cfg)
    x_star = np.array([cfg.get_float("run.x_star")]) if cfg.get("run.x_star") else np.array(cfg.get_floats("model.x0"))
    drift = DriftFunction(spec.kind, model, truth, m=spec.m, x_star=x_star, mixed_radius=spec.mixed_radius)
    x_start = np.array(cfg.get_floats("model.x0")) + cfg.get_float("run.start_offset")
    path = solve_fluid_ode(drift, x_start, cfg.get_float("run.t_max"))
    out = Path(cfg.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    d = model.dim
    ex.write_csv(out / "fluid_path.csv", ["t"] + [f"x{i+1}" for i in range(d)], [(t, *x) for t, x in zip(path.ts, path.xs)])
    ex.write_manifest(out / "fluid.manifest", {"seed": cfg.get_int("seed"), "scheme": spec.kind, "status": path.status})
    print(f"wrote {out / 'fluid_path.csv'} (status: {path.status})")
    return EXIT_OK


def cmd_ou(cfg: RunConfig, args) -> int:
    model, truth = ex.make_model_truth(cfg.get("model.kind"), cfg.get_floats("model.x0"), cfg.get("model.truth") or None)
    params = ou_params(model, truth, m=cfg.get_int("scheme.m"))
    ts, path = simulate_ou(params, cfg.get_float("run.t_max"), cfg.get_float("run.dt"), cfg.get_int("seed"))
    out = Path(cfg.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    d = params.d
    ex.write_csv(out / "ou_path.csv", ["t"] + [f"xi{i+1}" for i in range(d)], [(t, *row) for t, row in zip(ts, path)])
    ex.write_manifest(
        out / "ou.manifest",
        {"seed": cfg.get_int("seed"), "m": cfg.get_int("scheme.m"), "A11": params.A[0, 0], "I0_11": params.I0[0, 0]},
    )
    print(f"wrote {out / 'ou_path.csv'}")
    return EXIT_OK


def cmd_drift_table(cfg: RunConfig, args) -> int:
    schemes = (ex.SchemeSpec("canonical"), ex.SchemeSpec("ss"), ex.SchemeSpec("cv"))
    ecfg = _experiment_config(cfg, schemes)
    grid = parse_x_grid(cfg.get("run.grid"))
    x_star = np.array([cfg.get_float("run.x_star")]) if cfg.get("run.x_star") else None
    rows = ex.drift_table(ecfg, x_grid=np.array(grid), x_star=x_star)
    print(f"wrote {Path(cfg.get('out')) / 'drift_table.csv'} ({len(rows)} rows)")
    return EXIT_OK


def cmd_scaling(cfg: RunConfig, args) -> int:
    ecfg = _experiment_config(cfg, _scheme_list(cfg))
    rows, fits = ex.scaling_study(ecfg)
    for f in fits:
        print(f"{f['scheme']:>10} {f['quantity']:<28} slope {f['slope']:+.3f} (se {f['stderr']:.3f}, R2 {f['r2']:.4f})")
    return EXIT_OK


def cmd_transient(cfg: RunConfig, args) -> int:
    ecfg = _experiment_config(cfg, _scheme_list(cfg))
    rows = ex.transient_experiment(ecfg)
    worst = max(r[2] for r in rows)
    print(f"transient sup errors: worst {worst:.4f} over {len(rows)} runs")
    return EXIT_OK


def cmd_stationary(cfg: RunConfig, args) -> int:
    ecfg = _experiment_config(cfg, _scheme_list(cfg))
    summary, _ = ex.stationary_distribution_check(ecfg)
    for row in summary:
        print(f"{row[0]:>10}: KS {row[1]:.4f} var {row[2]:.4f} iact {row[3]:.4f} n_eff {row[4]:.0f}")
    return EXIT_OK


def cmd_mixed(cfg: RunConfig, args) -> int:
    ecfg = _experiment_config(cfg, _scheme_list(cfg))
    hits, radius = ex.mixed_comparison(ecfg)
    print(f"switch radius M = {radius:.4f}")
    for label in ("ss", "cv", "mixed"):
        vals = [h[2] for h in hits if h[0] == label]
        print(f"{label:>6}: median hit {np.median(vals):.3f}")
    return EXIT_OK


_DISPATCH = {
    "generate-data": cmd_generate_data,
    "sample": cmd_sample,
    "fluid": cmd_fluid,
    "ou": cmd_ou,
    "drift-table": cmd_drift_table,
    "scaling": cmd_scaling,
    "transient": cmd_transient,
    "stationary": cmd_stationary,
    "mixed": cmd_mixed,
}


_VALUE_FLAGS = {
    "--config", "--model", "--x0", "--truth", "--scheme", "--m", "--reference",
    "--mixed-radius", "--n", "--ngrid", "--t-max", "--dt", "--replicates",
    "--start-offset", "--epsilon", "--grid", "--xstar", "--schemes", "--seed",
    "--out", "--data",
}


def _merge_negative_values(argv):
    """Join ``--flag -5:5:0.01`` into ``--flag=-5:5:0.01`` so argparse accepts
    values that begin with a dash (grids, offsets, reference points)."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and argv[i + 1] not in _VALUE_FLAGS:
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(_merge_negative_values(list(argv)))
    try:
        cfg = _resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _DISPATCH[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ex.InsufficientSamples, ex.TooFewSamples, BoundViolation, AssertionError) as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports anything else
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
