"""Command line entry point: ``roughfou {simulate,estimate,mc,diagnose,phi}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import EstimationError, ValidationError
from .estimate import estimate_discrete
from .fbm import SampleGrid, read_path_csv, write_path_csv
from .fou import ModelSpec
from .rough import ito_correction_phi, read_lift_csv, write_lift_csv

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIAGNOSE = 3

log = logging.getLogger("roughfou")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _load_model(filename) -> ModelSpec:
    """Accept either a ModelSpec JSON or an experiment config holding one."""
    try:
        data = json.loads(Path(filename).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{filename}: invalid JSON ({exc})") from None
    if isinstance(data, dict) and "model" in data:
        data = data["model"]
    return ModelSpec.from_dict(data)


def _experiment(args, default_preset: str) -> harness.ExperimentConfig:
    if args.config and args.preset:
        raise ValidationError("give either --config or --preset, not both")
    if args.config:
        cfg = harness.ExperimentConfig.from_json(args.config)
    else:
        cfg = harness.PRESETS[args.preset or default_preset]()
    if args.full_scale:
        cfg.mc_paths = max(cfg.mc_paths, harness.FULL_SCALE_PATHS) if cfg.mode != "freq_sweep" else cfg.mc_paths
    if args.paths is not None:
        cfg.mc_paths = args.paths
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.outputs = args.out
    return cfg


def cmd_simulate(args) -> int:
    model = _load_model(args.config)
    grid = SampleGrid(args.T, args.n)
    factory = harness.PathFactory(model, grid, args.seed if args.seed is not None else 0, args.substeps)
    sim = factory.simulate(args.path_index)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_path_csv(sim.fou, out / "path.csv")
    write_path_csv(sim.fbm, out / "fbm.csv")
    write_lift_csv(sim.ito, out / "lift.csv")
    write_lift_csv(sim.strat, out / "lift_strat.csv")
    model.to_json(out / "model.json")
    print(f"wrote path.csv, fbm.csv, lift.csv, lift_strat.csv, model.json to {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    path = read_path_csv(args.path, kind="fou")
    lift = read_lift_csv(args.lift, base_point=path.values[:, 0], grid=path.grid)
    res = estimate_discrete(lift, path)
    text = res.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_mc(args) -> int:
    cfg = _experiment(args, "table1")
    reports = harness.run_mc(cfg)
    files = harness.emit_outputs(reports, cfg)
    for r in reports:
        c = r.cell
        print(f"H={c.hurst:g} T={c.T:g} n={c.n}: mean={np.round(r.mean, 4).tolist()} "
              f"std={np.round(r.std, 4).tolist()} failed={r.n_failed}/{r.mc_paths}")
    print("wrote " + ", ".join(str(p) for p in files.values()))
    return EXIT_OK if all(r.ok for r in reports) else EXIT_VALIDATION


def cmd_diagnose(args) -> int:
    cfg = _experiment(args, "diagnostics")
    report = harness.diagnostics(cfg)
    for line in report.lines():
        print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = [{"name": c.name, "passed": c.passed, "value": c.value,
                    "threshold": c.threshold, "detail": c.detail} for c in report.checks]
        (out / "diagnostics.json").write_text(json.dumps(payload, indent=2) + "\n")
    return EXIT_OK if report.passed else EXIT_DIAGNOSE


def cmd_phi(args) -> int:
    model = _load_model(args.config)
    grid = SampleGrid(args.T, args.n)
    d = model.d
    header = ["t"] + [f"phi_{i + 1}{j + 1}" for i in range(d) for j in range(d)]
    lines = [",".join(header)]
    for t in grid.times():
        phi = ito_correction_phi(model.gamma, model.hurst, float(t))
        lines.append(",".join(format(float(v), ".17g") for v in [t, *phi.ravel()]))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughfou", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate one fOU path and its lifts")
    s.add_argument("--config", required=True, help="ModelSpec or experiment JSON")
    s.add_argument("--T", type=float, default=10.0)
    s.add_argument("--n", type=_positive, default=1024)
    s.add_argument("--substeps", type=_positive, default=1)
    s.add_argument("--path-index", type=int, default=0)
    s.add_argument("--seed", type=_u64)
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="estimate the drift from path and Ito lift CSVs")
    s.add_argument("--path", required=True)
    s.add_argument("--lift", required=True)
    s.add_argument("--out", help="result JSON file")
    s.set_defaults(func=cmd_estimate)

    for name, fn, helptext in (("mc", cmd_mc, "run a Monte Carlo experiment"),
                               ("diagnose", cmd_diagnose, "run the invariant battery")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="experiment config JSON")
        s.add_argument("--preset", choices=sorted(harness.PRESETS))
        s.add_argument("--seed", type=_u64)
        s.add_argument("--out", help="output directory")
        s.add_argument("--paths", type=_positive)
        s.add_argument("--threads", type=_positive)
        s.add_argument("--full-scale", action="store_true", help=f"{harness.FULL_SCALE_PATHS} paths per cell")
        s.set_defaults(func=fn)

    s = sub.add_parser("phi", help="tabulate the Ito correction on a grid")
    s.add_argument("--config", required=True, help="ModelSpec or experiment JSON")
    s.add_argument("--T", type=float, default=10.0)
    s.add_argument("--n", type=_positive, default=100)
    s.add_argument("--out", help="output CSV (default stdout)")
    s.set_defaults(func=cmd_phi)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, EstimationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
