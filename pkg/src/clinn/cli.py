"""Command-line workbench.

Subcommands: `train` runs the full loop and leaves a self-describing
run directory (config echo, history, checkpoints, metrics); `eval`
re-scores a checkpoint and exports plots; `indicate` dumps the cells
the discontinuity detector flags; `shocks` dumps the fitted jump
geometry; `compare` tabulates metrics files against a plain baseline.

Exit codes: 0 success, 2 usage or validation problem, 3 numerical
failure (divergence or non-finite gradients).
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, asdict, replace

import numpy as np

from . import diffengine as de
from . import evalreport, indicator, loss, network, oracle, problems
from . import shockgeom, trainer

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

# training-grid and eval-grid defaults by spatial dimension
GRID_1D = (512, 64)
GRID_2D = (128, 32)
EVAL_1D = (800, 200)


@dataclass(frozen=True)
class RunConfig:
    """One training run, fully pinned.

    Grid fields set to None resolve per case: 1D trains on 512x64 and
    evaluates on 800x200; 2D trains on a 128^2 x 32 lattice and, since a
    finer 3D evaluation lattice would dwarf the training cost, evaluates
    at the training resolution.
    """

    case: str = "1B"
    method: str = "clinn"
    seed: int = 7
    width: int = 100
    depth: int = 5
    lr: float = 1e-4
    epochs: tuple = (5000, 5000)
    n_pt: int = 500
    w_eq: float = 33.0
    w_if: float = 16.0
    grid_nx: int = None
    grid_nt: int = None
    eval_nx: int = None
    eval_nt: int = None
    h_offset: float = None
    out: str = "run"

    def resolved(self, spec):
        """Fill grid defaults for the case's dimension."""
        gx, gt = (GRID_1D if spec.d == 1 else GRID_2D)
        nx = self.grid_nx if self.grid_nx is not None else gx
        nt = self.grid_nt if self.grid_nt is not None else gt
        if spec.d == 1:
            ex, et = EVAL_1D
        else:
            ex, et = nx, nt
        enx = self.eval_nx if self.eval_nx is not None else ex
        ent = self.eval_nt if self.eval_nt is not None else et
        return replace(self, grid_nx=nx, grid_nt=nt,
                       eval_nx=enx, eval_nt=ent)


_CONFIG_KEYS = set(RunConfig.__dataclass_fields__)


def load_config(path):
    """Flat JSON with RunConfig fields; unknown keys are an error."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config {path} is not a JSON object")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise ValueError(f"config {path} has unknown keys {unknown}")
    if "epochs" in data:
        data["epochs"] = tuple(int(e) for e in data["epochs"])
    return data


def _parse_epochs(text):
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValueError(f"--epochs expects comma-separated ints, got {text!r}")
    if not parts or any(p < 1 for p in parts):
        raise ValueError(f"--epochs entries must be positive, got {text!r}")
    return parts


def build_config(args):
    """Defaults, then config file, then explicit flags."""
    fields = {}
    if getattr(args, "config", None):
        fields.update(load_config(args.config))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            fields[key] = flag
    rar = getattr(args, "rar", None)
    if rar is not None:
        if rar < 0:
            raise ValueError("--rar must be >= 0")
        if getattr(args, "epochs", None) is None and "epochs" not in fields:
            fields["epochs"] = tuple([5000] * (rar + 1))
        elif len(fields["epochs"]) != rar + 1:
            raise ValueError(
                f"--rar {rar} needs {rar + 1} epoch phases, "
                f"got {len(fields['epochs'])}")
    cfg = RunConfig(**fields)
    if cfg.case not in problems.CASE_IDS:
        raise ValueError(
            f"unknown case {cfg.case!r}; choose from {problems.CASE_IDS}")
    if cfg.method not in loss.PRESET_TERMS:
        raise ValueError(
            f"unknown method {cfg.method!r}; choose from "
            f"{tuple(loss.PRESET_TERMS)}")
    return cfg


def echo_config(cfg, path):
    data = asdict(cfg)
    data["epochs"] = list(cfg.epochs)
    with open(path, "w") as fh:
        fh.write(json.dumps(data, sort_keys=True, indent=2) + "\n")


# -- subcommands ------------------------------------------------------------

def cmd_train(args):
    cfg = build_config(args)
    spec = problems.get_problem(cfg.case)
    cfg = cfg.resolved(spec)
    weights = loss.preset_weights(cfg.method)
    grid = problems.sample_grid(spec, cfg.grid_nx, cfg.grid_nt)
    eval_grid = problems.sample_grid(spec, cfg.eval_nx, cfg.eval_nt)
    arch = network.Architecture(width=cfg.width, depth=cfg.depth,
                                input_dim=spec.d + 1)
    params = network.init(arch, seed=cfg.seed)
    schedule = trainer.RarSchedule(
        rounds=len(cfg.epochs) - 1, epochs=cfg.epochs,
        n_pt=cfg.n_pt, w_eq=cfg.w_eq, w_if=cfg.w_if)

    os.makedirs(cfg.out, exist_ok=True)
    echo_config(cfg, os.path.join(cfg.out, "config.json"))

    try:
        history, best, final = trainer.train(
            spec, params, grid, eval_grid, weights, schedule,
            alpha=cfg.lr, h_offset=cfg.h_offset)
    except trainer.DivergenceError as exc:
        exc.history.write(os.path.join(cfg.out, "history.csv"))
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except de.NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    history.write(os.path.join(cfg.out, "history.csv"))
    history.write_timings(os.path.join(cfg.out, "timings.csv"))
    network.save(best, os.path.join(cfg.out, "checkpoint.bin"))
    network.save(final, os.path.join(cfg.out, "final.bin"))

    u_pred = network.forward_batch(best, eval_grid.points)
    record = evalreport.compute_metrics(spec, cfg.method, eval_grid, u_pred)
    evalreport.write_metrics(record, os.path.join(cfg.out, "metrics.json"))
    print(f"case {cfg.case} method {cfg.method} seed {cfg.seed}: "
          f"eval MSE {record.mse_all:.6e} (best epoch {history.best_epoch})")
    return EXIT_OK


def _load_checkpoint(args, spec):
    if not os.path.exists(args.checkpoint):
        raise ValueError(f"checkpoint not found: {args.checkpoint}")
    params = network.load(args.checkpoint)
    arch = params.architecture()
    if arch.input_dim != spec.d + 1:
        raise ValueError(
            f"checkpoint takes {arch.input_dim} inputs but case "
            f"{spec.id} needs {spec.d + 1}")
    if args.width is not None and args.width != arch.width:
        raise ValueError(
            f"--width {args.width} != checkpoint width {arch.width}")
    if args.depth is not None and args.depth != arch.depth:
        raise ValueError(
            f"--depth {args.depth} != checkpoint depth {arch.depth}")
    return params


def _case_spec(args):
    if args.case is None:
        raise ValueError("--case is required")
    if args.case not in problems.CASE_IDS:
        raise ValueError(
            f"unknown case {args.case!r}; choose from {problems.CASE_IDS}")
    return problems.get_problem(args.case)


def cmd_eval(args):
    spec = _case_spec(args)
    params = _load_checkpoint(args, spec)
    if spec.d == 1:
        ex, et = EVAL_1D
    else:
        ex, et = GRID_2D
    nx = args.eval_nx if args.eval_nx is not None else ex
    nt = args.eval_nt if args.eval_nt is not None else et
    grid = problems.sample_grid(spec, nx, nt)
    out = args.out or "eval_out"
    paths = evalreport.export_prediction(params, spec, grid, out,
                                         method=args.method or "model")
    record = paths["record"]
    evalreport.write_metrics(record, os.path.join(out, "metrics.json"))
    print(f"case {spec.id}: eval MSE {record.mse_all:.6e}; artifacts in {out}")
    return EXIT_OK


def _training_grid(args, spec):
    gx, gt = (GRID_1D if spec.d == 1 else GRID_2D)
    nx = args.grid_nx if args.grid_nx is not None else gx
    nt = args.grid_nt if args.grid_nt is not None else gt
    return problems.sample_grid(spec, nx, nt)


def cmd_indicate(args):
    spec = _case_spec(args)
    params = _load_checkpoint(args, spec)
    grid = _training_grid(args, spec)
    flags = trainer.detect_flags(spec, grid, params)
    times = np.linspace(0.0, spec.T, grid.nt)
    xs = np.linspace(spec.lo[0], spec.hi[0], grid.nx)
    lines = []
    if spec.d == 1:
        lines.append("it,ix,t,x")
        for it, ix in zip(*np.nonzero(flags)):
            lines.append(f"{it},{ix},{times[it]!r},{xs[ix]!r}")
    else:
        ys = np.linspace(spec.lo[1], spec.hi[1], grid.nx)
        lines.append("it,iy,ix,t,x,y")
        for it, iy, ix in zip(*np.nonzero(flags)):
            lines.append(
                f"{it},{iy},{ix},{times[it]!r},{xs[ix]!r},{ys[iy]!r}")
    out = args.out or "indicator.csv"
    _write_lines(out, lines)
    print(f"{int(flags.sum())} flagged cells over {flags.size} nodes -> {out}")
    return EXIT_OK


def cmd_shocks(args):
    spec = _case_spec(args)
    params = _load_checkpoint(args, spec)
    grid = _training_grid(args, spec)
    flags = trainer.detect_flags(spec, grid, params)
    pd_all = shockgeom.build_pd(grid, flags)
    out = args.out or "shocks.csv"
    lines = []
    n_items = 0
    if spec.d == 1:
        curves = shockgeom.fit_curves(grid, pd_all)
        lines.append("track_id,t,x,s")
        for k, c in enumerate(curves):
            if not c.usable:
                continue
            for t, x, s in zip(c.times, c.centers, c.speeds):
                lines.append(f"{k},{t!r},{x!r},{s!r}")
                n_items += 1
    else:
        nx = grid.nx
        mesh_x = indicator.Mesh1D.from_points(grid.points[:nx, 0])
        mesh_y = indicator.Mesh1D.from_points(grid.points[:nx * nx:nx, 1])
        times = np.linspace(0.0, spec.T, grid.nt)
        lines.append("slice_it,t,x,y,normal_x,normal_y,s")
        for it in range(grid.nt - 1):
            for tg in shockgeom.rh_target_2d(flags[it], flags[it + 1],
                                             mesh_x, mesh_y, grid.dt):
                lines.append(
                    f"{it},{times[it]!r},{tg.x!r},{tg.y!r},"
                    f"{tg.normal[0]!r},{tg.normal[1]!r},{tg.speed!r}")
                n_items += 1
    _write_lines(out, lines)
    print(f"{n_items} jump samples -> {out}")
    return EXIT_OK


def cmd_compare(args):
    entries = []
    needed = {"case", "method", "mse_all", "mse_t1", "mse_t2",
              "mse_t3", "mse_t4"}
    for path in args.metrics:
        with open(path) as fh:
            entry = json.load(fh)
        missing = sorted(needed - set(entry))
        if missing:
            raise ValueError(f"{path} lacks metric keys {missing}")
        entries.append(entry)
    cases = {e.get("case") for e in entries}
    if len(cases) != 1:
        raise ValueError(f"metrics files mix cases: {sorted(cases)}")
    baseline = next((e for e in entries if e.get("method") == "pinn"), None)

    headers = ["method", "MSE_T1", "MSE_T2", "MSE_T3", "MSE_T4", "MSE_All"]
    if baseline is not None and len(entries) > 1:
        headers.append("improvement")
    rows = []
    for e in entries:
        row = [str(e.get("method", "?"))]
        for key in ("mse_t1", "mse_t2", "mse_t3", "mse_t4", "mse_all"):
            row.append(f"{e[key]:.3e}")
        if len(headers) == 7:
            ratio = evalreport.improvement_ratio(e["mse_all"],
                                                 baseline["mse_all"])
            row.append(f"{ratio:.1f}%")
        rows.append(row)

    table = _markdown_table(headers, rows,
                            title=f"case {cases.pop()}")
    print(table)
    if args.out:
        _write_lines(args.out, [table.rstrip("\n")])
    return EXIT_OK


def _markdown_table(headers, rows, title=None):
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def line(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    parts = []
    if title:
        parts.append(f"## {title}")
        parts.append("")
    parts.append(line(headers))
    parts.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    parts.extend(line(r) for r in rows)
    return "\n".join(parts) + "\n"


def _write_lines(path, lines):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# -- parser -----------------------------------------------------------------

def _add_common_grid_flags(p):
    p.add_argument("--case", help="benchmark case id")
    p.add_argument("--grid-nx", dest="grid_nx", type=int)
    p.add_argument("--grid-nt", dest="grid_nt", type=int)
    p.add_argument("--out")


def make_parser():
    ap = argparse.ArgumentParser(
        prog="clinn",
        description="conservation-law-informed network workbench")
    sub = ap.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train a model and write a run dir")
    tr.add_argument("--config", help="flat JSON config; flags override it")
    tr.add_argument("--case")
    tr.add_argument("--method", choices=tuple(loss.PRESET_TERMS))
    tr.add_argument("--seed", type=int)
    tr.add_argument("--width", type=int)
    tr.add_argument("--depth", type=int)
    tr.add_argument("--epochs", type=_parse_epochs,
                    help="comma-separated epochs per refinement phase")
    tr.add_argument("--rar", type=int,
                    help="number of refinement rounds (phases - 1)")
    tr.add_argument("--npt", dest="n_pt", type=int)
    tr.add_argument("--weq", dest="w_eq", type=float)
    tr.add_argument("--wif", dest="w_if", type=float)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--grid-nx", dest="grid_nx", type=int)
    tr.add_argument("--grid-nt", dest="grid_nt", type=int)
    tr.add_argument("--eval-nx", dest="eval_nx", type=int)
    tr.add_argument("--eval-nt", dest="eval_nt", type=int)
    tr.add_argument("--h-offset", dest="h_offset", type=float)
    tr.add_argument("--out")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score a checkpoint and export plots")
    ev.add_argument("checkpoint")
    ev.add_argument("--case")
    ev.add_argument("--method")
    ev.add_argument("--width", type=int)
    ev.add_argument("--depth", type=int)
    ev.add_argument("--eval-nx", dest="eval_nx", type=int)
    ev.add_argument("--eval-nt", dest="eval_nt", type=int)
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)

    ind = sub.add_parser("indicate", help="dump detector flags to CSV")
    ind.add_argument("checkpoint")
    ind.add_argument("--width", type=int)
    ind.add_argument("--depth", type=int)
    _add_common_grid_flags(ind)
    ind.set_defaults(func=cmd_indicate)

    sh = sub.add_parser("shocks", help="dump fitted jump geometry to CSV")
    sh.add_argument("checkpoint")
    sh.add_argument("--width", type=int)
    sh.add_argument("--depth", type=int)
    _add_common_grid_flags(sh)
    sh.set_defaults(func=cmd_shocks)

    cp = sub.add_parser("compare", help="tabulate metrics JSONs")
    cp.add_argument("metrics", nargs="+", help="metrics.json paths")
    cp.add_argument("--out", help="also write the table to this file")
    cp.set_defaults(func=cmd_compare)
    return ap


def main(argv=None):
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except trainer.DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except de.NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
