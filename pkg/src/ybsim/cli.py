"""Command line entry point: ``ybsim <subcommand> --config FILE [options]``.

Exit status is 0 on success, 2 for invalid input (nothing is written) and 1
when a computation fails at run time.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod, experiments
from .errors import ConfigError
from .io import Table, run_id, write_outputs
from .seeding import SEED_MAX, derive_seed

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message, self.prog)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v <= SEED_MAX:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, {SEED_MAX}]")
    return v


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="TOML experiment configuration")
    p.add_argument("--seed", type=_seed, help="overrides run.seed")
    p.add_argument("--shots", type=int, help="overrides run.shots")
    p.add_argument("--workers", type=int, help="overrides run.workers")
    p.add_argument("--out", help="output root (overrides run.out); results go to OUT/<subcommand>")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ybsim", description="171Yb:YVO4 nanophotonic qubit simulations")
    parser.add_argument("--version", action="version", version=f"ybsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "purcell": "cavity coupling, Purcell enhancement and branching ratios",
        "ssro": "single-shot readout histograms and fidelities",
        "g2": "pulsewise photon correlations with and without initialization",
        "init": "initialization scans over F and A pulse numbers",
        "t1": "spin relaxation curves and temperature",
        "odmr": "zero-field ODMR multiplet from the nuclear bath",
        "dd": "dynamical decoupling coherence, scaling and revivals",
        "ramsey-ps": "post-selected Ramsey T2*",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "ssro":
            p.add_argument("--pulses", type=int, help="overrides readout.n_pulses")
            p.add_argument("--nc", type=int, help="overrides readout.n_c")
        if name == "odmr":
            p.add_argument("--broadening", type=float, help="Lorentzian FWHM in Hz (spin.broadening_hz)")
    p = sub.add_parser("sweep", help="run a subcommand over a grid of one config parameter")
    p.add_argument("target", choices=list(experiments.RUNNERS))
    p.add_argument("parameter", help="section.key")
    p.add_argument("grid", help="start:stop:step (inclusive) or a comma separated list")
    _common(p)
    return parser


def parse_grid(text: str) -> list:
    """``a:b:step`` (stop included when it lies on the grid) or ``v1,v2,...``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("range grid must be start:stop:step", text)
        vals = [cfgmod.parse_value(x) for x in parts]
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            raise ConfigError("range grid needs numeric start, stop and step", text)
        a, b, step = vals
        if step == 0 or (b - a) * step < 0:
            raise ConfigError("step must be nonzero and point from start to stop", text)
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        if all(isinstance(v, int) for v in vals):
            return [a + i * step for i in range(n)]
        return [float(a + i * step) for i in range(n)]
    items = [x for x in text.split(",") if x.strip()]
    if not items:
        raise ConfigError("empty grid", text)
    return [cfgmod.parse_value(x.strip()) for x in items]


def _overrides(args) -> list[str]:
    out = list(args.overrides)
    for flag, key in (("seed", "run.seed"), ("shots", "run.shots"), ("workers", "run.workers"),
                      ("pulses", "readout.n_pulses"), ("nc", "readout.n_c"),
                      ("broadening", "spin.broadening_hz")):
        v = getattr(args, flag, None)
        if v is not None:
            out.append(f"{key}={v!r}")
    if args.out is not None:
        out.append(f"run.out={json.dumps(args.out)}")
    return out


def _jsonable(x):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _manifest(subcommand, figure, cfg, seed, summary, extra=None) -> dict:
    m = {"subcommand": subcommand, "figure": figure, "seed": seed, "ybsim": __version__,
         "config_sha256": cfg.digest(), "config": cfg.experiment_dict(),
         "run_id": run_id(subcommand, cfg.digest(), seed, json.dumps(extra or {}, sort_keys=True)),
         "summary": summary}
    if extra:
        m.update(extra)
    return _jsonable(m)


def run_single(command: str, cfg) -> Path:
    res = experiments.RUNNERS[command](cfg, derive_seed(cfg.run.seed, 0))
    target = Path(cfg.run.out) / command
    write_outputs(target, res.tables, _manifest(command, res.figure, cfg, cfg.run.seed, res.summary))
    return target


def _point_config(raw: dict, target: str, parameter: str, value):
    point = copy.deepcopy(raw)
    cfgmod.set_path(point, parameter, value)
    cfg = cfgmod.from_dict(point)
    cfg.require(*REQUIRED[target])
    return cfg


def run_sweep(target: str, parameter: str, grid: list, raw: dict) -> Path:
    # the base config must carry the target's sections; every point is validated before anything runs
    cfgmod.from_dict(raw).require(*REQUIRED[target])
    configs = [_point_config(raw, target, parameter, v) for v in grid]
    base = configs[0]
    rows, figure = [], ""
    for i, (value, cfg) in enumerate(zip(grid, configs)):
        res = experiments.RUNNERS[target](cfg, derive_seed(cfg.run.seed, i))
        figure = res.figure
        rows.append({parameter: value, **{k: v for k, v in res.summary.items()
                                          if isinstance(v, (int, float, np.integer, np.floating))}})
    keys = [parameter] + sorted({k for r in rows for k in r} - {parameter})
    table = Table({k: [r.get(k, float("nan")) for r in rows] for k in keys})
    name = f"sweep-{target}-{parameter.replace('.', '-')}"
    out = Path(base.run.out) / name
    extra = {"sweep": {"target": target, "parameter": parameter, "grid": grid}}
    write_outputs(out, {"sweep": table}, _manifest(f"sweep {target}", figure, base, base.run.seed, {}, extra))
    return out


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        overrides = _overrides(args)
        if args.command == "sweep":
            grid = parse_grid(args.grid)
            raw = cfgmod.read_raw(args.config, overrides)
            out = run_sweep(args.target, args.parameter, grid, raw)
        else:
            cfg = cfgmod.load(args.config, overrides)
            cfg.require(*REQUIRED[args.command])
            out = run_single(args.command, cfg)
    except ConfigError as e:
        print(f"ybsim: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except Exception as e:  # noqa: BLE001
        print(f"ybsim: run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(out)
    return EXIT_OK


REQUIRED = {
    "purcell": ("cavity", "emitter"),
    "ssro": ("readout",),
    "g2": ("levels", "sequences"),
    "init": ("levels", "sequences"),
    "t1": ("levels", "sequences"),
    "odmr": ("spin",),
    "dd": ("noise",),
    "ramsey-ps": ("postselection",),
}


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
