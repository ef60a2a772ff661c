"""CSV tables with a ``#`` header block, run manifests, atomic output directories."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


@dataclass
class Table:
    columns: dict  # name -> 1-D array-like, all of equal length
    units: dict = field(default_factory=dict)
    notes: tuple = ()

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have unequal lengths {sorted(lengths)}")

    @classmethod
    def from_mapping(cls, values: dict, units: dict | None = None) -> "Table":
        """Two-column key/value table."""
        keys = list(values)
        return cls({"key": keys, "value": [values[k] for k in keys],
                    "unit": [(units or {}).get(k, "") for k in keys]})


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def render_csv(table: Table, header: dict) -> str:
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k}: {v}\n")
    cols = list(table.columns)
    buf.write("# columns: " + ", ".join(f"{c} [{table.units.get(c, '-')}]" for c in cols) + "\n")
    for note in table.notes:
        buf.write(f"# note: {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in zip(*(table.columns[c] for c in cols)):
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def read_csv(path) -> dict:
    """Columns of a table written by :func:`render_csv` (header lines skipped), as strings."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return {name: [r[i] for r in rows[1:]] for i, name in enumerate(rows[0])}


def read_histogram(path):
    """Two-column ``count, occurrences`` CSV (``#`` comments and a header row allowed)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if not ln.startswith("#")) if r]
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    k = np.array([int(r[0]) for r in rows])
    n = np.array([float(r[1]) for r in rows])
    return k, n


def run_id(subcommand: str, config_digest: str, seed: int, extra: str = "") -> str:
    text = json.dumps({"subcommand": subcommand, "config": config_digest, "seed": seed,
                       "version": __version__, "extra": extra}, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@contextmanager
def staged_directory(target: Path):
    """Yield a scratch directory that replaces ``target`` only if the block completes."""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        yield stage
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    old = None
    if target.exists():
        old = target.with_name(f".{target.name}.old-{os.getpid()}")
        os.replace(target, old)
    os.replace(stage, target)
    if old is not None:
        shutil.rmtree(old, ignore_errors=True)


def write_outputs(target: Path, tables: dict, manifest: dict) -> list[Path]:
    """Write ``name.csv`` per table plus ``manifest.json`` atomically into ``target``."""
    header = {"ybsim": __version__, "subcommand": manifest["subcommand"], "figure": manifest["figure"],
              "run_id": manifest["run_id"], "seed": manifest["seed"]}
    with staged_directory(target) as stage:
        files = []
        for name in sorted(tables):
            text = render_csv(tables[name], header)
            (stage / f"{name}.csv").write_text(text)
            files.append({"file": f"{name}.csv", "sha256": hashlib.sha256(text.encode()).hexdigest()})
        full = {**manifest, "outputs": files}
        (stage / "manifest.json").write_text(json.dumps(full, indent=2, sort_keys=True) + "\n")
    return [Path(target) / f["file"] for f in files] + [Path(target) / "manifest.json"]
