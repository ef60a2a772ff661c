"""Run every subcommand on the preset configuration.

    python scripts/reproduce_all.py [--out out] [--quick]

``--quick`` cuts the shot count to 10^4 (g2 keeps 10^6 readout pulses, which
it needs to see coincidences). Each result lands in ``OUT/<subcommand>``.
"""
import argparse
import sys
import time
from pathlib import Path

from ybsim import cli

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "preset.toml"
ORDER = ("purcell", "ssro", "init", "t1", "g2", "odmr", "dd", "ramsey-ps")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="out")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args(argv)
    failed = []
    for sub in ORDER:
        extra = ["--workers", str(args.workers)]
        if sub == "g2":
            extra += ["--shots", "1000000"]
        elif args.quick and sub != "purcell":
            extra += ["--shots", "10000"]
        t0 = time.perf_counter()
        rc = cli.main([sub, "--config", str(CONFIG), "--out", args.out, *extra])
        print(f"{sub:10s} exit {rc}  {time.perf_counter() - t0:6.1f}s", file=sys.stderr)
        if rc:
            failed.append(sub)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
