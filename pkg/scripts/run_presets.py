"""Run every experiment preset and write one output directory per preset.

    python scripts/run_presets.py [--seeds N] [--out DIR] [presets ...]
"""

import argparse
import sys

from dralbsim import cli


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("presets", nargs="*", default=list(cli.PRESETS))
    p.add_argument("--seeds", type=int, default=cli.DEFAULT_SEEDS)
    p.add_argument("--out", default="results")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    args = p.parse_args(argv)
    for name in args.presets:
        code = cli.main(["--preset", name, "--seeds", str(args.seeds), "--format", args.format,
                         "--out", f"{args.out}/{name}"])
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
