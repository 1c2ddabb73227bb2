"""Show why the sphere-signature order needs its index fallback.

On the diagonal ladder the level-flip automorphism pairs (n, 0) with
(n, 1).  Mirroring one Poisson sample across the flip produces a
configuration where every such pair has identical sphere signatures at
every radius, so no signature-based rule can separate them and the
deterministic index tiebreak has to decide.  Thin wrapper over the
demo-ladder subcommand.
"""

import argparse
import sys
from pathlib import Path

from ppmatch import cli


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--depth", type=int, default=8)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", type=Path, default=Path("ladder_out"))
    args = parser.parse_args()
    return cli.main([
        "demo-ladder",
        "--seed", str(args.seed),
        "--out", str(args.out),
        "--set", f"graph.depth={args.depth}",
    ])


if __name__ == "__main__":
    sys.exit(main())
