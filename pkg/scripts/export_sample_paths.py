#!/usr/bin/env python3
"""Export a small gallery of sample paths as CSV files.

Writes one skew path per regime (partial skew, reflecting, driftless) plus
an interface-diffusion path, all driven from a common seed. Intended for
quick plotting, for example:

    python3 scripts/export_sample_paths.py --out-dir paths
    python3 - <<'PY'
    import pandas as pd, matplotlib.pyplot as plt
    df = pd.read_csv("paths/skew_q0.6.csv")
    df.plot(x="time", y=["x", "eta"]); plt.show()
    PY
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from skewsim import cli  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="paths")
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--steps", type=int, default=20_000)
    args = parser.parse_args()

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = ["--t", "1", "--steps", str(args.steps), "--seed", str(args.seed)]

    jobs = [
        ("skew_q0.6.csv", ["sbm", "--q", "0.6", "--x0", "0"] + base),
        ("skew_q-0.3.csv", ["sbm", "--q", "-0.3", "--x0", "0.2"] + base),
        ("reflected.csv", ["sbm", "--q", "1", "--x0", "0"] + base),
        ("driftless.csv", ["sbm", "--q", "0", "--x0", "0"] + base),
        ("interface_diffusion.csv",
         ["gdiff", "--experiment", "simulate", "--profile", "sinusoidal",
          "--dim", "3", "--q", "0.6"] + base),
    ]
    for name, argv in jobs:
        target = out_dir / name
        code = cli.run(argv + ["--out", str(target)])
        if code != 0:
            print(f"failed: {name}", file=sys.stderr)
            return code
        print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
