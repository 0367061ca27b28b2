#!/usr/bin/env python3
"""Drive the headline verification experiments through the CLI.

Runs each experiment as a `skewsim` invocation, stores the JSON artifacts
under an output directory, and prints one line per gate. Exits nonzero if
any gate fails, so the script can anchor a CI job.

The default sizes finish in about a minute. Pass --full for the
acceptance-grade sizes (a few minutes).
"""

import argparse
import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from skewsim import cli  # noqa: E402


def suite(full: bool, seed: int):
    paths = "10000" if full else "2000"
    dt = "1e-4" if full else "5e-4"
    law_paths = "100000" if full else "20000"
    cont_paths = "4000" if full else "800"
    cont_dt = "2.5e-4" if full else "1e-3"
    # the equality experiments always need the fine step: their allowance is
    # a few percent, which a coarse step's local-time bias already exceeds
    eq_dt = "1e-4"
    return [
        ("corollary1-origin",
         ["couple", "--experiment", "corollary1", "--q1", "0.2", "--q2", "0.6",
          "--x0", "0", "--t", "1", "--dt", eq_dt, "--paths", paths]),
        ("corollary1-offset",
         ["couple", "--experiment", "corollary1", "--q1", "0.2", "--q2", "0.6",
          "--x0", "1", "--t", "1", "--dt", eq_dt, "--paths", paths]),
        ("corollary2",
         ["couple", "--experiment", "corollary2", "--q", "0.5", "--x01", "0",
          "--x02", "0.1", "--t", "1", "--dt", dt, "--paths", paths]),
        ("remark1-contraction",
         ["couple", "--experiment", "remark1", "--x01", "0", "--x02", "0.2",
          "--t", "1", "--dt", dt, "--paths", paths]),
        ("remark2-driftless",
         ["couple", "--experiment", "remark2", "--x01", "0", "--x02", "0.1",
          "--t", "1", "--dt", dt, "--paths", paths]),
        ("theorem1-ordering",
         ["couple", "--experiment", "theorem1", "--q1", "0.2", "--q2", "0.6",
          "--t", "1", "--dt", dt, "--paths", "1000"]),
        ("bounds-battery",
         ["couple", "--experiment", "bounds", "--sets", "20", "--dt", "5e-4",
          "--paths", paths]),
        ("sampler-ks",
         ["laws", "--experiment", "eta-cdf", "--x0", "0", "--t", "1",
          "--paths", law_paths]),
        ("scheme-law",
         ["laws", "--experiment", "scheme-eta", "--q", "0.6", "--x0", "0",
          "--t", "1", "--dt", dt, "--paths", paths]),
        ("clock-tail",
         ["gdiff", "--experiment", "rho-tail", "--t", "0.5", "--t-max", "1.0",
          "--horizon", "4", "--dt", "4e-3", "--paths", law_paths]),
        ("small-local-time",
         ["gdiff", "--experiment", "small-eta", "--t", "1", "--a", "0.5",
          "--dt", "1e-4" if full else "1e-3", "--paths", law_paths]),
        ("variance-identity",
         ["gdiff", "--experiment", "variance", "--profile", "constant",
          "--beta0", "0.5", "--t", "1", "--dt", "1e-3", "--paths", paths]),
        ("time-change",
         ["gdiff", "--experiment", "timechange", "--profile", "sinusoidal",
          "--t", "1", "--steps", "10000", "--levels", "0.1,0.2,0.4"]),
        ("continuity",
         ["continuity", "--offsets", "0.4,0.2,0.1,0.05", "--epsilon", "0.25",
          "--t", "1", "--dt", cont_dt, "--paths", cont_paths]),
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="verification_artifacts")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--full", action="store_true",
                        help="acceptance-grade sample sizes")
    args = parser.parse_args()

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    failures = 0
    for name, argv in suite(args.full, args.seed):
        artifact = out_dir / f"{name}.json"
        code = cli.run(argv + ["--seed", str(args.seed),
                               "--workers", str(args.workers),
                               "--out", str(artifact)])
        if code == 2:
            print(f"{name:24s} CONFIG ERROR")
            failures += 1
            continue
        payload = json.loads(artifact.read_text())
        verdict = "pass" if payload.get("pass", False) else "FAIL"
        estimate = payload.get("estimate")
        reference = payload.get("target", payload.get("bound"))
        print(f"{name:24s} {verdict}  estimate={estimate:.6g}  "
              f"reference={reference:.6g}")
        if code != 0:
            failures += 1

    print(f"\n{failures} failing gate(s); artifacts in {out_dir}/")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
