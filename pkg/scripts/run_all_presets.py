#!/usr/bin/env python3
"""Run every built-in scenario and summarize the verification verdicts.

Artifacts land under --out-root/<preset>/.  Exit status is the number of
failed presets, so the script doubles as a coarse smoke gate.

Usage:
    python3 scripts/run_all_presets.py --out-root runs
    python3 scripts/run_all_presets.py --resolution 24 --only nematic-hedgehog
"""

import argparse
import dataclasses
import sys
import time
from pathlib import Path

from complexbodies.errors import ScenarioFailedError
from complexbodies.scenarios import preset_config, preset_names, run


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-root", default="runs")
    parser.add_argument("--resolution", type=int, default=None,
                        help="override every preset's grid resolution")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--only", nargs="+", default=None,
                        help="subset of preset names")
    args = parser.parse_args(argv)

    names = args.only if args.only else preset_names()
    failures = 0
    for name in names:
        cfg = preset_config(name)
        if args.resolution is not None:
            cfg = dataclasses.replace(cfg, resolution=args.resolution)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        out = Path(args.out_root) / name
        t0 = time.time()
        try:
            result = run(cfg, out_dir=out)
            verdict = "PASS"
        except ScenarioFailedError as exc:
            result = exc.result
            verdict = "FAIL"
            failures += 1
        dt = time.time() - t0
        checks = f"{sum(o.passed for o in result.outcomes)}/{len(result.outcomes)}"
        mres = result.minimize_result
        print(f"{verdict}  {name:<22} checks={checks:<6} "
              f"E={mres.energy:.6g}  iters={mres.iterations}  {dt:.1f}s  -> {out}")
    return failures


if __name__ == "__main__":
    sys.exit(main())
