"""Run the slicing scenario and print per-phase throughput ratios against the shares.

    python3 scripts/run_slicing_experiment.py [--out DIR] [--phase-s S]

`--phase-s` rescales the three-operator schedule (the shipped scenario uses 20 s phases).
Exits non-zero if any ratio is more than 1 percentage point from its share.
"""
import argparse
import sys
from pathlib import Path

from ricsim.scenario import Scenario, run_scenario, slicing_phase_stats
from ricsim.xapps import three_operator_schedule

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", default=str(ROOT / "scenarios" / "slicing.scn"))
    p.add_argument("--out", default="out/slicing")
    p.add_argument("--phase-s", type=float, default=None)
    args = p.parse_args(argv)

    scn = Scenario.load(args.scenario)
    if args.phase_s is not None:
        scn.schedule = three_operator_schedule(args.phase_s)
        scn.duration_s = 3 * args.phase_s
    result = run_scenario(scn, args.out)
    print(result.summary, end="")
    if result.exit_code:
        return result.exit_code

    phases = slicing_phase_stats(result.sinks["slicing"].rows, scn.schedule, scn.duration_ms,
                                 scn.slicing_report_period_ms, scn.cell.epoch_subframes)
    ok = True
    for ph in phases:
        total = sum(s.share_percent for s in ph["shares"])
        want = {s.slice_id: 100 * s.share_percent / total for s in ph["shares"]}
        cells = []
        for sid, got in sorted(ph["ratio_pct"].items()):
            exp = want.get(sid, 0.0)
            ok &= abs(got - exp) <= 1
            cells.append(f"slice {sid}: {got:6.2f}% (share {exp:5.1f}%)")
        print(f"phase {ph['index']}: " + "  ".join(cells))
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
