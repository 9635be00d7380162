"""Run the KPIMON scenario and compare per-UE uplink slopes with the offered load.

    python3 scripts/run_kpimon_experiment.py [--out DIR] [--seed N] [--duration S]

Exits non-zero if any UE's slope or final total is off by more than 1 %.
"""
import argparse
import sys
from pathlib import Path

from ricsim.scenario import Scenario, kpimon_ue_stats, run_scenario

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", default=str(ROOT / "scenarios" / "kpimon.scn"))
    p.add_argument("--out", default="out/kpimon")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None, help="override scenario.duration_s")
    args = p.parse_args(argv)

    scn = Scenario.load(args.scenario)
    if args.seed is not None:
        scn.seed = args.seed
    if args.duration is not None:
        scn.duration_s = args.duration
    result = run_scenario(scn, args.out)
    print(result.summary, end="")
    if result.exit_code:
        return result.exit_code

    stats = kpimon_ue_stats(result.sinks["kpimon"].rows)
    ok = True
    print(f"{'ue':>4} {'offered B/s':>12} {'slope B/s':>12} {'err %':>7} {'total B':>12} {'expected B':>12}")
    for ue in scn.ues:
        st = stats.get(ue.ue_id, {})
        want = ue.offered_ul_bps / 8
        slope = st.get("ul_slope", 0.0)
        total, t_ms = st.get("ul_total", 0), st.get("ul_last_t_ms", 0)
        expected = want * t_ms / 1000
        err = 100 * abs(slope - want) / want if want else 0.0
        tot_err = 100 * abs(total - expected) / expected if expected else 0.0
        ok &= err <= 1 and tot_err <= 1
        print(f"{ue.ue_id:>4} {want:>12.0f} {slope:>12.1f} {err:>7.3f} {total:>12} {expected:>12.0f}")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
