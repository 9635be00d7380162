"""Command line: run the RIC, an E2 node or an xApp on TCP, or a whole scenario in-process."""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from pathlib import Path

from ricsim.agent import E2Agent
from ricsim.clock import AsyncioClock
from ricsim.config import FlatConfig
from ricsim.errors import CodecError, ConfigError
from ricsim.ransim import RanSim
from ricsim.ric import RicCore
from ricsim.scenario import (
    Scenario,
    agent_config_from,
    cell_from,
    parse_clock,
    ric_config_from,
    run_scenario,
    schedule_from,
    ues_from,
)
from ricsim.transport import TcpNetwork
from ricsim.xapps import (
    Kpimon,
    MetricSink,
    SlicingXapp,
    builtin_descriptor,
    load_descriptor,
)
from ricsim.xapps.client import EXIT_CONFIG, EXIT_OK, EXIT_TRANSPORT

log = logging.getLogger("ricsim")


def _setup_logging(verbose: bool):
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if verbose else logging.WARNING,
                        format="%(message)s")


async def _serve_for(duration_s: float | None, stop: asyncio.Future | None = None):
    waiters = [stop] if stop is not None else []
    if duration_s is not None:
        waiters.append(asyncio.ensure_future(asyncio.sleep(duration_s)))
    if not waiters:
        waiters.append(asyncio.get_running_loop().create_future())
    await asyncio.wait(waiters, return_when=asyncio.FIRST_COMPLETED)


async def _ric_main(cfg: FlatConfig, duration_s):
    loop = asyncio.get_running_loop()
    ric = RicCore(AsyncioClock(loop), ric_config_from(cfg))
    net = TcpNetwork(loop)
    try:
        await net.listen(ric.config.e2_listen, ric.accept_e2)
        await net.listen(ric.config.xapp_listen, ric.accept_xapp)
    except OSError as exc:
        print(f"ric: cannot listen: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    log.info("ric listening: e2=%s xapp=%s", ric.config.e2_listen, ric.config.xapp_listen)
    await _serve_for(duration_s)
    ric.sdl.close()
    return EXIT_OK


async def _node_main(cfg: FlatConfig, duration_s):
    loop = asyncio.get_running_loop()
    clock = AsyncioClock(loop)
    agent_cfg = agent_config_from(cfg, cfg.get("ric.e2_listen", "127.0.0.1:36421"))
    ran = RanSim(cell_from(cfg), ues_from(cfg))
    agent = E2Agent(agent_cfg, clock, TcpNetwork(loop), ran)
    agent.start()
    await _serve_for(duration_s)
    return EXIT_OK


async def _xapp_main(name: str, cfg: FlatConfig, out_dir: Path, duration_s):
    loop = asyncio.get_running_loop()
    clock = AsyncioClock(loop)
    path = cfg.get(f"xapp.{name}.descriptor")
    descriptor = load_descriptor(path) if path else builtin_descriptor(name)
    ric_addr = cfg.get("xapp.ric_addr", cfg.get("ric.xapp_listen", "127.0.0.1:36422"))
    out_dir.mkdir(parents=True, exist_ok=True)
    sink = MetricSink(out_dir / f"{name}.csv")
    stop = loop.create_future()

    def on_exit(code):
        if not stop.done():
            stop.set_result(code)

    if name == "kpimon":
        xapp = Kpimon(descriptor, clock, TcpNetwork(loop), ric_addr, sink,
                      period_ms=cfg.get_int("kpimon.period_ms", 1000, minimum=1), on_exit=on_exit)
    else:
        xapp = SlicingXapp(descriptor, clock, TcpNetwork(loop), ric_addr, sink, schedule_from(cfg),
                           report_period_ms=cfg.get_int("slicing.report_period_ms", 1000, minimum=1),
                           on_exit=on_exit)
    xapp.start()
    await _serve_for(duration_s, stop)
    sink.close()
    return xapp.exit_code or EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ricsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="flat key = value config file")
        sp.add_argument("--duration", type=float, default=None,
                        help="stop after this many wall seconds (default: run until interrupted)")
        sp.add_argument("-q", "--quiet", action="store_true", help="suppress per-procedure log lines")

    common(sub.add_parser("ric", help="run the near-RT RIC on TCP"))
    common(sub.add_parser("node", help="run an E2 node (agent + simulated RAN) on TCP"))
    xp = sub.add_parser("xapp", help="run a reference xApp on TCP")
    xp.add_argument("name", choices=["kpimon", "slicing"])
    common(xp)
    xp.add_argument("--out", default=".", help="directory for the metrics CSV")

    rp = sub.add_parser("run", help="run a scenario deterministically in-process")
    rp.add_argument("--scenario", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--seed", type=int, default=None)
    rp.add_argument("--clock", default=None, help="det | rt[:scale]")
    rp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            _setup_logging(args.verbose)
            cfg = FlatConfig.load(args.scenario)
            scn = Scenario.from_config(cfg)
            if args.seed is not None:
                scn.seed = args.seed
            if args.clock is not None:
                scn.clock_scale = parse_clock(args.clock)
            result = run_scenario(scn, args.out)
            sys.stdout.write(result.summary)
            return result.exit_code
        _setup_logging(not args.quiet)
        cfg = FlatConfig.load(args.config)
        if args.command == "ric":
            coro = _ric_main(cfg, args.duration)
        elif args.command == "node":
            coro = _node_main(cfg, args.duration)
        else:
            coro = _xapp_main(args.name, cfg, Path(args.out), args.duration)
        try:
            return asyncio.run(coro)
        except KeyboardInterrupt:
            return EXIT_OK
    except (ConfigError, CodecError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
