"""Scenario files and the in-process runner that wires RIC, agent, RAN and xApps
onto one clock over in-memory links."""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from ricsim import e2ap, sm_kpm, sm_slicing
from ricsim.agent import AgentConfig, AgentState, E2Agent, default_sm_agents
from ricsim.clock import PRIO_LATE, VirtualLoop
from ricsim.config import FlatConfig
from ricsim.errors import ConfigError, InvalidField
from ricsim.ransim import CellConfig, RanSim, UeConfig
from ricsim.ric import DEFAULT_TIMEOUT_MS, RicConfig, RicCore
from ricsim.sm_slicing import SliceShare
from ricsim.transport import MemoryNetwork
from ricsim.xapps import (
    Kpimon,
    MetricSink,
    Phase,
    SliceSchedule,
    SlicingXapp,
    builtin_descriptor,
    load_descriptor,
)
from ricsim.xapps.client import EXIT_OK, EXIT_SUBSCRIPTION

log = logging.getLogger(__name__)

KNOWN_XAPPS = ("kpimon", "slicing")


# --- config sections ------------------------------------------------------------------

def ric_config_from(cfg: FlatConfig) -> RicConfig:
    allow = []
    for item in cfg.get_list("ric.plmn_allowlist", ["001/01"]):
        try:
            allow.append(e2ap.plmn_from_str(item))
        except InvalidField as exc:
            raise ConfigError("ric.plmn_allowlist", str(exc)) from None
    return RicConfig(
        e2_listen=cfg.get("ric.e2_listen", "127.0.0.1:36421"),
        xapp_listen=cfg.get("ric.xapp_listen", "127.0.0.1:36422"),
        plmn_allowlist=tuple(allow),
        timeout_ms=cfg.get_int("ric.timeout_ms", DEFAULT_TIMEOUT_MS, minimum=1),
        sdl_journal_path=cfg.get("ric.sdl_journal_path") or None,
    )


def node_id_from(cfg: FlatConfig) -> e2ap.GlobalE2NodeId:
    try:
        plmn = e2ap.plmn_from_str(cfg.get("agent.plmn", "001/01"))
    except InvalidField as exc:
        raise ConfigError("agent.plmn", str(exc)) from None
    type_name = cfg.get("agent.node_type", "EN_GNB").upper()
    try:
        node_type = e2ap.NodeType[type_name]
    except KeyError:
        raise ConfigError("agent.node_type", f"one of {[t.name for t in e2ap.NodeType]}") from None
    node_id = cfg.get_int("agent.node_id", 1, minimum=0)
    if node_id >= 1 << e2ap.NODE_ID_BITS:
        raise ConfigError("agent.node_id", "must fit in 20 bits")
    return e2ap.GlobalE2NodeId(plmn, node_type, node_id)


def agent_config_from(cfg: FlatConfig, default_ric_addr: str) -> AgentConfig:
    return AgentConfig(
        ric_addr=cfg.get("agent.ric_addr", default_ric_addr),
        node=node_id_from(cfg),
        functions=(sm_kpm.function_item(), sm_slicing.function_item()),
        retry_interval_ms=cfg.get_int("agent.retry_ms", 5000, minimum=1),
    )


def cell_from(cfg: FlatConfig) -> CellConfig:
    bw = cfg.get_float("cell.bandwidth_mhz", 10.0)
    bw = int(bw) if bw.is_integer() else bw
    n_prb = cfg.get_int("cell.n_prb") if "cell.n_prb" in cfg else None
    return CellConfig(bandwidth_mhz=bw, n_prb=n_prb,
                      capacity_bps=cfg.get_int("cell.capacity_bps", 32_000_000, minimum=8000))


def ues_from(cfg: FlatConfig) -> list[UeConfig]:
    ues = []
    for ue in cfg.subkeys("ue"):
        if not ue.isdigit():
            raise ConfigError(f"ue.{ue}", "UE ids must be unsigned integers")
        ues.append(UeConfig(
            int(ue),
            offered_ul_bps=cfg.get_int(f"ue.{ue}.offered_ul_bps", 0, minimum=0),
            offered_dl_bps=cfg.get_int(f"ue.{ue}.offered_dl_bps", 0, minimum=0),
            qci=cfg.get_int(f"ue.{ue}.qci", sm_kpm.DEFAULT_QCI, minimum=0),
        ))
    return ues


def parse_shares(key: str, text: str) -> tuple[SliceShare, ...]:
    shares = []
    for item in (p.strip() for p in text.split(",") if p.strip()):
        sid, sep, pct = item.partition(":")
        if not sep or not sid.strip().isdigit() or not pct.strip().isdigit():
            raise ConfigError(key, f"expected slice:percent pairs, got {item!r}")
        shares.append(SliceShare(int(sid), int(pct)))
    return tuple(shares)


def schedule_from(cfg: FlatConfig) -> SliceSchedule:
    slices = tuple((int(s), cfg.require(f"slicing.slice.{s}.name")) for s in cfg.subkeys("slicing.slice"))
    bindings = tuple((int(ue), cfg.get_int(f"slicing.bind.{ue}")) for ue in cfg.subkeys("slicing.bind"))
    phases = []
    for n in cfg.subkeys("slicing.phase"):
        at_key = f"slicing.phase.{n}.at_s"
        at_s = cfg.get_float(at_key)
        if at_s < 0:
            raise ConfigError(at_key, "must be >= 0")
        share_key = f"slicing.phase.{n}.shares"
        phases.append(Phase(at_s, parse_shares(share_key, cfg.require(share_key))))
    return SliceSchedule(tuple(phases), slices, bindings)


def parse_clock(text: str) -> float | None:
    """``det`` -> None (as fast as possible); ``rt`` / ``rt:<scale>`` -> pacing factor."""
    text = text.strip().lower()
    if text in ("det", "deterministic"):
        return None
    if text == "rt" or text.startswith("rt:"):
        scale = float(text[3:]) if text.startswith("rt:") else 1.0
        if scale <= 0:
            raise ConfigError("scenario.clock", "scale must be > 0")
        return scale
    raise ConfigError("scenario.clock", f"expected det or rt[:scale], got {text!r}")


# --- scenario ---------------------------------------------------------------------

@dataclass
class Scenario:
    ric: RicConfig = field(default_factory=RicConfig)
    agent: AgentConfig | None = None
    cell: CellConfig = field(default_factory=CellConfig)
    ues: list[UeConfig] = field(default_factory=list)
    xapps: tuple[str, ...] = ()
    schedule: SliceSchedule = field(default_factory=SliceSchedule)
    duration_s: float = 30
    clock_scale: float | None = None
    seed: int = 0
    latency_ms: int = 0
    jitter_ms: int = 0
    kpimon_period_ms: int = 1000
    slicing_report_period_ms: int = 1000
    descriptors: dict[str, str] = field(default_factory=dict)
    ric_start_ms: int = 0

    def __post_init__(self):
        if self.agent is None:
            self.agent = AgentConfig(self.ric.e2_listen, e2ap.GlobalE2NodeId(e2ap.plmn_from_str("001/01"),
                                                                             e2ap.NodeType.EN_GNB, 1),
                                     (sm_kpm.function_item(), sm_slicing.function_item()))
        if self.duration_s < 1:
            raise ConfigError("scenario.duration_s", "must be >= 1")
        if self.clock_scale is not None and self.clock_scale <= 0:
            raise ConfigError("scenario.clock", "scale must be > 0")
        for name in self.xapps:
            if name not in KNOWN_XAPPS:
                raise ConfigError("scenario.xapps", f"unknown xApp {name!r}")

    @property
    def duration_ms(self) -> int:
        return round(self.duration_s * 1000)

    @classmethod
    def from_config(cls, cfg: FlatConfig) -> Scenario:
        ric = ric_config_from(cfg)
        scn = cls(
            ric=ric,
            agent=agent_config_from(cfg, ric.e2_listen),
            cell=cell_from(cfg),
            ues=ues_from(cfg),
            xapps=tuple(cfg.get_list("scenario.xapps")),
            schedule=schedule_from(cfg),
            duration_s=cfg.get_float("scenario.duration_s"),
            clock_scale=parse_clock(cfg.get("scenario.clock", "det")),
            seed=cfg.get_int("scenario.seed", 0, minimum=0),
            latency_ms=cfg.get_int("link.latency_ms", 0, minimum=0),
            jitter_ms=cfg.get_int("link.jitter_ms", 0, minimum=0),
            kpimon_period_ms=cfg.get_int("kpimon.period_ms", 1000, minimum=1),
            slicing_report_period_ms=cfg.get_int("slicing.report_period_ms", 1000, minimum=1),
            descriptors={name: cfg.get(f"xapp.{name}.descriptor") for name in KNOWN_XAPPS
                         if f"xapp.{name}.descriptor" in cfg},
            ric_start_ms=cfg.get_int("ric.start_ms", 0, minimum=0),
        )
        unused = cfg.unused()
        if unused:
            raise ConfigError(unused[0], "unknown key")
        return scn

    @classmethod
    def load(cls, path) -> Scenario:
        return cls.from_config(FlatConfig.load(path))


@dataclass
class RunResult:
    scenario: Scenario
    loop: VirtualLoop
    ric: RicCore
    agent: E2Agent
    ran: RanSim
    xapps: dict
    sinks: dict
    summary: str = ""

    @property
    def exit_code(self) -> int:
        codes = [x.exit_code for x in self.xapps.values() if x.exit_code]
        if self.agent.state is not AgentState.CONNECTED:
            return EXIT_SUBSCRIPTION
        return codes[0] if codes else EXIT_OK


def _descriptor(scn: Scenario, name: str):
    path = scn.descriptors.get(name)
    return load_descriptor(path) if path else builtin_descriptor(name)


def run_scenario(scn: Scenario, out_dir=None) -> RunResult:
    """Run ``scn`` for its full duration on a virtual clock; write outputs if ``out_dir``."""
    loop = VirtualLoop(pace=scn.clock_scale)
    net = MemoryNetwork(loop, latency_ms=scn.latency_ms, jitter_ms=scn.jitter_ms, seed=scn.seed)
    ric = RicCore(loop, scn.ric)
    ran = RanSim(scn.cell, scn.ues)
    agent = E2Agent(scn.agent, loop, net, ran, default_sm_agents(ran, scn.agent.node))

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    sinks = {name: MetricSink(out / f"{name}.csv" if out is not None else None) for name in KNOWN_XAPPS}

    xapps = {}
    if "kpimon" in scn.xapps:
        xapps["kpimon"] = Kpimon(_descriptor(scn, "kpimon"), loop, net, scn.ric.xapp_listen,
                                 sinks["kpimon"], period_ms=scn.kpimon_period_ms)
    if "slicing" in scn.xapps:
        xapps["slicing"] = SlicingXapp(_descriptor(scn, "slicing"), loop, net, scn.ric.xapp_listen,
                                       sinks["slicing"], scn.schedule,
                                       report_period_ms=scn.slicing_report_period_ms)

    def ric_up():
        net.listen(scn.ric.e2_listen, ric.accept_e2)
        net.listen(scn.ric.xapp_listen, ric.accept_xapp)

    def start_xapps():
        agent.on_connected = None
        for x in xapps.values():
            x.start()

    # xApps start once the node is registered, after every same-time delivery.
    agent.on_connected = lambda: loop.call_soon(start_xapps, PRIO_LATE)

    loop.call_at(scn.ric_start_ms, ric_up, PRIO_LATE - 1)
    loop.call_at(0, agent.start, PRIO_LATE)
    loop.run_until(scn.duration_ms)
    ran.advance_to(scn.duration_ms)

    result = RunResult(scn, loop, ric, agent, ran, xapps, sinks)
    result.summary = render_summary(result)
    for sink in sinks.values():
        sink.close()
    ric.sdl.close()
    if out is not None:
        (out / "summary.txt").write_text(result.summary, encoding="utf-8")
    return result


# --- summary ------------------------------------------------------------------------

def _slope(points) -> float:
    if len(points) < 2:
        return 0.0
    xs, ys = zip(*points)
    return statistics.linear_regression(xs, ys).slope


def kpimon_ue_stats(rows) -> dict[int, dict]:
    """Per-UE cumulative series from KPIMON rows: slopes in bytes/s and final totals."""
    series: dict[tuple[int, str], list[tuple[float, int]]] = {}
    for r in rows:
        name = r.metric_name
        if name.startswith("ue") and name.endswith(("_ul_bytes", "_dl_bytes")):
            ue = int(name[2:name.index("_")])
            series.setdefault((ue, name[-8:-6]), []).append((r.t_ms / 1000, r.value))
    out: dict[int, dict] = {}
    for (ue, direction), pts in sorted(series.items()):
        stats = out.setdefault(ue, {})
        stats[f"{direction}_slope"] = _slope(pts)
        stats[f"{direction}_total"] = pts[-1][1] if pts else 0
        stats[f"{direction}_last_t_ms"] = round(pts[-1][0] * 1000) if pts else 0
    return out


def slicing_phase_stats(rows, schedule: SliceSchedule, duration_ms: int, period_ms: int,
                        transition_ms: int) -> list[dict]:
    """Mean per-slice throughput per phase, skipping reports that overlap the first
    ``transition_ms`` after a share change."""
    tput: dict[int, dict[int, int]] = {}
    for r in rows:
        if r.metric_name == "throughput_bps":
            tput.setdefault(r.t_ms, {})[r.qci_or_slice] = r.value
    slice_ids = sorted({sid for per_t in tput.values() for sid in per_t})
    phases = []
    bounds = [round(p.at_s * 1000) for p in schedule.phases] + [duration_ms]
    for i, phase in enumerate(schedule.phases):
        lo, hi = bounds[i] + transition_ms, bounds[i + 1]
        times = [t for t in sorted(tput) if t - period_ms >= lo and t <= hi]
        means = {sid: (sum(tput[t].get(sid, 0) for t in times) / len(times) if times else 0.0)
                 for sid in slice_ids}
        total = sum(means.values())
        phases.append({
            "index": i + 1, "start_ms": bounds[i], "end_ms": hi, "shares": phase.shares,
            "reports": len(times), "mean_bps": means,
            "ratio_pct": {sid: (100.0 * v / total if total else 0.0) for sid, v in means.items()},
        })
    return phases


def render_summary(result: RunResult) -> str:
    scn = result.scenario
    clock = "det" if scn.clock_scale is None else f"rt:{scn.clock_scale:g}"
    lines = [f"duration_s={scn.duration_s:g} seed={scn.seed} clock={clock}",
             f"node={scn.agent.node} state={result.agent.state.value} setup_attempts={result.agent.attempts}",
             f"indications routed={result.ric.indications_routed} dropped={result.ric.indications_dropped}"]
    if "kpimon" in result.xapps:
        x = result.xapps["kpimon"]
        lines.append(f"[kpimon] exit={x.exit_code if x.exit_code is not None else 'running'} "
                     f"reports={x.reports} warnings={x.warnings}")
        for ue, st in kpimon_ue_stats(result.sinks["kpimon"].rows).items():
            lines.append(f"ue{ue} ul_slope_Bps={st.get('ul_slope', 0.0):.1f} "
                         f"ul_total_bytes={st.get('ul_total', 0)} "
                         f"dl_slope_Bps={st.get('dl_slope', 0.0):.1f} "
                         f"dl_total_bytes={st.get('dl_total', 0)} at_t_ms={st.get('ul_last_t_ms', 0)}")
    if "slicing" in result.xapps:
        x = result.xapps["slicing"]
        acked = sum(1 for c in x.controls if c.outcome == "ack")
        failed = sum(1 for c in x.controls if c.outcome.startswith("failed"))
        lines.append(f"[slicing] exit={x.exit_code if x.exit_code is not None else 'running'} "
                     f"reports={x.reports} controls_acked={acked} controls_failed={failed}")
        for ph in slicing_phase_stats(result.sinks["slicing"].rows, scn.schedule, scn.duration_ms,
                                      scn.slicing_report_period_ms, scn.cell.epoch_subframes):
            shares = ",".join(f"{s.slice_id}:{s.share_percent}" for s in ph["shares"])
            lines.append(f"phase {ph['index']} t_ms=[{ph['start_ms']},{ph['end_ms']}) shares={shares} "
                         f"reports={ph['reports']}")
            for sid in sorted(ph["mean_bps"]):
                lines.append(f"  slice {sid} mean_throughput_bps={ph['mean_bps'][sid]:.1f} "
                             f"ratio_pct={ph['ratio_pct'][sid]:.2f}")
    return "\n".join(lines) + "\n"
