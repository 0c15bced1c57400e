"""Scenario configuration: flat INI files (key = value under sections),
shipped presets, and canonical hashing for run manifests.

Unknown sections or keys are rejected with the offending name so a typo
never silently falls back to a default.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict
from importlib import resources

from .bundling import BundlingConfig
from .codec import ActivityKind, ActivityModel, CodecConfig, amr_wb
from .pipeline import (ConfigError, DelayModel, HandoverModel,
                       JitterBufferConfig, ScenarioConfig)
from .radio import LinkModel, RouteParams
from .rohc import HeaderSizeModel, RohcMode, RohcParams
from .scheduler import DrxConfig, SchedulerPolicy, SpsConfig

PRESET_NAMES = (
    "volte_only_rohc_on",
    "volte_data_rohc_on",
    "volte_only_rohc_off",
    "cell_edge_bundling_on",
    "cell_edge_bundling_off",
    "scheduler_policy_1",
    "scheduler_policy_2",
)


class _Section:
    """Typed accessor over one INI section that tracks unknown keys."""

    def __init__(self, name: str, raw: dict[str, str]):
        self.name = name
        self.raw = dict(raw)
        self.used: set[str] = set()

    def _get(self, key: str):
        self.used.add(key)
        return self.raw.get(key)

    def get_float(self, key: str, default: float) -> float:
        v = self._get(key)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: not a number: {v!r}")

    def get_int(self, key: str, default: int) -> int:
        v = self._get(key)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: not an integer: {v!r}")

    def get_bool(self, key: str, default: bool) -> bool:
        v = self._get(key)
        if v is None:
            return default
        low = v.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{self.name}.{key}: not a boolean: {v!r}")

    def get_str(self, key: str, default: str) -> str:
        v = self._get(key)
        return default if v is None else v.strip()

    def check_unknown(self):
        unknown = set(self.raw) - self.used
        if unknown:
            raise ConfigError(
                f"{self.name}: unknown keys {sorted(unknown)}")


_KNOWN_SECTIONS = ("run", "codec", "activity", "rohc", "traffic", "scheduler",
                   "sps", "drx", "bundling", "radio", "link", "handover",
                   "core", "jitter_buffer")


def parse_config(parser: configparser.ConfigParser,
                 seed_override: int | None = None) -> ScenarioConfig:
    unknown = set(parser.sections()) - set(_KNOWN_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    sec = {name: _Section(name, dict(parser[name]) if parser.has_section(name)
                          else {}) for name in _KNOWN_SECTIONS}

    s = sec["codec"]
    rate = s.get_float("rate_kbps", 12.65)
    codec = amr_wb(rate)
    codec = CodecConfig(
        codec_rate_kbps=rate,
        frame_interval_ms=s.get_float("frame_interval_ms",
                                      codec.frame_interval_ms),
        amr_header_bits=s.get_int("amr_header_bits", codec.amr_header_bits),
        rtp_header_bits=s.get_int("rtp_header_bits", codec.rtp_header_bits),
        proto_header_bits=s.get_int("proto_header_bits",
                                    codec.proto_header_bits),
        amr_payload_bytes=s.get_int("amr_payload_bytes",
                                    codec.amr_payload_bytes),
    )

    s = sec["activity"]
    kind_str = s.get_str("kind", "continuous")
    try:
        kind = ActivityKind(kind_str)
    except ValueError:
        raise ConfigError(f"activity.kind: unknown value {kind_str!r}")
    activity = ActivityModel(
        kind=kind,
        mean_talkspurt_ms=s.get_float("mean_talkspurt_ms", 1500.0),
        mean_silence_ms=s.get_float("mean_silence_ms", 800.0),
    )

    s = sec["rohc"]
    rohc_enabled = s.get_bool("enabled", True)
    mode_str = s.get_str("mode", "O").upper()
    try:
        rohc_mode = RohcMode(mode_str)
    except ValueError:
        raise ConfigError(f"rohc.mode: unknown value {mode_str!r}")
    try:
        rohc_sizes = HeaderSizeModel(
            full_header_bytes=s.get_float("full_header_bytes", 40.0),
            ir_overhead_bytes=s.get_float("ir_overhead_bytes", 3.0),
            fo_header_bytes=s.get_float("fo_header_bytes", 12.0),
            so_header_bytes=s.get_float("so_header_bytes", 1.0),
        )
        rohc_params = RohcParams(
            u_repeat_k=s.get_int("u_repeat_k", 3),
            fo_min_dwell=s.get_int("fo_min_dwell", 10),
            ir_refresh_period=s.get_int("ir_refresh_period", 100),
        )
    except ValueError as exc:
        raise ConfigError(f"rohc: {exc}")
    l2_overhead = s.get_float("l2_overhead_bytes", 8.0)

    s = sec["sps"]
    sps = None
    if s.get_bool("enabled", False):
        try:
            sps = SpsConfig(
                period_subframes=s.get_int("period_subframes", 20),
                release_empty_count=s.get_int("release_empty_count", 3),
            )
        except ValueError as exc:
            raise ConfigError(f"sps: {exc}")

    s = sec["drx"]
    drx = None
    if s.get_bool("enabled", False):
        try:
            drx = DrxConfig(
                long_cycle_ms=s.get_float("long_cycle_ms", 40.0),
                on_duration_ms=s.get_float("on_duration_ms", 10.0),
                inactivity_timer_ms=s.get_float("inactivity_timer_ms", 100.0),
            )
        except ValueError as exc:
            raise ConfigError(f"drx: {exc}")

    s = sec["scheduler"]
    base_policy = SchedulerPolicy()
    try:
        policy = SchedulerPolicy(
            multiplex_voice_data=s.get_bool("multiplex_voice_data", False),
            allow_rank2_voice_split=s.get_bool("allow_rank2_voice_split",
                                               False),
            rank2_split_prob=s.get_float("rank2_split_prob",
                                         base_policy.rank2_split_prob),
            target_bler=s.get_float("target_bler", base_policy.target_bler),
            max_prb_per_grant=s.get_int("max_prb_per_grant",
                                        base_policy.max_prb_per_grant),
            pipeline_depth_tti=s.get_int("pipeline_depth_tti",
                                         base_policy.pipeline_depth_tti),
            rlc_reassembly_ms=s.get_float("rlc_reassembly_ms",
                                          base_policy.rlc_reassembly_ms),
            seg_overhead_bits=s.get_int("seg_overhead_bits",
                                        base_policy.seg_overhead_bits),
            sps=sps, drx=drx,
        )
    except ValueError as exc:
        raise ConfigError(f"scheduler: {exc}")
    tbs_table_path = s.get_str("tbs_table_csv", "") or None

    s = sec["traffic"]
    concurrent_data = s.get_bool("concurrent_data", False)
    data_rate_kbps = s.get_float("data_rate_kbps", 0.0)

    s = sec["bundling"]
    bundling = None
    if s.get_bool("enabled", False):
        try:
            bundling = BundlingConfig(
                bundle_size=s.get_int("bundle_size", 4),
                max_tbs_bits=s.get_int("max_tbs_bits", 504),
                max_prb=s.get_int("max_prb", 3),
                max_mcs=s.get_int("max_mcs", 10),
                trigger_sinr_db=s.get_float("trigger_sinr_db", -2.0),
                release_sinr_db=s.get_float("release_sinr_db", 2.0),
                bundle_harq_rtt_ms=s.get_float("bundle_harq_rtt_ms", 16.0),
                coverage_gain_db=s.get_float("coverage_gain_db", 4.0),
            )
        except ValueError as exc:
            raise ConfigError(f"bundling: {exc}")

    s = sec["run"]
    duration_ms = s.get_float("duration_ms", 30_000.0)
    seed = s.get_int("seed", 1)
    direction = s.get_str("direction", "dl")
    stream_id = s.get_str("stream_id", direction)
    drop_timeout = s.get_float("call_drop_timeout_ms", 10_000.0)

    s = sec["radio"]
    trace_csv = s.get_str("trace_csv", "")
    route = None
    if not trace_csv:
        base = RouteParams(duration_ms=duration_ms)
        try:
            route = RouteParams(
                duration_ms=s.get_float("duration_ms", duration_ms),
                sample_interval_ms=s.get_float("sample_interval_ms",
                                               base.sample_interval_ms),
                route=s.get_str("route", base.route),
                speed_kmh=s.get_float("speed_kmh", base.speed_kmh),
                mean_rsrp_dbm=s.get_float("mean_rsrp_dbm", base.mean_rsrp_dbm),
                mean_sinr_db=s.get_float("mean_sinr_db", base.mean_sinr_db),
                dist_near_m=s.get_float("dist_near_m", base.dist_near_m),
                dist_far_m=s.get_float("dist_far_m", base.dist_far_m),
                dwell_frac=s.get_float("dwell_frac", base.dwell_frac),
                pathloss_exp=s.get_float("pathloss_exp", base.pathloss_exp),
                shadow_sigma_db=s.get_float("shadow_sigma_db",
                                            base.shadow_sigma_db),
                shadow_corr_m=s.get_float("shadow_corr_m", base.shadow_corr_m),
                sinr_sigma_db=s.get_float("sinr_sigma_db", base.sinr_sigma_db),
                load=s.get_float("load", base.load),
            )
        except ValueError as exc:
            raise ConfigError(f"radio: {exc}")

    s = sec["link"]
    try:
        link = LinkModel(
            slope_per_db=s.get_float("slope_per_db", 2.0),
            max_harq_tx=s.get_int("max_harq_tx", 4),
            harq_rtt_ms=s.get_float("harq_rtt_ms", 8.0),
            harq_gain_db=s.get_float("harq_gain_db", 1.5),
        )
    except ValueError as exc:
        raise ConfigError(f"link: {exc}")

    s = sec["handover"]
    handover = HandoverModel(
        trigger=s.get_str("trigger", "none"),
        periodic_ms=s.get_float("periodic_ms", 10_000.0),
        rsrp_crossing_dbm=s.get_float("rsrp_crossing_dbm", -110.0),
        min_spacing_ms=s.get_float("min_spacing_ms", 2_000.0),
        interruption_mean_ms=s.get_float("interruption_mean_ms", 75.0),
        interruption_jitter_ms=s.get_float("interruption_jitter_ms", 0.0),
        extra_sched_delay_ms=s.get_float("extra_sched_delay_ms", 40.0),
    )

    s = sec["core"]
    base_core = DelayModel()
    core = DelayModel(base_ms=s.get_float("base_ms", base_core.base_ms),
                      exp_mean_ms=s.get_float("exp_mean_ms",
                                              base_core.exp_mean_ms))

    s = sec["jitter_buffer"]
    jbuf = JitterBufferConfig(
        min_depth_ms=s.get_float("min_depth_ms", 20.0),
        max_depth_ms=s.get_float("max_depth_ms", 100.0),
        init_depth_ms=s.get_float("init_depth_ms", 40.0),
        percentile=s.get_float("percentile", 95.0),
        window_pkts=s.get_int("window_pkts", 50),
    )

    for section in sec.values():
        section.check_unknown()

    return ScenarioConfig(
        codec=codec, activity=activity, duration_ms=duration_ms,
        seed=seed_override if seed_override is not None else seed,
        rohc_enabled=rohc_enabled, rohc_mode=rohc_mode,
        rohc_sizes=rohc_sizes, rohc_params=rohc_params,
        l2_overhead_bytes=l2_overhead, concurrent_data=concurrent_data,
        data_rate_kbps=data_rate_kbps,
        policy=policy, link=link, bundling=bundling, route=route,
        radio_trace_path=trace_csv or None, handover=handover,
        core_delay=core, jitter_buffer=jbuf,
        call_drop_timeout_ms=drop_timeout, tbs_table_path=tbs_table_path,
        direction=direction, stream_id=stream_id,
    )


def load_config(path, seed_override: int | None = None) -> ScenarioConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}")
    return parse_config(parser, seed_override)


def load_preset(name: str, seed_override: int | None = None) -> ScenarioConfig:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; pick one of "
                          f"{', '.join(PRESET_NAMES)}")
    ref = resources.files("voltesim").joinpath(f"presets/{name}.ini")
    parser = configparser.ConfigParser()
    parser.read_string(ref.read_text(encoding="utf-8"))
    return parse_config(parser, seed_override)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    """Canonical JSON-able view of a resolved scenario (for hashing and
    for exact re-runs from a manifest)."""
    out = asdict(cfg)
    out["rohc_mode"] = cfg.rohc_mode.value
    out["activity"]["kind"] = cfg.activity.kind.value
    if cfg.policy.sps is not None:
        out["policy"]["sps"] = asdict(cfg.policy.sps)
    if cfg.policy.drx is not None:
        out["policy"]["drx"] = asdict(cfg.policy.drx)
    out["link"]["sinr50_db"] = list(cfg.link.sinr50_db)
    return out


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Rebuild a resolved scenario from :func:`scenario_to_dict` output."""
    d = dict(data)
    d["codec"] = CodecConfig(**d["codec"])
    act = dict(d["activity"])
    act["kind"] = ActivityKind(act["kind"])
    d["activity"] = ActivityModel(**act)
    d["rohc_mode"] = RohcMode(d["rohc_mode"])
    d["rohc_sizes"] = HeaderSizeModel(**d["rohc_sizes"])
    d["rohc_params"] = RohcParams(**d["rohc_params"])
    pol = dict(d["policy"])
    pol["sps"] = SpsConfig(**pol["sps"]) if pol.get("sps") else None
    pol["drx"] = DrxConfig(**pol["drx"]) if pol.get("drx") else None
    # JSON turns the int QCI keys into strings
    pol["qci_priority"] = {int(k): x
                           for k, x in pol["qci_priority"].items()}
    d["policy"] = SchedulerPolicy(**pol)
    link = dict(d["link"])
    link["sinr50_db"] = tuple(link["sinr50_db"])
    d["link"] = LinkModel(**link)
    d["bundling"] = BundlingConfig(**d["bundling"]) if d.get("bundling") else None
    d["route"] = RouteParams(**d["route"]) if d.get("route") else None
    d["handover"] = HandoverModel(**d["handover"])
    d["core_delay"] = DelayModel(**d["core_delay"])
    d["jitter_buffer"] = JitterBufferConfig(**d["jitter_buffer"])
    return ScenarioConfig(**d)


def scenario_hash(cfg: ScenarioConfig) -> str:
    body = json.dumps(scenario_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(body.encode("utf-8")).hexdigest()
