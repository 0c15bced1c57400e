"""Deterministic VoLTE link-layer simulator and RTP KPI analysis toolkit."""

__version__ = "0.1.0"

from .bundling import (BundlingConfig, bundle_delay_ms, bundles_needed,
                       should_bundle, validate_bundle_grant)
from .codec import (ActivityKind, ActivityModel, CodecConfig, RtpRecord,
                    amr_wb, generate_stream, rtp_total_packet_bits)
from .kpi import (KpiReport, bin_by_radio, build_report, distribution,
                  error_counts, handover_kpis, mos_estimate, relative_jitter,
                  rtp_error_rate, scheduler_stats, windowed_kpis)
from .pipeline import (ConfigError, DelayModel, EventLog, HandoverModel,
                       JitterBufferConfig, ScenarioConfig,
                       jitter_buffer_playout, run_scenario)
from .radio import (LinkModel, RadioSample, RadioTrace, RouteParams, bler,
                    harq_transmit, synth_drive_trace)
from .rohc import (DecompOutcome, HeaderSizeModel, RateInputs, RohcContext,
                   RohcLink, RohcMode, RohcParams, RohcState,
                   compress, compression_efficiency, decompress,
                   required_channel_rate)
from .scheduler import (DrxConfig, OllaState, ScheduleGrant, SchedulerPolicy,
                        SpsConfig, SpsState, TbsTable, drx_gate, olla_step,
                        rlc_segment, select_grant, sps_update)

__all__ = [name for name in dir() if not name.startswith("_")]
