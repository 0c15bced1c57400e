"""RF-condition traces and the parametric SINR-to-BLER link model.

A synthetic drive is a log-distance pathloss profile (the UE rides out to
a far point and back at constant speed) plus AR(1) lognormal shadowing
with a configurable decorrelation distance.  The deterministic profile is
offset so its time average equals the configured mean RSRP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import ar1_series
from ._rng import substream


@dataclass(frozen=True)
class RadioSample:
    t_ms: float
    rsrp_dbm: float
    rsrq_db: float
    sinr_db: float


@dataclass
class RadioTrace:
    """Columnar RF trace; strictly increasing timestamps."""

    t_ms: np.ndarray
    rsrp_dbm: np.ndarray
    rsrq_db: np.ndarray
    sinr_db: np.ndarray

    def __post_init__(self):
        if len(self.t_ms) and np.any(np.diff(self.t_ms) <= 0):
            raise ValueError("radio trace timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t_ms)

    def samples(self) -> list[RadioSample]:
        return [RadioSample(float(t), float(p), float(q), float(s))
                for t, p, q, s in zip(self.t_ms, self.rsrp_dbm,
                                      self.rsrq_db, self.sinr_db)]

    def value_at(self, t_ms: float, column: str = "sinr_db") -> float:
        """Nearest-in-time lookup."""
        values = getattr(self, column)
        i = int(np.searchsorted(self.t_ms, t_ms))
        if i <= 0:
            return float(values[0])
        if i >= len(self.t_ms):
            return float(values[-1])
        left, right = self.t_ms[i - 1], self.t_ms[i]
        return float(values[i] if (t_ms - left) > (right - t_ms) else values[i - 1])

    def nearest_indices(self, t_ms: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.t_ms, t_ms)
        pos = np.clip(pos, 1, len(self.t_ms) - 1) if len(self.t_ms) > 1 else \
            np.zeros_like(pos)
        if len(self.t_ms) > 1:
            left = self.t_ms[pos - 1]
            right = self.t_ms[pos]
            pos = np.where((t_ms - left) <= (right - t_ms), pos - 1, pos)
        return pos


@dataclass(frozen=True)
class RouteParams:
    """Synthetic drive description.

    ``route`` is either ``flat`` (constant distance) or ``out_back``: a
    drive from the near distance out to the far point, a dwell there for
    ``dwell_frac`` of the run, and the ride back.  Distance is log-spaced
    so pathloss in dB is piecewise linear in time.
    """

    duration_ms: float = 60_000.0
    sample_interval_ms: float = 10.0
    route: str = "out_back"
    speed_kmh: float = 80.0
    mean_rsrp_dbm: float = -83.8
    mean_sinr_db: float = 20.2
    dist_near_m: float = 90.0
    dist_far_m: float = 7245.0
    dwell_frac: float = 0.2
    pathloss_exp: float = 3.7
    shadow_sigma_db: float = 0.5
    shadow_corr_m: float = 20.0
    sinr_sigma_db: float = 0.5
    load: float = 0.62

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ValueError("duration_ms must be > 0")
        if self.sample_interval_ms <= 0:
            raise ValueError("sample_interval_ms must be > 0")
        if self.route not in ("flat", "out_back"):
            raise ValueError(f"unknown route {self.route!r}")
        if not 0.0 <= self.dwell_frac < 1.0:
            raise ValueError("dwell_frac must be in [0, 1)")


def _pathloss_profile(route: RouteParams, n: int) -> np.ndarray:
    if route.route == "flat":
        return np.zeros(n)
    phase = np.linspace(0.0, 1.0, n, endpoint=False)
    leg = (1.0 - route.dwell_frac) / 2.0
    tri = np.ones(n)
    out = phase < leg
    back = phase >= leg + route.dwell_frac
    tri[out] = phase[out] / leg
    tri[back] = (1.0 - phase[back]) / leg
    log_d = (np.log10(route.dist_near_m)
             + tri * (np.log10(route.dist_far_m) - np.log10(route.dist_near_m)))
    return 10.0 * route.pathloss_exp * log_d


def synth_drive_trace(route: RouteParams, seed: int = 0) -> RadioTrace:
    """Deterministic synthetic drive trace for a given seed."""
    n = max(2, int(round(route.duration_ms / route.sample_interval_ms)))
    t_ms = np.arange(n, dtype=np.float64) * route.sample_interval_ms
    pl = _pathloss_profile(route, n)
    rsrp = route.mean_rsrp_dbm - (pl - pl.mean())
    if route.shadow_sigma_db > 0:
        step_m = route.speed_kmh / 3.6 * route.sample_interval_ms / 1000.0
        rho = math.exp(-step_m / route.shadow_corr_m)
        z = substream(seed, "shadow").standard_normal(n)
        rsrp = rsrp + route.shadow_sigma_db * ar1_series(z, rho)
    sinr = route.mean_sinr_db + (rsrp - route.mean_rsrp_dbm)
    if route.sinr_sigma_db > 0:
        zs = substream(seed, "sinr-noise").standard_normal(n)
        sinr = sinr + route.sinr_sigma_db * zs
    # receiver EVM floor keeps reported SINR bounded in strong coverage
    sinr = np.minimum(sinr, 30.0)
    sinr_lin = np.power(10.0, sinr / 10.0)
    rsrq = -10.0 * np.log10(12.0 * (route.load + 1.0 / sinr_lin))
    return RadioTrace(t_ms=t_ms, rsrp_dbm=rsrp, rsrq_db=rsrq, sinr_db=sinr)


# --- Link model ---

MAX_MCS = 28


def _default_sinr50() -> tuple[float, ...]:
    return tuple(-6.5 + 0.95 * m for m in range(MAX_MCS + 1))


@dataclass(frozen=True)
class LinkModel:
    """Logistic BLER curves per MCS plus HARQ parameters.

    ``harq_gain_db`` is the effective SINR bonus per retransmission from
    soft combining; a single documented constant keeps the model testable.
    """

    sinr50_db: tuple[float, ...] = field(default_factory=_default_sinr50)
    slope_per_db: float = 2.0
    max_harq_tx: int = 4
    harq_rtt_ms: float = 8.0
    harq_gain_db: float = 1.5

    def __post_init__(self):
        if self.slope_per_db <= 0:
            raise ValueError("slope_per_db must be > 0")
        if any(b <= a for a, b in zip(self.sinr50_db, self.sinr50_db[1:])):
            raise ValueError("sinr50_db must be strictly increasing with MCS")
        if self.max_harq_tx < 1:
            raise ValueError("max_harq_tx must be >= 1")


def bler(sinr_db: float, mcs: int, model: LinkModel) -> float:
    """First-transmission block error probability, in (0, 1)."""
    if not 0 <= mcs < len(model.sinr50_db):
        raise ValueError(f"unknown MCS {mcs}")
    x = model.slope_per_db * (sinr_db - model.sinr50_db[mcs])
    # clamp the exponent so the result stays strictly inside (0, 1)
    x = min(36.0, max(-36.0, x))
    return 1.0 / (1.0 + math.exp(x))


def max_mcs_for(sinr_db: float, target_bler: float, model: LinkModel) -> int:
    """Highest MCS whose BLER at this SINR stays within target (floor 0)."""
    best = 0
    for m in range(len(model.sinr50_db)):
        if bler(sinr_db, m, model) <= target_bler:
            best = m
        else:
            break
    return best


def harq_attempts(uniforms, sinr_db: float, mcs: int,
                  model: LinkModel) -> tuple[int, bool]:
    """Run one HARQ process from pre-drawn uniforms.

    Returns (attempts used, delivered).  Retransmission i benefits from
    ``i * harq_gain_db`` of combining gain.
    """
    for i in range(model.max_harq_tx):
        p = bler(sinr_db + i * model.harq_gain_db, mcs, model)
        if uniforms[i] >= p:
            return i + 1, True
    return model.max_harq_tx, False


def harq_transmit(grant, sinr_db: float, model: LinkModel,
                  seed: int = 0) -> tuple[int, bool, float]:
    """One transport block through HARQ; returns (attempts, delivered, airtime).

    Airtime covers the 1 ms transmission plus one HARQ RTT per
    retransmission.
    """
    mcs = getattr(grant, "mcs", grant if isinstance(grant, int) else 0)
    u = substream(seed, "harq").random(model.max_harq_tx)
    attempts, delivered = harq_attempts(u, sinr_db, mcs, model)
    airtime_ms = 1.0 + (attempts - 1) * model.harq_rtt_ms
    return attempts, delivered, airtime_ms
