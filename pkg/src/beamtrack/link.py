"""OOK link budget: beam/aperture coupling, BER, packets, PLR, throughput."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "LinkConfig",
    "PacketResult",
    "RunMetrics",
    "OffsetTrace",
    "q_function",
    "coupled_fraction",
    "calibrate_snr0",
    "ber_ook",
    "eval_packet",
    "packet_bers",
    "summarize_run",
    "HD_FEC_BER",
]

HD_FEC_BER = 3.8e-3

# radial lookup table for the coupled fraction
_GRID_STEP = 1e-5          # m
_GRID_SPAN_SIGMAS = 15.0   # beyond aperture + 15 sigma the fraction is 0
_N_RADIAL = 160
_N_ANGULAR = 256


@dataclass(frozen=True)
class LinkConfig:
    spot_radius_sigma: float = 1e-3
    aperture_radius: float = 6e-3
    snr0_db: float | None = None     # None -> calibrated to the FEC edge
    data_rate: float = 1e9
    ref_rate: float = 1e9            # rate at which snr0 applies
    symbols_per_packet: int = 10_000
    packets_per_run: int = 100
    fec_ber: float = HD_FEC_BER
    fec_edge: float = 7e-3           # offset where BER equals fec_ber at ref_rate

    def __post_init__(self):
        for name in ("spot_radius_sigma", "aperture_radius", "data_rate", "ref_rate",
                     "fec_edge"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.symbols_per_packet < 1 or self.packets_per_run < 1:
            raise ValueError("packet sizes must be positive")
        if not 0 < self.fec_ber < 0.5:
            raise ValueError("fec_ber must lie in (0, 0.5)")

    @property
    def packet_duration(self) -> float:
        return self.symbols_per_packet / self.data_rate

    @property
    def snr0(self) -> float:
        """Linear boresight SNR at ``ref_rate``."""
        if self.snr0_db is None:
            return calibrate_snr0(self)
        return 10.0 ** (self.snr0_db / 10.0)

    def calibrated(self) -> "LinkConfig":
        return replace(self, snr0_db=10.0 * math.log10(calibrate_snr0(self)))


@dataclass(frozen=True)
class PacketResult:
    ber: float
    lost: bool


@dataclass
class OffsetTrace:
    """Offsets of the spot from the receiver centre, one row per substep."""
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.t)

    @property
    def radial(self) -> np.ndarray:
        return np.hypot(self.x, self.y)

    def samples(self):
        from .geometry import SpotSample
        vx = np.gradient(self.x, self.t) if len(self.t) > 1 else np.zeros_like(self.x)
        vy = np.gradient(self.y, self.t) if len(self.t) > 1 else np.zeros_like(self.y)
        for row in zip(self.t, self.x, self.y, vx, vy):
            yield SpotSample(*map(float, row))


@dataclass
class RunMetrics:
    mean_ber: float
    plr: float
    throughput: float
    offset_std_x: float
    offset_std_y: float
    n_packets: int
    offset_trace: OffsetTrace | None = field(default=None, repr=False)

    @property
    def offset_std(self) -> float:
        return math.hypot(self.offset_std_x, self.offset_std_y)


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return ndtr(-np.asarray(x, dtype=float))


@lru_cache(maxsize=16)
def _fraction_table(sigma: float, aperture: float):
    # 2-D quadrature over the aperture disc in polar coordinates:
    # Gauss-Legendre in radius, trapezoid (spectrally accurate for periodic
    # integrands) in angle; half-plane by symmetry.
    r_max = aperture + _GRID_SPAN_SIGMAS * sigma
    grid = np.arange(0.0, r_max + _GRID_STEP, _GRID_STEP)
    nodes, weights = np.polynomial.legendre.leggauss(_N_RADIAL)
    rho = 0.5 * aperture * (nodes + 1.0)
    w_rho = 0.5 * aperture * weights
    phi = (np.arange(_N_ANGULAR) + 0.5) * np.pi / _N_ANGULAR
    cos_phi = np.cos(phi)
    frac = np.empty_like(grid)
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    for start in range(0, len(grid), 64):
        r0 = grid[start:start + 64, None, None]
        dist2 = rho[None, :, None] ** 2 + r0 ** 2 - 2.0 * rho[None, :, None] * r0 * cos_phi
        dens = np.exp(-dist2 * inv2s2) * inv2s2 / np.pi
        ang = dens.sum(axis=2) * (2.0 * np.pi / _N_ANGULAR)   # both half-planes
        frac[start:start + 64] = (ang * rho * w_rho).sum(axis=1)
    return grid, np.clip(frac, 0.0, 1.0)


def coupled_fraction(offset, cfg: LinkConfig = LinkConfig()):
    """Fraction of a circular Gaussian beam's power landing inside the aperture."""
    grid, frac = _fraction_table(cfg.spot_radius_sigma, cfg.aperture_radius)
    r = np.abs(np.asarray(offset, dtype=float))
    out = np.interp(r, grid, frac, right=0.0)
    out = np.where(np.isnan(r), 0.0, out)
    return float(out) if out.ndim == 0 else out


def calibrate_snr0(cfg: LinkConfig) -> float:
    """Boresight SNR that puts BER exactly at ``fec_ber`` for an offset of ``fec_edge``.

    BER = Q(sqrt(snr0) * fraction) is monotone in snr0, so the root is the
    closed form sqrt(snr0) = Q^-1(fec_ber) / fraction(edge).
    """
    return _calibrate(cfg.spot_radius_sigma, cfg.aperture_radius, cfg.fec_edge, cfg.fec_ber)


@lru_cache(maxsize=64)
def _calibrate(sigma, aperture, edge, fec_ber) -> float:
    probe = LinkConfig(spot_radius_sigma=sigma, aperture_radius=aperture,
                       snr0_db=0.0, fec_edge=edge, fec_ber=fec_ber)
    frac = coupled_fraction(edge, probe)
    if frac <= 0:
        raise ValueError("aperture collects no power at the FEC edge")
    return float((-ndtri(fec_ber) / frac) ** 2)


def ber_ook(offset, cfg: LinkConfig = LinkConfig()):
    """OOK bit error rate at a radial spot offset.

    Square-law detection with signal-independent noise: electrical SNR
    scales with the coupled power squared and inversely with the data rate.
    Non-finite offsets (outage) give BER 0.5.
    """
    snr = cfg.snr0 * (cfg.ref_rate / cfg.data_rate) * coupled_fraction(offset, cfg) ** 2
    ber = q_function(np.sqrt(snr))
    return float(ber) if np.ndim(ber) == 0 else ber


def eval_packet(offsets, cfg: LinkConfig = LinkConfig()) -> PacketResult:
    """Packet verdict from the radial offsets sampled during its window."""
    offsets = np.asarray(offsets, dtype=float)
    if offsets.size == 0:
        raise ValueError("packet window holds no samples")
    ber = float(np.mean(ber_ook(offsets, cfg)))
    return PacketResult(ber, ber > cfg.fec_ber)


def packet_bers(t, ber, t_end: float, cfg: LinkConfig = LinkConfig()) -> np.ndarray:
    """Time-averaged BER of back-to-back packets over ``[t[0], t_end)``.

    The per-sample BER is held constant until the next sample, so packets
    shorter than the sample interval take the value of the sample they fall
    in, and longer packets average the samples they span.
    """
    t = np.asarray(t, dtype=float)
    ber = np.asarray(ber, dtype=float)
    edges = np.append(t, t_end)
    cum = np.concatenate([[0.0], np.cumsum(ber * np.diff(edges))])
    tp = cfg.packet_duration
    n = int(math.floor((t_end - t[0]) / tp * (1 + 1e-12)))
    bounds = t[0] + tp * np.arange(n + 1)
    area = np.interp(bounds, edges, cum)
    return np.diff(area) / tp


def summarize_run(packets, offsets: OffsetTrace, cfg: LinkConfig = LinkConfig()) -> RunMetrics:
    """Aggregate packet verdicts and offset statistics for one run.

    ``packets`` is either a sequence of :class:`PacketResult` or an array of
    per-packet BERs.
    """
    if len(packets) and isinstance(packets[0], PacketResult):
        bers = np.array([p.ber for p in packets], dtype=float)
        lost = np.array([p.lost for p in packets], dtype=bool)
    else:
        bers = np.asarray(packets, dtype=float)
        lost = bers > cfg.fec_ber
    if len(bers) < cfg.packets_per_run:
        raise ValueError(f"run holds {len(bers)} packets, need {cfg.packets_per_run}")
    plr = float(np.count_nonzero(lost)) / len(bers)
    std_x = float(np.nanstd(offsets.x)) if len(offsets) else 0.0
    std_y = float(np.nanstd(offsets.y)) if len(offsets) else 0.0
    return RunMetrics(
        mean_ber=float(np.mean(bers)),
        plr=plr,
        throughput=cfg.data_rate * (1.0 - plr),
        offset_std_x=std_x,
        offset_std_y=std_y,
        n_packets=len(bers),
        offset_trace=offsets,
    )
