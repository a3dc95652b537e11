"""Gaussian-noise link model with EDFA gain droop.

All quantities are per channel and evaluated at the centre of a flat WDM
grid. Amplifiers run in constant-output-power mode, so every span is
launched with the same per-channel power and the signal decays by a
survival factor ``eta`` per span.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import (
    DegenerateLinkError,
    DispersionFreeError,
    DomainError,
    UnsustainableSpanError,
)
from .units import LIGHT_SPEED_M_S, PLANCK_J_S, db_to_linear, linear_to_db

DEFAULT_LOOP_TURN_KM = 300.0


@dataclass(frozen=True)
class FiberSpec:
    loss_db_per_km: float
    gamma_per_w_km: float
    dispersion_ps_nm_km: float
    reference_wavelength_m: float = 1550e-9

    def __post_init__(self):
        if not self.loss_db_per_km > 0:
            raise DomainError(f"loss_db_per_km must be > 0, got {self.loss_db_per_km}")
        if not self.gamma_per_w_km >= 0:
            raise DomainError(f"gamma_per_w_km must be >= 0, got {self.gamma_per_w_km}")
        if not 1.2e-6 < self.reference_wavelength_m < 1.7e-6:
            raise DomainError(
                f"reference_wavelength_m must lie in (1.2e-6, 1.7e-6), got {self.reference_wavelength_m}"
            )

    @classmethod
    def scuba(cls) -> "FiberSpec":
        """Ultra-low-loss large-area submarine fibre used in the design studies."""
        return cls(loss_db_per_km=0.155, gamma_per_w_km=0.715, dispersion_ps_nm_km=22.0)

    @property
    def alpha_linear_per_km(self) -> float:
        return self.loss_db_per_km * math.log(10.0) / 10.0

    @property
    def beta2_s2_per_m(self) -> float:
        # ps/(nm km) -> s/m^2
        d_si = self.dispersion_ps_nm_km * 1e-6
        return -d_si * self.reference_wavelength_m**2 / (2.0 * math.pi * LIGHT_SPEED_M_S)

    @property
    def beta2_s2_per_km(self) -> float:
        return self.beta2_s2_per_m * 1e3


@dataclass(frozen=True)
class AmplifierSpec:
    noise_figure_db: float = 4.5
    mode: str = "constant-output-power"
    warn_below_noise_figure_db: float = 3.0

    def __post_init__(self):
        if self.mode != "constant-output-power":
            raise DomainError(f"unsupported amplifier mode {self.mode!r}")
        if self.noise_figure_db < self.warn_below_noise_figure_db:
            warnings.warn(
                f"noise figure {self.noise_figure_db} dB is below the "
                f"{self.warn_below_noise_figure_db} dB quantum limit",
                stacklevel=3,
            )

    @property
    def n_sp(self) -> float:
        """Spontaneous-emission factor in the high-gain limit."""
        return db_to_linear(self.noise_figure_db) / 2.0


@dataclass(frozen=True)
class WdmGrid:
    channel_count: int
    symbol_rate_hz: float
    channel_spacing_hz: float
    center_frequency_hz: float = 193.4e12

    def __post_init__(self):
        if int(self.channel_count) != self.channel_count or self.channel_count < 1:
            raise DomainError(f"channel_count must be a positive integer, got {self.channel_count}")
        if not self.symbol_rate_hz > 0:
            raise DomainError(f"symbol_rate_hz must be > 0, got {self.symbol_rate_hz}")
        if self.symbol_rate_hz > self.channel_spacing_hz:
            raise DomainError(
                f"symbol rate {self.symbol_rate_hz} Hz exceeds channel spacing {self.channel_spacing_hz} Hz"
            )
        if not self.center_frequency_hz > 0:
            raise DomainError("center_frequency_hz must be > 0")

    @classmethod
    def c_band(cls) -> "WdmGrid":
        """117 Nyquist-spaced 32 GBaud channels, about 3.7 THz of signal band."""
        return cls(channel_count=117, symbol_rate_hz=32e9, channel_spacing_hz=32e9)

    @property
    def total_bandwidth_hz(self) -> float:
        return self.channel_count * self.channel_spacing_hz


@dataclass(frozen=True)
class LinkGeometry:
    """Everything that defines a link except the launch power.

    ``span_count`` may be non-integral: the continuous span-length search
    evaluates the model at ``total / span``. Designs emitted by the optimizer
    and cable designer always carry integral counts.
    """

    fiber: FiberSpec
    amplifier: AmplifierSpec
    grid: WdmGrid
    span_length_km: float
    span_count: float
    b2b_snr_linear: float | None = None
    loop_noise_power_w: float | None = None
    loop_turn_km: float = DEFAULT_LOOP_TURN_KM
    excess_loss_db_per_span: float = 0.0

    def __post_init__(self):
        if not self.span_length_km > 0:
            raise DomainError(f"span_length_km must be > 0, got {self.span_length_km}")
        if not self.span_count >= 1:
            raise DomainError(f"span_count must be >= 1, got {self.span_count}")
        if self.b2b_snr_linear is not None and not self.b2b_snr_linear > 0:
            raise DomainError("b2b_snr_linear must be > 0 when given")
        if self.loop_noise_power_w is not None and self.loop_noise_power_w < 0:
            raise DomainError("loop_noise_power_w must be >= 0 when given")
        if not self.loop_turn_km > 0:
            raise DomainError("loop_turn_km must be > 0")
        if self.excess_loss_db_per_span < 0:
            raise DomainError("excess_loss_db_per_span must be >= 0")

    @property
    def total_length_km(self) -> float:
        return self.span_length_km * self.span_count

    @property
    def span_loss_linear(self) -> float:
        """Span transmission ``A`` (a number in (0, 1))."""
        a = math.exp(-self.fiber.alpha_linear_per_km * self.span_length_km)
        if self.excess_loss_db_per_span:
            a /= db_to_linear(self.excess_loss_db_per_span)
        return a

    @property
    def has_extra_noise(self) -> bool:
        return (self.b2b_snr_linear is not None and math.isfinite(self.b2b_snr_linear)) or bool(
            self.loop_noise_power_w
        )

    @property
    def loop_turns(self) -> int:
        return math.ceil(self.total_length_km / self.loop_turn_km - 1e-9)

    def with_power(self, per_channel_launch_power_w: float) -> "LinkConfig":
        values = {f.name: getattr(self, f.name) for f in fields(LinkGeometry)}
        return LinkConfig(**values, per_channel_launch_power_w=per_channel_launch_power_w)

    def with_spans(self, span_length_km: float, span_count: float) -> "LinkGeometry":
        return replace(self, span_length_km=span_length_km, span_count=span_count)

    def geometry(self) -> "LinkGeometry":
        values = {f.name: getattr(self, f.name) for f in fields(LinkGeometry)}
        return LinkGeometry(**values)


@dataclass(frozen=True, kw_only=True)
class LinkConfig(LinkGeometry):
    per_channel_launch_power_w: float

    def __post_init__(self):
        super().__post_init__()
        if not self.per_channel_launch_power_w > 0:
            raise DomainError(
                f"per_channel_launch_power_w must be > 0, got {self.per_channel_launch_power_w}"
            )


@dataclass(frozen=True)
class GsnrBreakdown:
    gain_linear: float
    p_ase_w: float
    p_nl_w: float
    eta: float
    gsnr_linear: float
    gsnr_db: float
    gsnr_modified_linear: float
    p_signal_w: float = 0.0
    p_ase_nl_total_w: float = 0.0
    p_b2b_w: float = 0.0
    p_loop_total_w: float = 0.0

    @property
    def gsnr_modified_db(self) -> float:
        return _safe_db(self.gsnr_modified_linear)


def _safe_db(x: float) -> float:
    return -math.inf if x <= 0 else linear_to_db(x)


def _ase_constant(geometry: LinkGeometry) -> float:
    """``2 h f0 n_sp R_s``: ASE power per unit of excess gain."""
    return (
        2.0
        * PLANCK_J_S
        * geometry.grid.center_frequency_hz
        * geometry.amplifier.n_sp
        * geometry.grid.symbol_rate_hz
    )


def nli_coefficient(geometry: LinkGeometry) -> float:
    """Per-span NLI power divided by the cube of the per-channel power, in 1/W^2.

    The signal PSD entering the closed form is the whole comb's power spread
    over the WDM band, ``N_ch * P_ch / B_WDM``.
    """
    fiber, grid = geometry.fiber, geometry.grid
    beta2 = abs(fiber.beta2_s2_per_km)
    if beta2 == 0.0:
        raise DispersionFreeError("the GN closed form needs a non-zero dispersion")
    alpha = fiber.alpha_linear_per_km
    l_eff = (1.0 - math.exp(-alpha * geometry.span_length_km)) / alpha
    l_eff_a = 1.0 / alpha
    b_wdm = grid.total_bandwidth_hz
    spectral = math.asinh(0.5 * math.pi**2 * beta2 * l_eff_a * b_wdm**2) / (math.pi * beta2 * l_eff_a)
    psd_scale = (grid.channel_count / b_wdm) ** 3
    return (8.0 / 27.0) * fiber.gamma_per_w_km**2 * l_eff**2 * spectral * psd_scale * grid.symbol_rate_hz


def droop_gain(link: LinkConfig) -> float:
    """Amplifier gain that restores the launch power after ASE is accounted for.

    Solving ``G = (1 - P_ASE/P_in)/A`` together with ``P_ASE = c (G - 1)``
    gives ``G = (P_in + c)/(A P_in + c)``.
    """
    p_in = link.per_channel_launch_power_w
    c = _ase_constant(link)
    denom = link.span_loss_linear * p_in + c
    if denom <= 0.0 or not math.isfinite(denom):
        raise DegenerateLinkError(f"droop denominator {denom!r} is not a positive finite number")
    gain = (p_in + c) / denom
    if not gain > 1.0:
        raise UnsustainableSpanError(f"droop gain {gain!r} does not exceed 1")
    return gain


def ase_power(link: LinkGeometry, gain: float) -> float:
    """Per-channel ASE power added by one amplifier, both polarisations."""
    if gain < 1.0:
        raise DomainError(f"gain must be >= 1, got {gain}")
    return _ase_constant(link) * (gain - 1.0)


def nonlinear_power(link: LinkConfig) -> float:
    return nli_coefficient(link) * link.per_channel_launch_power_w**3


def evaluate_gsnr(link: LinkConfig) -> GsnrBreakdown:
    gain = droop_gain(link)
    p_in = link.per_channel_launch_power_w
    p_ase = ase_power(link, gain)
    p_nl = nonlinear_power(link)
    eta = 1.0 - (p_ase + p_nl) / p_in
    if not eta > 0.0:
        raise UnsustainableSpanError(
            f"span noise {p_ase + p_nl:.3e} W reaches the launch power {p_in:.3e} W"
        )
    survival = eta**link.span_count
    gsnr = survival / (1.0 - survival)

    p_b2b = 0.0
    p_loop = 0.0
    p_total = p_in * (1.0 - survival) / survival if survival > 0 else math.inf
    if link.has_extra_noise:
        if link.b2b_snr_linear is not None and math.isfinite(link.b2b_snr_linear):
            p_b2b = p_in / link.b2b_snr_linear
        if link.loop_noise_power_w:
            p_loop = link.loop_noise_power_w * link.loop_turns
        gsnr_mod = p_in / (p_total + p_b2b + p_loop)
    else:
        gsnr_mod = gsnr

    return GsnrBreakdown(
        gain_linear=gain,
        p_ase_w=p_ase,
        p_nl_w=p_nl,
        eta=eta,
        gsnr_linear=gsnr,
        gsnr_db=_safe_db(gsnr),
        gsnr_modified_linear=gsnr_mod,
        p_signal_w=p_in,
        p_ase_nl_total_w=p_total,
        p_b2b_w=p_b2b,
        p_loop_total_w=p_loop,
    )


def effective_gsnr(link: LinkConfig) -> float:
    """GSNR including back-to-back and loop terms when they are configured."""
    b = evaluate_gsnr(link)
    return b.gsnr_modified_linear


def gsnr_for_powers(geometry: LinkGeometry, powers_w) -> np.ndarray:
    """Vectorised effective GSNR over an array of per-channel launch powers.

    Powers at which a span is unsustainable map to 0 instead of raising, so
    sweeps can scan past the nonlinear threshold.
    """
    p = np.asarray(powers_w, dtype=float)
    c = _ase_constant(geometry)
    a = geometry.span_loss_linear
    gain = (p + c) / (a * p + c)
    p_ase = c * (gain - 1.0)
    p_nl = nli_coefficient(geometry) * p**3
    eta = 1.0 - (p_ase + p_nl) / p
    ok = eta > 0.0
    survival = np.where(ok, np.where(ok, eta, 1.0) ** geometry.span_count, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        gsnr = np.where(survival < 1.0, survival / (1.0 - survival), 0.0)
        if geometry.has_extra_noise:
            inv = np.where(gsnr > 0, 1.0 / gsnr, np.inf)
            if geometry.b2b_snr_linear is not None and math.isfinite(geometry.b2b_snr_linear):
                inv = inv + 1.0 / geometry.b2b_snr_linear
            if geometry.loop_noise_power_w:
                inv = inv + geometry.loop_noise_power_w * geometry.loop_turns / p
            gsnr = np.where(np.isfinite(inv), 1.0 / inv, 0.0)
    return np.where(ok, gsnr, 0.0)
