"""Per-link running statistics: stability EWMA, ETX, quantization, safeguards.

Two link-stability estimators are provided. The per-packet EWMA (smoothing
0.75, initial value 0.5) is the canonical one driven by the engine on every
MAC attempt; the windowed form over the last 32 frame outcomes is exposed for
experiments. Both map [0,1] into [0,1]. Reciprocal metrics are protected by
floors so 1/L_s and 1/E_r stay bounded.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import TaburplError

EWMA_WEIGHT = 0.75      # smoothing weight shared by both L_s forms and ETX
LS_INIT = 0.5
LS_FLOOR = 0.05
ENERGY_FLOOR_J = 0.05
WINDOW_FRAMES = 32
ETX_INIT = 1.0
INITIAL_ENERGY_J = 1000.0


def update_ls_packet(ls_prev: float, acked: bool) -> float:
    """Per-packet stability EWMA: 0.75*previous + 0.25*[acked]."""
    if not 0.0 <= ls_prev <= 1.0:
        raise TaburplError(f"ls out of range: {ls_prev}")
    return EWMA_WEIGHT * ls_prev + (1.0 - EWMA_WEIGHT) * (1.0 if acked else 0.0)


def update_ls_windowed(ls_prev: float, acks_in_window: int, txs_in_window: int) -> float:
    """Windowed stability EWMA over ack/tx counts; no-update when txs is 0."""
    if txs_in_window == 0:
        return ls_prev
    if not 0 <= acks_in_window <= txs_in_window:
        raise TaburplError("ack count exceeds tx count")
    ratio = acks_in_window / txs_in_window
    return EWMA_WEIGHT * ls_prev + (1.0 - EWMA_WEIGHT) * ratio


def quantize_ls(ls: float) -> int:
    """Quantize stability to one byte: floor(256*ls), ceiling clamped to 255."""
    if not 0.0 <= ls <= 1.0:
        raise TaburplError(f"ls out of range: {ls}")
    return min(255, int(256.0 * ls))


def dequantize_ls(byte: int) -> float:
    return byte / 256.0


def update_etx(etx_prev: float, attempts_for_success: int) -> float:
    """ETX EWMA of MAC attempts per successful delivery (same 0.75 smoothing)."""
    if attempts_for_success < 1:
        raise TaburplError("a delivery takes at least one attempt")
    return EWMA_WEIGHT * etx_prev + (1.0 - EWMA_WEIGHT) * attempts_for_success


def safe_residual(e_r: float) -> float:
    """Residual-energy floor (0.05 J) so the reciprocal term stays bounded."""
    if e_r < 0:
        raise TaburplError("negative residual energy")
    return max(e_r, ENERGY_FLOOR_J)


@dataclass
class LinkStats:
    """Running state for one directed link, owned by the engine event loop."""

    ls: float = LS_INIT
    ls_byte: int | None = quantize_ls(LS_INIT)
    etx: float = ETX_INIT
    tx_window: deque = field(default_factory=lambda: deque(maxlen=WINDOW_FRAMES))
    tx_count: int = 0
    ack_count: int = 0
    etx_samples: int = 0
    # engine bookkeeping for the per-packet transmission-energy metric
    tx_energy_j: float = 0.0
    packets_offered: int = 0

    def record_attempt(self, acked: bool) -> None:
        """Fold one MAC attempt outcome into the per-packet EWMA and window."""
        self.ls = update_ls_packet(self.ls, acked)
        self.ls_byte = quantize_ls(self.ls)
        self.tx_window.append(bool(acked))
        self.tx_count += 1
        if acked:
            self.ack_count += 1

    def record_delivery(self, attempts: int) -> None:
        self.etx = update_etx(self.etx, attempts)
        self.etx_samples += 1

    def record_beacon(self, heard: bool) -> None:
        """Passive probe: fold a periodic-broadcast reception outcome into L_s."""
        self.ls = update_ls_packet(self.ls, heard)
        self.ls_byte = quantize_ls(self.ls)

    def etx_estimate(self) -> float:
        """Measured ETX when delivery samples exist, else the 1/L_s fallback."""
        if self.etx_samples > 0:
            return self.etx
        return 1.0 / ls_for_cost(self)

    def windowed_refresh(self) -> float:
        """Apply the windowed EWMA over the current 32-frame ring (experimental)."""
        txs = len(self.tx_window)
        acks = sum(1 for a in self.tx_window if a)
        self.ls = update_ls_windowed(self.ls, acks, txs)
        self.ls_byte = quantize_ls(self.ls)
        return self.ls

    def mean_tx_energy_per_packet(self, default_j: float) -> float:
        if self.packets_offered == 0:
            return default_j
        return self.tx_energy_j / self.packets_offered


def ls_for_cost(stats: LinkStats) -> float:
    """Stability value used by the cost function, in [0.05, 1].

    Uses the dequantized byte when the metric is present; a legacy neighbor
    without it falls back to the ETX-derived success probability 1/ETX.
    """
    if stats.ls_byte is not None:
        value = dequantize_ls(stats.ls_byte)
    else:
        value = 1.0 / max(stats.etx, 1.0)
    return max(LS_FLOOR, min(1.0, value))


@dataclass
class EnergyState:
    """Node battery: monotone non-increasing residual, floored at zero.

    ``drawn_j`` accumulates the energy actually supplied, so
    initial - residual always equals the sum of debits.
    """

    residual_j: float = INITIAL_ENERGY_J
    initial_j: float = INITIAL_ENERGY_J
    drawn_j: float = 0.0

    def debit(self, joules: float) -> float:
        if joules < 0:
            raise TaburplError("negative energy debit")
        drawn = min(joules, self.residual_j)
        self.residual_j -= drawn
        self.drawn_j += drawn
        return drawn
