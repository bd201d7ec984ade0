"""Link budgets: path losses, channel gains, SNRs, and achievable rates.

Pure functions of immutable inputs. Power quantities arrive in dBm and
are converted to watts before any SNR is formed; losses/gains follow
gain = 10^(-loss_db/10).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .scenario import PhysicsConstants, Scenario, UavNode, UserNode


@dataclass(frozen=True)
class LinkBudget:
    distance_m: float
    path_loss_db: float
    channel_gain: float
    snr: float
    rate_bps: float


@dataclass
class BandwidthAllocation:
    """Per-user bandwidth fractions keyed by (uav id, user id)."""

    fractions: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def fraction(self, uav_id: int, user_id: int) -> float:
        return self.fractions.get((uav_id, user_id), 0.0)

    def uav_total(self, uav_id: int) -> float:
        return math.fsum(b for (v, _u), b in self.fractions.items() if v == uav_id)

    def check(self, scenario: Scenario) -> List[str]:
        out = []
        for v in scenario.uavs:
            total = self.uav_total(v.id)
            if total > 1 + 1e-9:
                out.append(f"uav[{v.id}]: bandwidth fractions sum to {total:.12f} > 1")
        for (v, u), b in self.fractions.items():
            if not (0 <= b <= 1):
                out.append(f"beta[{v},{u}]={b} outside [0, 1]")
        return out


def dbm_to_watts(p_dbm: float) -> float:
    return 10 ** ((p_dbm - 30.0) / 10.0)


def gain_from_loss_db(loss_db: float) -> float:
    return 10 ** (-loss_db / 10.0)


def _dist3(a, b) -> float:
    az = a[2] if len(a) > 2 else 0.0
    bz = b[2] if len(b) > 2 else 0.0
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (az - bz) ** 2)


def los_probability(user_pos, uav_pos, physics: PhysicsConstants) -> float:
    """Elevation-angle LoS probability.

    The elevation angle is atan(altitude / horizontal distance) expressed
    in degrees; a user directly under the UAV sees 90 degrees.
    """
    dx = user_pos[0] - uav_pos[0]
    dy = user_pos[1] - uav_pos[1]
    d_h = math.hypot(dx, dy)
    elev_deg = 90.0 if d_h == 0 else math.degrees(math.atan(uav_pos[2] / d_h))
    c, d = physics.los_env_c, physics.los_env_d
    return 1.0 / (1.0 + c * math.exp(-d * (elev_deg - c)))


def _free_space_db(distance_m: float, freq_hz: float, physics: PhysicsConstants, form: str) -> float:
    n = physics.path_loss_exponent
    x = 4 * math.pi * distance_m * freq_hz / physics.speed_of_light_m_s
    if form == "as-printed":
        # source formula keeps a base-2 logarithm with a 2n multiplier
        return 2 * n * math.log2(x)
    if form == "standard-fspl":
        return 10 * n * math.log10(x)
    raise ValueError(f"unknown loss form {form!r}")


def a2g_path_loss(user_pos, uav_pos, physics: PhysicsConstants) -> float:
    """LoS/NLoS probability-mixed air-to-ground path loss in dB."""
    d3 = _dist3(user_pos, uav_pos)
    if d3 <= 0:
        raise ValueError("zero distance between user and UAV")
    free = _free_space_db(d3, physics.carrier_freq_a2g_hz, physics, physics.a2g_loss_form)
    pr_los = los_probability(user_pos, uav_pos, physics)
    return pr_los * (free + physics.loss_los_db) + (1 - pr_los) * (free + physics.loss_nlos_db)


def u2u_path_loss(pos_a, pos_b, physics: PhysicsConstants) -> float:
    """UAV-to-UAV LoS path loss in dB, free-space term plus LoS attenuation."""
    d3 = _dist3(pos_a, pos_b)
    if d3 <= 0:
        raise ValueError("coincident UAV positions")
    f_c = physics.carrier_freq_a2g_hz
    if physics.u2u_loss_form == "as-printed":
        # source free-space term: 20log10(d) + 20log10(f) + 10log10((2pi/c)^2)
        theta = (
            20 * math.log10(d3)
            + 20 * math.log10(f_c)
            + 10 * math.log10((2 * math.pi / physics.speed_of_light_m_s) ** 2)
        )
    elif physics.u2u_loss_form == "standard-fspl":
        theta = 20 * math.log10(4 * math.pi * d3 * f_c / physics.speed_of_light_m_s)
    else:
        raise ValueError(f"unknown loss form {physics.u2u_loss_form!r}")
    return theta + physics.attenuation_los_db


def _noise_watts(physics: PhysicsConstants, bandwidth_hz: float) -> float:
    sigma = dbm_to_watts(physics.noise_power_dbm)
    if physics.noise_model == "per-hz":
        return sigma * bandwidth_hz
    return sigma


def uplink_rate_from_loss(
    loss_db: float,
    tx_power_dbm: float,
    beta: float,
    bandwidth_hz: float,
    physics: PhysicsConstants,
) -> LinkBudget:
    """Shannon rate over an allocated bandwidth fraction, beta in [0, 1].

    beta = 0 is flagged by a zero rate (downstream code treats a zero
    rate on a required link as an error since it implies infinite
    latency). Spectrum efficiency is independent of beta; the rate is
    linear in it.
    """
    gain = gain_from_loss_db(loss_db)
    if beta <= 0:
        return LinkBudget(math.nan, loss_db, gain, 0.0, 0.0)
    p_w = dbm_to_watts(tx_power_dbm)
    noise = _noise_watts(physics, beta * bandwidth_hz)
    snr = p_w * gain / noise
    rate = beta * bandwidth_hz * math.log2(1 + snr)
    return LinkBudget(math.nan, loss_db, gain, snr, rate)


def user_uplink_budget(
    user: UserNode, uav: UavNode, beta: float, physics: PhysicsConstants
) -> LinkBudget:
    loss = a2g_path_loss(user.position_m, uav.position_m, physics)
    b = uplink_rate_from_loss(loss, user.tx_power_dbm, beta, uav.bandwidth_users_hz, physics)
    d3 = _dist3(user.position_m, uav.position_m)
    return LinkBudget(d3, b.path_loss_db, b.channel_gain, b.snr, b.rate_bps)


def user_uplink_rate(user: UserNode, uav: UavNode, beta: float, physics: PhysicsConstants) -> float:
    return user_uplink_budget(user, uav, beta, physics).rate_bps


def u2u_budget(uav_a: UavNode, uav_b: UavNode, physics: PhysicsConstants) -> LinkBudget:
    loss = u2u_path_loss(uav_a.position_m, uav_b.position_m, physics)
    gain = gain_from_loss_db(loss)
    p_w = dbm_to_watts(uav_a.tx_power_u2u_dbm)
    noise = _noise_watts(physics, uav_a.bandwidth_u2u_hz)
    snr = p_w * gain / noise
    rate = uav_a.bandwidth_u2u_hz * math.log2(1 + snr)
    return LinkBudget(_dist3(uav_a.position_m, uav_b.position_m), loss, gain, snr, rate)


def u2u_rate(uav_a: UavNode, uav_b: UavNode, physics: PhysicsConstants) -> float:
    return u2u_budget(uav_a, uav_b, physics).rate_bps


def u2b_budget(uav: UavNode, bs_position, physics: PhysicsConstants) -> LinkBudget:
    """mmWave UAV-to-BS link.

    Received power keeps the source's amplitude form
    P * Gtx * Grx * c / (4 pi d f), and the noise term is scaled by the
    allocated mmWave bandwidth exactly as the rate formula prints it.
    """
    x, y, z = uav.position_m
    d = math.sqrt((bs_position[0] - x) ** 2 + (bs_position[1] - y) ** 2 + z**2)
    received = (
        dbm_to_watts(uav.tx_power_to_bs_dbm)
        * uav.antenna_gain_tx
        * uav.antenna_gain_rx_bs
        * physics.speed_of_light_m_s
        / (4 * math.pi * d * physics.carrier_freq_mmwave_hz)
    )
    bw = uav.bandwidth_to_bs_hz
    noise = bw * dbm_to_watts(physics.noise_power_dbm)
    snr = received / noise
    rate = bw * math.log2(1 + snr)
    loss_db = -10 * math.log10(received / dbm_to_watts(uav.tx_power_to_bs_dbm))
    return LinkBudget(d, loss_db, gain_from_loss_db(loss_db), snr, rate)


def u2b_rate(uav: UavNode, bs_position, physics: PhysicsConstants) -> float:
    return u2b_budget(uav, bs_position, physics).rate_bps
