import dataclasses
import math

import pytest

from uavmec import (
    BandwidthAllocation,
    PhysicsConstants,
    dbm_to_watts,
    los_probability,
    u2b_rate,
    u2u_path_loss,
    u2u_rate,
    user_uplink_rate,
)
from uavmec.channel import (
    a2g_path_loss,
    gain_from_loss_db,
    u2b_budget,
    u2u_budget,
    uplink_rate_from_loss,
    user_uplink_budget,
)

from conftest import hand_scenario

PH = PhysicsConstants()


def test_dbm_to_watts():
    assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-12)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3, rel=1e-12)
    assert dbm_to_watts(23.0) == pytest.approx(0.19952623149688797, rel=1e-12)


def test_gain_from_loss():
    assert gain_from_loss_db(0.0) == 1.0
    assert gain_from_loss_db(30.0) == pytest.approx(1e-3, rel=1e-12)


def test_los_probability_at_45_degrees():
    # elevation angle 45 deg: horizontal 100 m, vertical 100 m
    p = los_probability((0.0, 0.0), (100.0, 0.0, 100.0), PH)
    assert p == pytest.approx(0.6970863690250678, abs=1e-12)
    assert abs(p - 0.697) < 1e-3


def test_los_probability_directly_underneath():
    p = los_probability((5.0, 5.0), (5.0, 5.0, 120.0), PH)
    assert p == pytest.approx(0.9951958604018413, abs=1e-12)


def test_los_probability_monotone_in_elevation():
    last = -1.0
    for dh in (1000.0, 500.0, 200.0, 100.0, 50.0, 10.0, 0.0):
        p = los_probability((0.0, 0.0), (dh, 0.0, 100.0), PH)
        assert p > last
        last = p
    assert 0.0 < p <= 1.0


def test_u2u_free_space_term_as_printed():
    bare = dataclasses.replace(PH, attenuation_los_db=0.0)
    loss = u2u_path_loss((0.0, 0.0, 50.0), (500.0, 0.0, 50.0), bare)
    assert loss == pytest.approx(86.42718330860373, abs=1e-9)


def test_u2u_free_space_term_standard_form():
    bare = dataclasses.replace(
        PH, attenuation_los_db=0.0, u2u_loss_form="standard-fspl"
    )
    loss = u2u_path_loss((0.0, 0.0, 50.0), (500.0, 0.0, 50.0), bare)
    assert loss == pytest.approx(92.44778322188337, abs=1e-9)


def test_u2u_doubling_distance_adds_six_db():
    for form in ("as-printed", "standard-fspl"):
        ph = dataclasses.replace(PH, attenuation_los_db=0.0, u2u_loss_form=form)
        near = u2u_path_loss((0.0, 0.0, 50.0), (500.0, 0.0, 50.0), ph)
        far = u2u_path_loss((0.0, 0.0, 50.0), (1000.0, 0.0, 50.0), ph)
        assert far - near == pytest.approx(6.020599913279624, abs=1e-9)


def test_u2u_attenuation_added_onto_free_space():
    base = dataclasses.replace(PH, attenuation_los_db=0.0)
    with_att = dataclasses.replace(PH, attenuation_los_db=3.0)
    a = (0.0, 0.0, 50.0)
    b = (400.0, 300.0, 50.0)
    assert u2u_path_loss(a, b, with_att) == pytest.approx(
        u2u_path_loss(a, b, base) + 3.0, abs=1e-12
    )


def test_u2u_coincident_positions_rejected():
    with pytest.raises(ValueError, match="coincident"):
        u2u_path_loss((1.0, 2.0, 50.0), (1.0, 2.0, 50.0), PH)


def test_uplink_rate_golden():
    budget = uplink_rate_from_loss(100.0, 23.0, 1.0, 3e6, PH)
    assert budget.rate_bps == pytest.approx(96668107.56208579, rel=1e-12)
    assert budget.channel_gain == pytest.approx(1e-10, rel=1e-12)


def test_uplink_rate_zero_beta():
    budget = uplink_rate_from_loss(100.0, 23.0, 0.0, 3e6, PH)
    assert budget.rate_bps == 0.0


def test_uplink_rate_scales_with_beta():
    full = uplink_rate_from_loss(100.0, 23.0, 1.0, 3e6, PH)
    half = uplink_rate_from_loss(100.0, 23.0, 0.5, 3e6, PH)
    # with total-noise accounting the SNR is beta-independent,
    # so the rate scales exactly linearly in the allocated bandwidth
    assert half.rate_bps == pytest.approx(full.rate_bps / 2, rel=1e-12)
    assert half.snr == pytest.approx(full.snr, rel=1e-12)


def test_uplink_rate_per_hz_noise_model():
    ph = dataclasses.replace(PH, noise_model="per-hz")
    full = uplink_rate_from_loss(100.0, 23.0, 1.0, 3e6, ph)
    half = uplink_rate_from_loss(100.0, 23.0, 0.5, 3e6, ph)
    # halving the band halves the noise power too, doubling the SNR
    assert half.snr == pytest.approx(2 * full.snr, rel=1e-12)
    assert half.rate_bps > full.rate_bps / 2


def test_u2u_rate_goldens():
    s = hand_scenario()
    uav1, uav2 = s.uavs
    assert u2u_rate(uav1, uav2, PH) == pytest.approx(309797211.8938683, rel=1e-12)
    bare = dataclasses.replace(PH, attenuation_los_db=0.0)
    assert u2u_rate(uav1, uav2, bare) == pytest.approx(312454754.36977303, rel=1e-12)


def test_u2b_budget_goldens():
    s = hand_scenario()
    uav = s.uavs[0]  # at (0, 0, 50)
    budget = u2b_budget(uav, (250.0, 250.0, 0.0), PH)
    assert budget.distance_m == pytest.approx(357.0714214271425, rel=1e-12)
    received_w = budget.channel_gain * dbm_to_watts(uav.tx_power_to_bs_dbm)
    assert received_w == pytest.approx(2.3861498573224797e-06, rel=1e-9)
    assert budget.snr == pytest.approx(5993737.450156837, rel=1e-9)
    assert budget.rate_bps == pytest.approx(2251502469.940614, rel=1e-9)


def test_a2g_mixes_los_and_nlos():
    # equal environment losses collapse the mixture to free space + loss
    ph = dataclasses.replace(
        PH, loss_los_db=5.0, loss_nlos_db=5.0, a2g_loss_form="standard-fspl"
    )
    user, uav = (0.0, 0.0), (100.0, 0.0, 100.0)
    d = math.sqrt(100.0**2 + 100.0**2)
    fspl = 10 * ph.path_loss_exponent * math.log10(
        4 * math.pi * d * ph.carrier_freq_a2g_hz / ph.speed_of_light_m_s
    )
    assert a2g_path_loss(user, uav, ph) == pytest.approx(fspl + 5.0, abs=1e-9)


def test_a2g_nlos_weight_raises_loss():
    # pushing the NLoS penalty up can only increase the mixed loss
    heavier = dataclasses.replace(PH, loss_nlos_db=PH.loss_nlos_db + 10)
    user, uav = (300.0, 0.0), (0.0, 0.0, 50.0)
    assert a2g_path_loss(user, uav, heavier) > a2g_path_loss(user, uav, PH)


def test_a2g_increases_with_horizontal_distance():
    uav = (0.0, 0.0, 50.0)
    losses = [a2g_path_loss((d, 0.0), uav, PH) for d in (10.0, 100.0, 400.0, 900.0)]
    assert losses == sorted(losses)


def test_user_uplink_uses_association_geometry():
    s = hand_scenario()
    user, uav = s.users[0], s.uavs[0]
    b = user_uplink_budget(user, uav, 1.0, PH)
    assert b.distance_m == pytest.approx(math.sqrt(10.0**2 + 50.0**2), rel=1e-12)
    assert b.rate_bps > 0
    assert user_uplink_rate(user, uav, 1.0, PH) == b.rate_bps


def test_bandwidth_allocation_check():
    s = hand_scenario()
    ok = BandwidthAllocation({(1, 1): 1.0, (2, 2): 1.0})
    assert ok.check(s) == []
    over = BandwidthAllocation({(1, 1): 0.9, (1, 2): 0.2})
    assert any("exceeds" in p or "sum" in p for p in over.check(s))
    neg = BandwidthAllocation({(1, 1): -0.1})
    assert neg.check(s)


def test_allocation_fraction_defaults_to_zero():
    beta = BandwidthAllocation({(1, 1): 0.5})
    assert beta.fraction(1, 1) == 0.5
    assert beta.fraction(1, 99) == 0.0
    assert beta.uav_total(1) == 0.5
