import math

import numpy as np
import pytest

from acrlnc_protocol import (AcrlncReceiver, FeedbackStatus, MpAcrlncSender, PacketDecision,
                             ProtocolError, RateEstimator, SenderConfig, SenderState, SpAcrlncSender,
                             compute_dof, estimate_rates, fbfec_needed, on_feedback, round_half_away,
                             schedule_slot)
from metrics_collector import measure
from network_simulator import (ErasurePattern, FeedbackMsg, NetworkSimulator, ReceiverReport, SlotLoop,
                               Topology, Verdict)


def _feedback(seq, ack=True, path=0, deliver=10, prefix=0, rank=0):
    return FeedbackMsg(about_seq=seq, verdict=Verdict.ACK if ack else Verdict.NACK, path=path,
                       send_slot=deliver - 10, deliver_slot=deliver,
                       report=ReceiverReport(decoded_prefix=prefix, rank=rank))


def _decisions(records):
    return [(r.path, r.decision) for r in records]


def _session(eps, rtt, packet_count, seed=0, pattern=None, raw=None, **config):
    topology = Topology.single_hop(eps, rtt)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
    sender = MpAcrlncSender(SenderConfig(paths=topology.P, rtt=rtt, **config), packet_count, rngs[0], raw=raw)
    receiver = AcrlncReceiver(topology.P, keep_payload=raw is not None)
    network = NetworkSimulator(topology, rngs[1], pattern)
    return SlotLoop(network, sender, receiver, packet_count), sender, receiver


def test_round_half_away_from_zero():
    assert [round_half_away(x) for x in (0.5, 1.5, 2.5, 1.4, -2.5, 0.0)] == [1, 2, 3, 1, -3, 0]


def test_sender_config_defaults():
    config = SenderConfig(paths=4, rtt=20)
    assert config.k == 76
    assert config.window_limit == 152
    assert config.to_dict()['o_bar'] == 152
    assert SenderConfig(paths=4, rtt=20, o_bar=7).window_limit == 7
    with pytest.raises(ValueError):
        SenderConfig(paths=0, rtt=20)
    with pytest.raises(ValueError):
        SenderConfig(paths=2, rtt=20, rate_estimator="ewma")


def test_estimate_rates_uses_prior_until_first_feedback():
    rates = estimate_rates([(0, True), (0, False), (0, True), (0, True)], paths=2, prior=0.5)
    np.testing.assert_allclose(rates, [0.75, 0.5])


def test_windowed_estimator_forgets_old_feedback():
    estimator = RateEstimator(paths=1, prior=0.5, horizon=10)
    for slot in range(10):
        estimator.observe(0, False, slot)
    for slot in range(10, 20):
        estimator.observe(0, True, slot)
    assert estimator.rates()[0] == pytest.approx(1.0)


def test_dof_with_no_pending_information():
    state = SenderState(SenderConfig(paths=3, rtt=10, th=0.5))
    snapshot = compute_dof(state)
    assert snapshot.d == 0.0
    assert snapshot.delta == pytest.approx(-4.5)
    assert not fbfec_needed(snapshot)


def test_missing_dof_without_repair_gives_infinite_ratio():
    state = SenderState(SenderConfig(paths=2, rtt=10))
    state.w_max = 1
    state.log_transmission(0, 0, PacketDecision.NEW).status = FeedbackStatus.NACKED
    snapshot = compute_dof(state, rates=np.array([0.5, 0.5]))
    assert snapshot.infinite_ratio
    assert math.isinf(snapshot.delta)
    assert fbfec_needed(snapshot)


def test_dof_terms_combine_feedback_and_expectations():
    state = SenderState(SenderConfig(paths=2, rtt=10))
    state.w_max = 3
    state.log_transmission(0, 0, PacketDecision.NEW).status = FeedbackStatus.NACKED
    state.log_transmission(0, 1, PacketDecision.NEW)
    state.log_transmission(1, 1, PacketDecision.FEC).status = FeedbackStatus.ACKED
    state.log_transmission(1, 2, PacketDecision.FBFEC)
    state.log_transmission(0, 2, PacketDecision.NEW).status = FeedbackStatus.ACKED

    snapshot = compute_dof(state, rates=np.array([0.5, 0.8]))
    assert (snapshot.md1, snapshot.md2) == (1.0, pytest.approx(0.5))
    assert (snapshot.ad1, snapshot.ad2) == (1.0, pytest.approx(0.8))
    assert snapshot.d == pytest.approx(1.5 / 1.8)
    assert snapshot.delta == pytest.approx(2 * (1.5 / 1.8 - 1.0))
    assert snapshot.to_dict()['md_g'] == pytest.approx(1.5)


@pytest.mark.parametrize("th, delta, needed", [(0.0, 2.0, True), (0.5, 1.0, True), (1.0, 0.0, False),
                                               (1.5, -1.0, False)])
def test_delta_is_paths_times_ratio_gap_over_threshold(th, delta, needed):
    state = SenderState(SenderConfig(paths=2, rtt=10, th=th))
    state.w_max = 3
    state.log_transmission(0, 0, PacketDecision.NEW).status = FeedbackStatus.NACKED
    state.log_transmission(1, 0, PacketDecision.NEW).status = FeedbackStatus.NACKED
    state.log_transmission(0, 1, PacketDecision.FEC).status = FeedbackStatus.ACKED

    snapshot = compute_dof(state, rates=np.array([0.5, 0.5]))
    assert snapshot.d == pytest.approx(2.0)
    assert snapshot.delta == pytest.approx(delta)
    assert fbfec_needed(snapshot) is needed


def test_delta_matches_ratio_gap_on_random_sender_states(rng):
    decisions = [PacketDecision.NEW, PacketDecision.FEC, PacketDecision.FBFEC]
    statuses = list(FeedbackStatus)
    for _ in range(200):
        paths = int(rng.integers(1, 5))
        th = float(rng.choice([0.0, 0.2, 0.5, 1.0]))
        state = SenderState(SenderConfig(paths=paths, rtt=10, th=th))
        state.w_max = 5
        for slot in range(int(rng.integers(1, 12))):
            record = state.log_transmission(int(rng.integers(paths)), slot, decisions[rng.integers(3)])
            record.status = statuses[rng.integers(len(statuses))]
        rates = rng.uniform(0.1, 1.0, paths)

        snapshot = compute_dof(state, rates)
        if snapshot.ad_g > 0:
            d = snapshot.md_g / snapshot.ad_g
            assert snapshot.delta == pytest.approx(paths * (d - 1.0 - th))
            assert fbfec_needed(snapshot) == (d - 1.0 - th > 0)


def test_higher_threshold_sends_fewer_fbfec():
    fbfec = {}
    for th in (0.0, 0.3, 0.6):
        fbfec[th] = 0
        for seed in range(3):
            loop, sender, _ = _session([0.2, 0.4, 0.6, 0.8], 20, 600, seed=seed, th=th)
            assert loop.run().complete
            fbfec[th] += sender.counters["fbfec"]
    assert fbfec[0.0] > fbfec[0.3] > fbfec[0.6]


def test_decoded_records_leave_the_dof_count():
    state = SenderState(SenderConfig(paths=1, rtt=10))
    state.w_max = 1
    state.log_transmission(0, 0, PacketDecision.NEW).status = FeedbackStatus.NACKED
    state.reported_prefix = 1
    assert compute_dof(state).md_g == 0.0


def test_first_slot_sends_new_packets_over_growing_window():
    state = SenderState(SenderConfig(paths=4, rtt=10, rate_prior=1.0))
    records = schedule_slot(state, 0)
    assert [r.decision for r in records] == [PacketDecision.NEW] * 4
    assert [(r.w_min, r.w_max) for r in records] == [(1, 1), (1, 2), (1, 3), (1, 4)]
    assert state.counters['new'] == 4


def test_new_packets_go_to_fastest_paths_first():
    state = SenderState(SenderConfig(paths=3, rtt=10, rate_prior=1.0), stream_size=2)
    state.estimator.observe(0, False)
    state.estimator.observe(2, True)
    records = schedule_slot(state, 0)
    new = [r.path for r in records if r.decision is PacketDecision.NEW]
    assert new == [1, 2]
    assert _decisions(records)[-1] == (0, PacketDecision.SIZE_LIMIT_REPEAT)


def test_size_limit_is_sticky_until_window_decoded():
    state = SenderState(SenderConfig(paths=2, rtt=10, o_bar=4, rate_prior=1.0))
    schedule_slot(state, 0)
    schedule_slot(state, 1)
    assert state.window_span == 4

    for slot in (2, 3):
        records = schedule_slot(state, slot)
        assert [r.decision for r in records] == [PacketDecision.SIZE_LIMIT_REPEAT] * 2
        assert all((r.w_min, r.w_max) == (1, 4) for r in records)

    on_feedback(state, _feedback(0, deliver=10, prefix=2, rank=2))
    assert state.w_min == 3
    assert schedule_slot(state, 10)[0].decision is PacketDecision.SIZE_LIMIT_REPEAT

    on_feedback(state, _feedback(1, deliver=11, prefix=4, rank=4))
    records = schedule_slot(state, 11)
    assert [r.decision for r in records] == [PacketDecision.NEW] * 2
    assert state.counters['size_limit'] == 6


def test_end_of_window_fec_on_remaining_paths_then_pending_fec():
    config = SenderConfig(paths=2, rtt=3, fbfec_enabled=False)
    state = SenderState(config)
    state.new_since_ew = config.k - 1

    records = schedule_slot(state, 0)
    assert _decisions(records) == [(0, PacketDecision.NEW), (1, PacketDecision.EW_FEC)]
    assert state.eow_flag
    assert state.m.tolist() == [1, 0]
    assert state.counters['fec'] == 1

    records = schedule_slot(state, 1)
    assert _decisions(records) == [(0, PacketDecision.FEC), (1, PacketDecision.NEW)]


def test_end_of_window_sets_fec_count_from_rate_estimate():
    config = SenderConfig(paths=1, rtt=4, fbfec_enabled=False)
    state = SenderState(config)
    decisions = [schedule_slot(state, slot)[0].decision for slot in range(6)]
    assert decisions == [PacketDecision.NEW] * 3 + [PacketDecision.FEC] * 2 + [PacketDecision.NEW]


def test_fbfec_uses_bit_filling_partition():
    state = SenderState(SenderConfig(paths=2, rtt=10, fec_enabled=False, rate_prior=0.5))
    schedule_slot(state, 0)
    records = schedule_slot(state, 1)
    # Sem repetições ainda, a razão é infinita e todos os caminhos livres repetem
    assert [r.decision for r in records] == [PacketDecision.FBFEC] * 2
    assert all(r.decision.kind.value == "fbfec" for r in records)


def test_stream_tail_repeats_then_goes_silent():
    state = SenderState(SenderConfig(paths=2, rtt=10, rate_prior=1.0), stream_size=3)
    schedule_slot(state, 0)
    records = schedule_slot(state, 1)
    assert _decisions(records) == [(0, PacketDecision.NEW), (1, PacketDecision.SIZE_LIMIT_REPEAT)]
    assert state.stream_exhausted

    on_feedback(state, _feedback(0, deliver=10, prefix=3, rank=3))
    assert state.window_empty
    assert schedule_slot(state, 10) == []


def test_feedback_errors():
    state = SenderState(SenderConfig(paths=1, rtt=10))
    schedule_slot(state, 0)
    with pytest.raises(ProtocolError):
        on_feedback(state, _feedback(5))
    with pytest.raises(ProtocolError):
        on_feedback(state, _feedback(0, deliver=10), slot=11)


def test_feedback_prunes_decoded_records():
    state = SenderState(SenderConfig(paths=2, rtt=10, rate_prior=1.0))
    schedule_slot(state, 0)
    schedule_slot(state, 1)
    on_feedback(state, _feedback(0, deliver=10, prefix=2, rank=2), slot=10)
    assert sorted(state.sent_log) == [2, 3]
    assert state.retired_seq == 1
    assert state.sent_log[2].w_max == 3

    # Feedback atrasado de um registro descartado é aceito
    on_feedback(state, _feedback(1, deliver=11, prefix=2, rank=2))
    assert state.estimator.totals.sum() == 2


def test_lossless_channel_reaches_capacity_with_half_rtt_delay():
    loop, sender, _ = _session([0.0, 0.0], rtt=10, packet_count=200, rate_prior=1.0)
    metrics = measure(loop.run())
    assert metrics.normalized_throughput == pytest.approx(2.0)
    assert metrics.mean_delay == pytest.approx(5.0)
    assert metrics.max_delay == 5
    assert sender.counters['fbfec'] == 0 and sender.counters['fec'] == 0


def test_lossless_channel_with_default_prior_stays_near_capacity():
    loop, _, _ = _session([0.0] * 4, rtt=20, packet_count=4000)
    metrics = measure(loop.run())
    assert metrics.normalized_throughput >= 0.97 * 4


def test_lossy_session_delivers_every_payload():
    rng = np.random.default_rng(4)
    raw = {i: rng.integers(0, 256, 6, dtype=np.uint8) for i in range(1, 151)}
    loop, _, receiver = _session([0.3, 0.6], rtt=10, packet_count=150, seed=11, raw=raw)
    trace = loop.run()
    assert trace.complete
    assert receiver.delivered == 150
    assert sum(receiver.per_path_delivered) == 150
    for i, payload in raw.items():
        np.testing.assert_array_equal(receiver.decoder.decoded_payloads[i], payload)


def test_sessions_are_reproducible():
    first = _session([0.2, 0.5], rtt=10, packet_count=100, seed=3)[0].run()
    second = _session([0.2, 0.5], rtt=10, packet_count=100, seed=3)[0].run()
    assert first.digest == second.digest
    assert measure(first) == measure(second)


def test_size_limited_worst_case_replay():
    success = {2, 3, 5, 8, 11, 14, 18}
    outcomes = [n not in success for n in range(1, 21)]
    pattern = ErasurePattern.from_sequence(outcomes, paths=4)
    loop, sender, _ = _session([0.5] * 4, rtt=20, packet_count=7, pattern=pattern,
                               o_bar=7, fec_enabled=False, fbfec_enabled=False)
    trace = loop.run()

    assert trace.records[0].in_order_slot == 14
    assert measure(trace).max_delay == 4 + 20 // 2
    assert sender.counters['new'] == 7


def test_single_path_sender_is_the_multipath_machine_with_one_path():
    sender = SpAcrlncSender(10, 5, np.random.default_rng(0), rate_prior=1.0, o_bar=3)
    assert sender.config.paths == 1
    assert sender.config.window_limit == 3
    assert [path for path, _ in sender.transmissions(0)] == [0]
