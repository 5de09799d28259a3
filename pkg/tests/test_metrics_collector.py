import pytest

from metrics_collector import (DeliveryRecord, IncompleteTraceError, MetricsError, RunMetrics,
                               SessionTrace, aggregate, measure)


def _trace(delays, rtt=20, paths=1, start=0, complete=True, **kwargs):
    records = [DeliveryRecord(raw_index=i + 1, first_send_slot=start + i, in_order_slot=start + i + d)
               for i, d in enumerate(delays)]
    return SessionTrace(records=records, packet_count=len(delays), rtt=rtt, paths=paths,
                        slots_run=start + len(delays) + max(delays), complete=complete, **kwargs)


def test_lossless_stream_has_unit_throughput_and_half_rtt_delay():
    metrics = measure(_trace([10] * 100, rtt=20))
    assert metrics.normalized_throughput == pytest.approx(1.0)
    assert metrics.mean_delay == 10
    assert metrics.max_delay == 10
    assert metrics.busy_slots == 100


def test_busy_period_starts_at_first_send():
    metrics = measure(_trace([10] * 50, rtt=20, start=30))
    assert metrics.busy_slots == 50
    assert metrics.normalized_throughput == pytest.approx(1.0)


def test_mean_and_max_delay():
    metrics = measure(_trace([10, 14, 12, 10]))
    assert metrics.mean_delay == pytest.approx(11.5)
    assert metrics.max_delay == 14


def test_incomplete_trace_is_a_liveness_failure():
    trace = _trace([10, 10, 10], complete=False)
    with pytest.raises(IncompleteTraceError):
        measure(trace)

    short = _trace([10, 10])
    short.packet_count = 5
    with pytest.raises(IncompleteTraceError):
        measure(short)


def test_no_feedback_fraction():
    trace = _trace([10] * 10, no_feedback_slots=6)
    assert trace.lambda_no_feedback == pytest.approx(6 / trace.slots_run)
    assert measure(trace).lambda_no_feedback == pytest.approx(trace.lambda_no_feedback)


def test_to_dict_exports_counters_as_columns():
    trace = _trace([10] * 4, counters={"new": 4, "fec": 2}, per_path_delivered=[4])
    row = measure(trace).to_dict()
    assert row['throughput'] == pytest.approx(1.0)
    assert row['new_sent'] == 4 and row['fec_sent'] == 2
    assert row['per_path_delivered'] == [4]
    assert row['slots'] == 4


def _metrics(throughput, mean_delay, max_delay):
    return RunMetrics(normalized_throughput=throughput, mean_delay=mean_delay, max_delay=max_delay,
                      delivered=10, busy_slots=10, per_path_delivered=[10], lambda_no_feedback=0.0)


def test_aggregate_uses_sample_standard_deviation():
    summary = aggregate([_metrics(1.0, 10, 12), _metrics(2.0, 20, 16), _metrics(3.0, 30, 20)])
    assert summary.count == 3
    assert summary.mean['normalized_throughput'] == pytest.approx(2.0)
    assert summary.std['normalized_throughput'] == pytest.approx(1.0)
    assert summary.std['mean_delay'] == pytest.approx(10.0)
    assert summary.mean['max_delay'] == pytest.approx(16.0)


def test_single_run_aggregate_has_zero_spread():
    summary = aggregate([_metrics(1.5, 11, 13)])
    assert summary.std == {name: 0.0 for name in summary.std}
    assert summary.to_dict()['count'] == 1


def test_aggregate_of_nothing_fails():
    with pytest.raises(MetricsError):
        aggregate([])
