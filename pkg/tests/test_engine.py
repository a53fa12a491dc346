import pytest

from gpuburst.engine import (
    MetricsSample,
    ScheduleInPastError,
    SimulationFault,
    Simulator,
    StageTrigger,
)


def make_sim(handler=None):
    sim = Simulator()
    seen = []
    sim.on(StageTrigger, handler or (lambda p: seen.append((sim.now, p.stage_index))))
    return sim, seen


def test_schedule_then_dequeue_at_zero():
    sim, seen = make_sim()
    sim.schedule(0.0, StageTrigger(1))
    assert sim.peek_time() == 0.0
    sim.run_until(0.0)
    assert seen == [(0.0, 1)]


def test_equal_times_fire_in_insertion_order():
    sim, seen = make_sim()
    sim.schedule(5.0, StageTrigger(1))  # A
    sim.schedule(5.0, StageTrigger(2))  # B
    sim.run_until(10.0)
    assert [idx for _, idx in seen] == [1, 2]


def test_schedule_in_past_raises():
    sim, _ = make_sim()
    sim.schedule(10.0, StageTrigger(0))
    sim.run_until(10.0)
    with pytest.raises(ScheduleInPastError):
        sim.schedule(9.0, StageTrigger(1))


def test_run_until_empty_queue_advances_clock():
    sim, _ = make_sim()
    assert sim.run_until(100.0) == 0
    assert sim.now == 100.0


def test_self_rescheduling_sampler():
    sim = Simulator()
    count = [0]

    def sample(_):
        count[0] += 1
        if sim.now + 60.0 <= 600.0:
            sim.schedule(sim.now + 60.0, MetricsSample())

    sim.on(MetricsSample, sample)
    sim.schedule(60.0, MetricsSample())
    processed = sim.run_until(600.0)
    assert count[0] == 10
    assert processed == 10


def test_no_event_processed_beyond_t_end():
    sim, seen = make_sim()
    sim.schedule(50.0, StageTrigger(1))
    sim.schedule(150.0, StageTrigger(2))
    sim.run_until(100.0)
    assert [idx for _, idx in seen] == [1]
    assert sim.now == 100.0
    sim.run_until(200.0)
    assert [idx for _, idx in seen] == [1, 2]


def test_handler_exception_is_fatal_with_context():
    sim = Simulator()

    def boom(_):
        raise ValueError("broken")

    sim.on(StageTrigger, boom)
    sim.schedule(3.0, StageTrigger(9))
    with pytest.raises(SimulationFault) as err:
        sim.run_until(5.0)
    assert err.value.fire_at == 3.0
    assert isinstance(err.value.payload, StageTrigger)


def test_event_logs_are_identical_across_runs():
    def build():
        sim = Simulator()
        sim.event_log = []
        sim.on(StageTrigger, lambda p: None)
        sim.on(MetricsSample, lambda p: sim.schedule(sim.now + 7.0, StageTrigger(0))
               if sim.now < 50.0 else None)
        for t in (0.0, 10.0, 10.0, 25.0):
            sim.schedule(t, MetricsSample())
        sim.run_until(100.0)
        return sim.event_log

    assert build() == build()


def test_clock_monotone_through_processing():
    sim = Simulator()
    times = []
    sim.on(StageTrigger, lambda p: times.append(sim.now))
    for t in (5.0, 1.0, 3.0, 1.0, 4.0):
        sim.schedule(t, StageTrigger(0))
    sim.run_until(10.0)
    assert times == sorted(times)
