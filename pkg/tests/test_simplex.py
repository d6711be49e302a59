import numpy as np
import pytest
from hypothesis import given, strategies as st

from dualsimplex.simplex import Mode, MonitorVerdict, SwitchPolicy, Zone, decide, select_actuation, supervise

POL = SwitchPolicy()


def v(index, fresh=True, pred=None):
    return MonitorVerdict(index=index, hp_fresh=fresh, predicted_index=pred)


@pytest.mark.parametrize("mode,verdict,want", [
    (Mode.HIGH_PERFORMANCE, v(1.2), Mode.SAFE_RECOVER),
    (Mode.SAFE_RECOVER, v(0.05), Mode.HIGH_PERFORMANCE),
    (Mode.HIGH_PERFORMANCE, v(0.5), Mode.HIGH_PERFORMANCE),
    (Mode.HIGH_PERFORMANCE, v(0.0, fresh=False), Mode.SAFE_RECOVER),
    (Mode.SWING_UP, v(0.99), Mode.SAFE_RECOVER),
    (Mode.SWING_UP, v(0.01), Mode.SAFE_RECOVER),  # never straight to HP
    (Mode.SWING_UP, v(3.0), Mode.SWING_UP),
    (Mode.SAFE_RECOVER, v(0.05, fresh=False), Mode.SAFE_RECOVER),
    (Mode.SAFE_RECOVER, v(0.5), Mode.SAFE_RECOVER),
])
def test_pendulum_rules(mode, verdict, want):
    assert supervise(mode, verdict, POL) is want


def test_threshold_ties():
    assert supervise(Mode.HIGH_PERFORMANCE, v(1.0), POL) is Mode.SAFE_RECOVER
    assert supervise(Mode.SAFE_RECOVER, v(0.1), POL) is Mode.SAFE_RECOVER


def test_prediction_flag():
    on = SwitchPolicy(predict=True)
    assert decide(Mode.HIGH_PERFORMANCE, v(0.5, pred=1.3), on) == (Mode.SAFE_RECOVER, "predicted")
    assert supervise(Mode.HIGH_PERFORMANCE, v(0.5, pred=1.3), POL) is Mode.HIGH_PERFORMANCE


def test_causes():
    assert decide(Mode.HIGH_PERFORMANCE, v(2.0), POL)[1] == "index"
    assert decide(Mode.HIGH_PERFORMANCE, v(0.0, fresh=False), POL)[1] == "stale"
    assert decide(Mode.HIGH_PERFORMANCE, v(0.2), POL) == (Mode.HIGH_PERFORMANCE, None)


def z(zone, ack=False):
    return MonitorVerdict(zone=zone, operator_ack=ack)


def test_rover_rules():
    assert supervise(Mode.HIGH_PERFORMANCE, z(Zone.Z2), POL) is Mode.HIGH_PERFORMANCE
    assert supervise(Mode.HIGH_PERFORMANCE, z(Zone.Z3), POL) is Mode.SAFETY_STOP
    assert supervise(Mode.SAFETY_STOP, z(Zone.Z0), POL) is Mode.SAFETY_STOP
    assert supervise(Mode.SAFETY_STOP, z(Zone.Z0, ack=True), POL) is Mode.HIGH_PERFORMANCE
    # an ack while still in Z3 is refused
    assert supervise(Mode.SAFETY_STOP, z(Zone.Z3, ack=True), POL) is Mode.SAFETY_STOP
    no_ack = SwitchPolicy(require_ack_after_stop=False)
    assert supervise(Mode.SAFETY_STOP, z(Zone.Z1), no_ack) is Mode.HIGH_PERFORMANCE


def test_select_actuation():
    assert select_actuation(Mode.SAFE_RECOVER, 1.0, 2.0, 3.0) == 2.0
    assert select_actuation(Mode.SWING_UP, 1.0, 2.0, 3.0) == 3.0
    assert select_actuation(Mode.HIGH_PERFORMANCE, 1.0, 2.0, 3.0) == 1.0
    assert select_actuation(Mode.HIGH_PERFORMANCE, [2.0, 0.3], None, None, 1.0).tolist() == [1.0, 0.3]
    assert select_actuation(Mode.HIGH_PERFORMANCE, [-2.0, 0.3], None, None, 1.5).tolist() == [-1.5, 0.3]
    assert select_actuation(Mode.SAFETY_STOP, [2.0, 0.3], None, None).tolist() == [0.0, 0.0]


@pytest.mark.parametrize("kw", [dict(enter_threshold=0.0), dict(enter_threshold=1.0), dict(exit_threshold=1.5),
                                dict(max_hp_age=-1)])
def test_policy_invariants(kw):
    with pytest.raises(ValueError):
        SwitchPolicy(**kw)


def test_verdict_invariants():
    with pytest.raises(ValueError):
        MonitorVerdict()
    with pytest.raises(ValueError):
        MonitorVerdict(index=0.1, zone=Zone.Z0)
    with pytest.raises(ValueError):
        MonitorVerdict(index=-0.1)


verdicts = st.one_of(
    st.builds(lambda i, f, p, a: MonitorVerdict(index=i, hp_fresh=f, predicted_index=p, operator_ack=a),
              st.floats(0, 10), st.booleans(), st.none() | st.floats(0, 10), st.booleans()),
    st.builds(lambda zz, f, a: MonitorVerdict(zone=zz, hp_fresh=f, operator_ack=a),
              st.sampled_from(list(Zone)), st.booleans(), st.booleans()),
)


@given(st.sampled_from(list(Mode)), verdicts, st.booleans(), st.booleans())
def test_supervise_total(mode, verdict, predict, need_ack):
    pol = SwitchPolicy(predict=predict, require_ack_after_stop=need_ack)
    new, cause = decide(mode, verdict, pol)
    assert isinstance(new, Mode)
    assert (cause is None) == (new is mode)
    if new is Mode.HIGH_PERFORMANCE and verdict.index is not None:
        assert verdict.index < pol.exit_threshold and verdict.hp_fresh
        if mode is not Mode.HIGH_PERFORMANCE:
            assert verdict.index < pol.enter_threshold
    if verdict.zone is Zone.Z3:
        assert new is not Mode.HIGH_PERFORMANCE


@given(st.floats(-5, 5), st.floats(-5, 5), st.sampled_from([None, 1.5, 1.0, 0.0]))
def test_cap_never_increases_speed(vv, w, cap):
    out = select_actuation(Mode.HIGH_PERFORMANCE, np.array([vv, w]), None, None, cap)
    assert abs(out[0]) <= abs(vv) and out[1] == w
