import pytest
from hypothesis import given
from hypothesis import strategies as st

from flipchip.errors import FlipchipError
from flipchip.losses import ParticipationRecord, interpolate_p_sigma, relative_q, total_participation


def rec(w, p_sigma, facing="metal"):
    # split a total into the three interfaces
    return ParticipationRecord(w, facing, 0.5 * p_sigma, 0.1 * p_sigma, 0.4 * p_sigma)


def test_total_participation_examples():
    assert total_participation(ParticipationRecord(5.0, "metal", 0.0, 0.0, 0.0)) == 0.0
    assert total_participation(ParticipationRecord(5.0, "metal", 0.004, 0.001, 0.005)) == pytest.approx(0.010)
    with pytest.raises(FlipchipError):
        ParticipationRecord(5.0, "metal", 0.5, 0.6, 0.2)
    with pytest.raises(FlipchipError):
        ParticipationRecord(5.0, "metal", -0.1, 0.0, 0.0)
    with pytest.raises(FlipchipError):
        total_participation(ParticipationRecord(5.0, "metal", 0.001, None, 0.001))


def test_relative_q_examples():
    records = [rec(2.5, 0.025), rec(5.0, 0.010), rec(20.0, 0.002)]
    q = dict(relative_q(records, 5.0, 5e5).points)
    assert q[5.0] == 5e5
    assert q[20.0] == pytest.approx(2.5e6, rel=1e-12)
    assert q[2.5] == pytest.approx(2.0e5, rel=1e-12)


def test_relative_q_errors():
    with pytest.raises(FlipchipError):
        relative_q([rec(2.5, 0.02), rec(20.0, 0.002)], 5.0, 5e5)
    with pytest.raises(FlipchipError):
        relative_q([rec(5.0, 0.01), rec(10.0, 0.0)], 5.0, 5e5)
    with pytest.raises(FlipchipError):
        relative_q([rec(5.0, 0.01), rec(10.0, 0.005, "dielectric")], 5.0, 5e5)


def test_relative_q_selects_facing():
    records = [rec(5.0, 0.01), rec(10.0, 0.005), rec(5.0, 0.02, "dielectric"), rec(10.0, 0.004, "dielectric")]
    curve = relative_q(records, 5.0, 4e5, facing="dielectric")
    assert curve.facing == "dielectric"
    assert dict(curve.points)[10.0] == pytest.approx(2e6)


positive = st.floats(min_value=1e-4, max_value=0.3)


@given(st.lists(positive, min_size=2, max_size=6), st.floats(min_value=0.01, max_value=3.0))
def test_relative_q_scale_invariance(ps, c):
    ws = [2.5 * (i + 1) for i in range(len(ps))]
    scaled = [min(p * c, 0.3) for p in ps]
    if scaled != [p * c for p in ps]:
        return
    a = relative_q([rec(w, p) for w, p in zip(ws, ps)], ws[0], 5e5)
    b = relative_q([rec(w, p) for w, p in zip(ws, scaled)], ws[0], 5e5)
    for (_, qa), (_, qb) in zip(a.points, b.points):
        assert qa == pytest.approx(qb, rel=1e-12)


@given(positive, st.lists(st.floats(min_value=0.2, max_value=0.99), min_size=1, max_size=5))
def test_q_monotone_when_participation_decreases(p0, factors):
    ps = [p0]
    for f in factors:
        ps.append(ps[-1] * f)
    ws = [2.5 * (i + 1) for i in range(len(ps))]
    curve = relative_q([rec(w, p) for w, p in zip(ws, ps)], ws[0], 5e5)
    qs = [q for _, q in curve.points]
    assert all(q2 > q1 for q1, q2 in zip(qs, qs[1:]))
    assert all(q > 0 for q in qs)


def test_interpolation_examples():
    records = [rec(5.0, 0.010), rec(20.0, 0.0025)]
    assert interpolate_p_sigma(records, 10.0) == pytest.approx(0.005, abs=1e-6)
    assert interpolate_p_sigma(records, 5.0) == total_participation(records[0])
    assert interpolate_p_sigma(records, 20.0) == total_participation(records[1])
    with pytest.raises(FlipchipError):
        interpolate_p_sigma([rec(2.5, 0.02), rec(20.0, 0.002)], 30.0)


@given(st.lists(positive, min_size=2, max_size=5, unique=True), st.floats(min_value=0.0, max_value=1.0))
def test_interpolation_monotone_between_monotone_samples(ps, t):
    ps = sorted(ps, reverse=True)
    ws = [2.5 * 2**i for i in range(len(ps))]
    records = [rec(w, p) for w, p in zip(ws, ps)]
    w1 = ws[0] + t * (ws[-1] - ws[0])
    w2 = min(w1 * 1.1, ws[-1])
    assert interpolate_p_sigma(records, w2) <= interpolate_p_sigma(records, w1) * (1 + 1e-12)
