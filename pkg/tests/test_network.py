import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirbc.geometry import SpacetimePoint, in_causal_future
from dirbc.network import (
    COMPUTE,
    GEN,
    RECV,
    SEND,
    CausalityFault,
    Event,
    Network,
    Transcript,
    Worldline,
    deliver,
)


def test_deliver_to_static_recipient():
    r = deliver(SpacetimePoint(0, 0, 0, 0), Worldline.static((3, 4, 0)))
    assert (r.x, r.y, r.t) == (3, 4, 5)


def test_deliver_demanded_point():
    wl = Worldline.static((1, 0, 0))
    assert deliver(SpacetimePoint(0, 0, 0, 0), wl, SpacetimePoint(1, 0, 0, 2)).t == 1
    with pytest.raises(CausalityFault):
        deliver(SpacetimePoint(0, 0, 0, 0), wl, SpacetimePoint(1, 0, 0, 0.5))


@given(st.floats(-5, 5), st.floats(0.1, 0.95), st.floats(-5, 5), st.floats(-3, 3))
def test_moving_recipient_reception_on_light_cone(x0, speed, ex, et):
    wl = Worldline.travel((x0, 0, 0), (x0 + 4, 1, 0), depart=0.0, speed=speed)
    emission = SpacetimePoint(ex, 0, 0, et)
    r = deliver(emission, wl)
    assert in_causal_future(emission, r)
    assert r.t - emission.t == pytest.approx(math.dist(r.position, emission.position), abs=1e-9)
    assert r.position == pytest.approx(wl.position_at(r.t))


def test_worldline_rejects_superluminal():
    with pytest.raises(ValueError):
        Worldline(((0.0, (0, 0, 0)), (1.0, (2, 0, 0))))
    with pytest.raises(ValueError):
        Worldline.travel((0, 0, 0), (1, 0, 0), 0.0, 1.0)


def _ping_pong():
    net = Network()
    net.add_agent("A", Worldline.static((0, 0, 0)))
    net.add_agent("B", Worldline.static((2, 0, 0)))

    def start(n):
        g = n.log(GEN, "coin", 1)
        n.send("ping", 1, ["B"], sources=[g.seq])

    def reply(n, ev):
        c = n.log(COMPUTE, "echo", ev.payload, sources=[ev.seq])
        n.send("pong", ev.payload, ["A"], sources=[c.seq])

    net.at(0.0, "A", start)
    net.on_receive("B", reply, label="ping")
    return net.run()


def test_event_loop_orders_and_times():
    tr = _ping_pong()
    assert [e.kind for e in tr] == [GEN, SEND, RECV, COMPUTE, SEND, RECV]
    assert [e.time for e in tr] == [0, 0, 2, 2, 2, 4]
    recv = tr.find(agent="A", kind=RECV)[0]
    assert tr.by_id()[recv.ref].label == "pong"


def test_transcript_text_round_trip():
    tr = _ping_pong()
    tr.header["seed"] = "42"
    again = Transcript.from_text(tr.to_text())
    assert again.events == tr.events and again.header == tr.header
    assert again.to_text() == tr.to_text()


def test_runs_are_deterministic():
    assert _ping_pong().to_text() == _ping_pong().to_text()


def test_malformed_line():
    with pytest.raises(ValueError):
        Event.from_line("t=0 id=0 agent=A")


def test_demand_violation_raises_during_send():
    net = Network()
    net.add_agent("A", Worldline.static((0, 0, 0)))
    net.add_agent("B", Worldline.static((5, 0, 0)))
    net.at(0.0, "A", lambda n: n.send("x", 0, ["B"], demand={"B": SpacetimePoint(5, 0, 0, 1)}))
    with pytest.raises(CausalityFault):
        net.run()


def test_agent_names_validated():
    net = Network()
    net.add_agent("A", Worldline.static((0, 0, 0)))
    with pytest.raises(ValueError):
        net.add_agent("A", Worldline.static((0, 0, 0)))
    with pytest.raises(ValueError):
        net.add_agent("B C", Worldline.static((0, 0, 0)))
