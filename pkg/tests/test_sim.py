import pytest
from hypothesis import given, settings, strategies as st

from evacnav import comms as cm
from evacnav.config import ALGORITHMS, SimConfig, apply_overrides
from evacnav.energy import Battery
from evacnav.hazard import ignite
from evacnav.sim import DEAD, EVACUATED, MOVING, STAY, Evacuee, World, run

from conftest import make_graph

CALM = {"hazard.ignition_node": "none", "energy.battery_sd_j": 0.0, "energy.battery_mean_j": 3000.0}


def cfg(**kw):
    overrides = kw.pop("overrides", {})
    return apply_overrides(SimConfig(**kw), overrides)


def corridor():
    # 0 exit - 1 - 2 - 3 - 4, all landmarks on one floor
    return make_graph([(i, 4.0 * i, 0.0, 0, "exit" if i == 0 else "landmark") for i in range(5)],
                      [(i, i + 1) for i in range(4)], access_points=[0])


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_single_evacuee_without_fire_escapes(mall, algorithm):
    m = run(cfg(evacuee_count=1, algorithm=algorithm, overrides={"hazard.ignition_node": "none"}), mall)
    assert m.survivors == 1 and m.survivor_pct == 1.0
    assert m.mean_evacuation_time_s > 0


@pytest.mark.parametrize("algorithm", ALGORITHMS)
@pytest.mark.parametrize("comms", cm.COMMS_MODES)
def test_no_threat_everyone_escapes(mall, algorithm, comms):
    over = {**CALM, "hazard.spread_probability": 0.0, "hazard.sensing_delay_s": 0.0}
    m = run(cfg(evacuee_count=30, algorithm=algorithm, comms_mode=comms, seed=2, overrides=over), mall)
    assert m.survivor_pct == 1.0
    assert m.trapped_at_cap == 0


def test_empty_run(mall):
    m = run(cfg(evacuee_count=0), mall)
    assert (m.survivors, m.survivor_pct, m.casualties, m.trapped_at_cap, m.drained_phones) == (0, 0.0, 0, 0, 0)
    assert m.total_energy_j == 0.0


def test_standing_on_ignited_node_dies():
    g = corridor()
    w = World(cfg(evacuee_count=0, overrides={"hazard.ignition_node": "none"}), g)
    w.populate()
    e = Evacuee(id=0, node=3, speed_mps=1.4, battery=Battery(1000, 3000))
    w.evacuees, w.by_id = [e], {0: e}
    w.comms.batteries = {0: e.battery}
    w.hazard = ignite(w.hazard, 3, 0.0)
    w.step()
    assert e.life_state == DEAD


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_runs_are_deterministic(mall, algorithm):
    c = cfg(evacuee_count=20, algorithm=algorithm, seed=4)
    a, b = run(c, mall), run(c, mall)
    assert a == b
    assert a.events == b.events


def test_sixty_evacuees_drain_under_direct_3g(mall):
    m = run(cfg(evacuee_count=60, algorithm="dijkstra", comms_mode="direct3g", seed=1), mall)
    assert m.drained_phones >= 1


def test_mixing_probability_zero_equals_cpnst(mall):
    base = dict(evacuee_count=15, seed=3, comms_mode="direct3g")
    a = run(cfg(algorithm="cpnst", **base), mall)
    b = run(cfg(algorithm="cpn-spf", overrides={"sim.p_spf": 0.0}, **base), mall)
    assert a.events == b.events and a.survivors == b.survivors


def test_lone_evacuee_spf_falls_back_to_cpn(mall):
    base = dict(evacuee_count=1, seed=5, comms_mode="direct3g")
    a = run(cfg(algorithm="cpnst", **base), mall)
    b = run(cfg(algorithm="cpn-spf", overrides={"sim.p_spf": 1.0}, **base), mall)
    assert a.events == b.events


def _world_with(g, evacuees, algorithm="cpnst", **over):
    w = World(cfg(evacuee_count=0, algorithm=algorithm, overrides={"hazard.ignition_node": "none", **over}), g)
    w.populate()
    w.evacuees = evacuees
    w.by_id = {e.id: e for e in evacuees}
    w.comms.batteries = {e.id: e.battery for e in evacuees}
    return w


def test_isolated_node_stays():
    g = corridor()
    e = Evacuee(id=0, node=2, speed_mps=1.4, battery=Battery(1000, 3000))
    w = _world_with(g, [e], **{"hazard.sensing_delay_s": 0.0})
    w.hazard = ignite(ignite(w.hazard, 1, 0.0), 3, 0.0)
    w._refresh_knowledge()
    assert w.decide_next(e) is STAY


def test_depleted_follows_visible_phone():
    g = corridor()
    leader = Evacuee(id=0, node=2, speed_mps=1.4, battery=Battery(1000, 3000))
    follower = Evacuee(id=1, node=3, speed_mps=1.4, battery=Battery(100, 3000), phone_active=False)
    w = _world_with(g, [leader, follower])
    assert w.decide_next(follower) == 2
    assert follower.follow_target == 0


def test_depleted_with_no_one_and_fire_all_round_stays():
    g = corridor()
    e = Evacuee(id=0, node=2, speed_mps=1.4, battery=Battery(100, 3000), phone_active=False)
    w = _world_with(g, [e])
    w.hazard = ignite(ignite(w.hazard, 1, 0.0), 3, 0.0)
    assert w.decide_next(e) is STAY


def test_wander_sequence_repeatable(mall):
    def walk(seed):
        e = Evacuee(id=0, node=20, speed_mps=1.4, battery=Battery(100, 3000), phone_active=False)
        w = _world_with(mall, [e])
        w.rng.seed(seed)
        return [w.depleted_behavior(e) for _ in range(20)]

    assert walk(9) == walk(9)


class CheckedWorld(World):
    """World that asserts the movement safety rules at every decision."""

    def decide_next(self, e):
        active = e.phone_active
        nxt = super().decide_next(e)
        if nxt is not STAY:
            if active:
                assert nxt not in self.known and e.node not in self.known
            else:
                assert not self.burning(nxt)
        return nxt


@settings(max_examples=12)
@given(
    st.integers(1, 10_000),
    st.sampled_from(ALGORITHMS),
    st.sampled_from(cm.COMMS_MODES),
    st.integers(5, 40),
)
def test_world_invariants(seed, algorithm, comms, count):
    from evacnav.building import default_building

    g = default_building()
    w = CheckedWorld(cfg(evacuee_count=count, algorithm=algorithm, comms_mode=comms, seed=seed, max_steps=400), g)
    w.populate()
    terminal = {}
    drained = set()
    while not w.done() and w.step_index < 400:
        w.step()
        states = [e.life_state for e in w.evacuees]
        assert len(states) == count
        for e in w.evacuees:
            if e.id in terminal:
                assert e.life_state == terminal[e.id]
            elif e.life_state in (DEAD, EVACUATED):
                terminal[e.id] = e.life_state
            if e.id in drained:
                assert not e.phone_active
            if e.battery.drained:
                drained.add(e.id)
            assert e.battery.remaining_q >= 0
            if e.edge is not None:
                assert 0 <= e.progress_m <= g.length(*e.edge)
    m = w.metrics()
    assert m.survivors + m.casualties + m.trapped_at_cap == count
    assert m.ledger_balanced()
    assert m.drained_phones == len(drained)
