from fractions import Fraction

import pytest

from petcsched.errors import AbstractionError
from petcsched.regions import RegionSpec
from petcsched.traffic import (EARLY, TRIGGER, TrafficModel, build_quotient, build_tga,
                               conformance_trials)

# trigger successors read off the reference relation for the first loop
REFERENCE_TRIGGER_ROWS = {6: range(6, 13), 7: range(6, 11), 8: range(6, 10), 18: range(6, 19)}
REFERENCE_EARLY_ROWS = {6: {6, 7}, 15: set(range(14, 20))}  # fired at the first check


def small_model(**kw):
    args = dict(loop_id="t", k_min=2, k_max=3, trigger_edges={(2, 2), (2, 3), (3, 3)},
                early_edges={(3, 1, 2), (3, 2, 3)}, h=Fraction(1, 10))
    args.update(kw)
    return TrafficModel(**args)


def test_model_validation():
    with pytest.raises(AbstractionError):
        small_model(trigger_edges={(2, 2)})            # Q3 has no trigger successor
    with pytest.raises(AbstractionError):
        small_model(trigger_edges={(2, 4), (3, 3)})    # leaves the region set
    with pytest.raises(AbstractionError):
        small_model(early_edges={(3, 3, 2)})           # early needs k < i


def test_model_queries_and_json(tmp_path):
    m = small_model()
    assert m.trigger_successors(2) == [2, 3]
    assert m.early_successors(3, 1) == [2] and m.early_times(3) == [1, 2]
    assert m.output(3) == 3
    m.save(tmp_path / "m.json")
    back = TrafficModel.load(tmp_path / "m.json")
    assert back.to_dict() == m.to_dict() and back.h == Fraction(1, 10)


def test_build_quotient_checks_tables(designed):
    with pytest.raises(Exception):
        build_quotient(designed["loop1"].tables, RegionSpec(6, 25), (set(), set()))


@pytest.mark.parametrize("i", sorted(REFERENCE_TRIGGER_ROWS))
def test_reference_trigger_rows(models, i):
    got = set(models[0].trigger_successors(i))
    assert set(REFERENCE_TRIGGER_ROWS[i]) <= got
    assert len(got - set(REFERENCE_TRIGGER_ROWS[i])) <= 1


@pytest.mark.parametrize("i", sorted(REFERENCE_EARLY_ROWS))
def test_reference_early_rows(models, i):
    assert set(models[0].early_successors(i, 1)) == REFERENCE_EARLY_ROWS[i]


def test_tga_structure():
    tga = build_tga(small_model())
    assert tga.locations == (2, 3) and tga.initial == (2, 3)
    assert tga.invariant(3) == 3
    assert {(e.source, e.guard, e.target) for e in tga.controlled} == {(3, 1, 2), (3, 2, 3)}
    assert all(e.action == EARLY for e in tga.controlled)
    assert all(e.action == TRIGGER and e.guard == e.source for e in tga.uncontrolled)
    d = tga.to_dict()
    assert len(d["locations"]) == 2 and len(d["edges"]) == 5


def test_tga_without_early_edges_is_uncontrollable():
    tga = build_tga(small_model(early_edges=set()))
    assert not tga.controlled and len(tga.uncontrolled) == 3


def test_conformance_on_abstraction(abstractions):
    a = abstractions["loop2"]
    rep = conformance_trials(a.model, a.designed.tables, a.spec, trials=100, events=20, seed=4,
                             early_probability=0.3)
    assert rep.ok and rep.steps_checked == 2000


def test_conformance_detects_deleted_edge(abstractions):
    a = abstractions["loop2"]
    m = a.model
    # drop an edge the closed loop uses often
    edges = set(m.trigger_edges) - {(5, 7)}
    mutated = TrafficModel(m.loop_id, m.k_min, m.k_max, edges, m.early_edges, m.h)
    rep = conformance_trials(mutated, a.designed.tables, a.spec, trials=200, events=20, seed=4)
    assert not rep.ok
    assert all((i, j) == (5, 7) for _, i, _, j in rep.violations)
