import xml.etree.ElementTree as ET
from fractions import Fraction

import pytest

from petcsched.errors import InputError
from petcsched.game import EarlinessParams, build_network_tga
from petcsched.traffic import TrafficModel
from petcsched.uppaal import DOCTYPE, QUERY, export_uppaal, location_count


def parse(text):
    return ET.fromstring(text.split(DOCTYPE, 1)[1])


def test_batch_reactor_export(models):
    xml = export_uppaal(models, build_network_tga(1), EarlinessParams())
    assert location_count(xml) == 14 + 13 + 3
    root = parse(xml)
    names = [t.findtext("name") for t in root.findall("template")]
    assert names == ["loop1", "loop2", "Network"]
    decl = root.findtext("declaration")
    assert "broadcast chan up;" in decl and "int[0,E] e = 0;" in decl
    loop1 = root.findall("template")[0]
    trans = loop1.findall("transition")
    ctrl = [t for t in trans if t.get("controllable") != "false"]
    assert len(ctrl) == len(models[0].early_edges)
    assert len(trans) - len(ctrl) == len(models[0].trigger_edges)
    for t in trans:
        labels = {lab.get("kind"): lab.text for lab in t.findall("label")}
        assert labels["synchronisation"] == "up!"
        assert labels["assignment"].startswith("c = 0, e = upd(e, ")
    assert root.find("queries/query/formula").text == QUERY
    assert "system loop1_inst, loop2_inst, network;" in root.findtext("system")


def test_invariants_scale_with_ticks():
    fast = TrafficModel("f", 2, 3, {(2, 3), (3, 2)}, set(), Fraction(1, 100))
    slow = TrafficModel("s", 2, 2, {(2, 2)}, set(), Fraction(3, 100))
    root = parse(export_uppaal([fast, slow], build_network_tga(2), EarlinessParams()))
    slow_tpl = root.findall("template")[1]
    assert slow_tpl.find("location/label").text == "c <= 6"
    guard = slow_tpl.find("transition/label[@kind='guard']").text
    assert guard == "c == 6"
    assert "const int DELTA = 2;" in root.findtext("declaration")


def test_no_early_edges_gives_only_uncontrollable():
    m = TrafficModel("x", 4, 5, {(4, 5), (5, 4)}, set(), Fraction(1, 10))
    root = parse(export_uppaal([m], build_network_tga(1), EarlinessParams()))
    trans = root.findall("template")[0].findall("transition")
    assert trans and all(t.get("controllable") == "false" for t in trans)


def test_initial_location_and_tick_checks():
    m = TrafficModel("1x", 4, 5, {(4, 5), (5, 4)}, set(), Fraction(1, 10))
    root = parse(export_uppaal([m], build_network_tga(1), EarlinessParams(), initial={"1x": 5}))
    tpl = root.find("template")
    assert tpl.findtext("name") == "L_1x" and tpl.find("init").get("ref") == "L_1x_Q5"
    with pytest.raises(InputError):
        export_uppaal([m], build_network_tga(1), EarlinessParams(), base_tick=Fraction(3, 100))
