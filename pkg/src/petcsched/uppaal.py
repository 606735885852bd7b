"""One-way export of the composed traffic game to UPPAAL-Tiga XML.

Dialect subset used (documented in ``docs/uppaal_dialect.md``):

* global declarations: constants ``r``, ``e_ref``, ``E``, ``DELTA``; the
  bounded integer ``e``; the broadcast channel ``up``; the earliness
  update function ``upd``;
* one template per loop with a single clock ``c`` counted in base ticks,
  locations ``Q<i>`` with invariant ``c <= i*T`` (``T`` base ticks per
  check), controllable early edges (``c == k*T``) and uncontrollable
  trigger edges (``c == i*T``), each synchronizing ``up!``, resetting
  ``c`` and updating ``e``;
* a network template ``Idle``/``InUse``/``Bad`` with clock ``cN``;
* the control query ``control: A[] not network.Bad and e < E``.
"""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from fractions import Fraction
from typing import Dict, Optional, Sequence

from .errors import InputError
from .game import EarlinessParams, NetworkTGA, default_base_tick
from .traffic import TrafficModel

DOCTYPE = ("<!DOCTYPE nta PUBLIC '-//Uppaal Team//DTD Flat System 1.1//EN' "
           "'http://www.it.uu.se/research/group/darts/uppaal/flat-1_2.dtd'>")
QUERY = "control: A[] not network.Bad and e < E"


def _ident(name: str) -> str:
    s = re.sub(r"\W", "_", name)
    return s if s and not s[0].isdigit() else f"L_{s}"


def _global_declarations(params: EarlinessParams, net: NetworkTGA) -> str:
    return "\n".join([
        f"const int r = {params.r};",
        f"const int e_ref = {params.e_ref};",
        f"const int E = {params.E};",
        f"const int DELTA = {net.delta};",
        "int[0,E] e = 0;",
        "broadcast chan up;",
        "",
        "int upd(int ev, int i, int k) {",
        "    int v = ev + r * (i - k) - e_ref;",
        "    if (v < 0) v = 0;",
        "    if (v > E) v = E;",
        "    return v;",
        "}",
    ])


def _location(tpl, lid: str, name: str, invariant: Optional[str] = None):
    loc = ET.SubElement(tpl, "location", id=lid)
    ET.SubElement(loc, "name").text = name
    if invariant:
        ET.SubElement(loc, "label", kind="invariant").text = invariant
    return loc


def _transition(tpl, src: str, dst: str, controllable: bool, guard: Optional[str],
                sync: Optional[str], assign: Optional[str]):
    tr = ET.SubElement(tpl, "transition")
    if not controllable:
        tr.set("controllable", "false")
    ET.SubElement(tr, "source", ref=src)
    ET.SubElement(tr, "target", ref=dst)
    if guard:
        ET.SubElement(tr, "label", kind="guard").text = guard
    if sync:
        ET.SubElement(tr, "label", kind="synchronisation").text = sync
    if assign:
        ET.SubElement(tr, "label", kind="assignment").text = assign


def _loop_template(nta, model: TrafficModel, name: str, ticks: int, initial: int):
    tpl = ET.SubElement(nta, "template")
    ET.SubElement(tpl, "name").text = name
    ET.SubElement(tpl, "declaration").text = "clock c;"
    ids = {i: f"{name}_Q{i}" for i in model.regions}
    for i in model.regions:
        _location(tpl, ids[i], f"Q{i}", f"c <= {i * ticks}")
    ET.SubElement(tpl, "init", ref=ids[initial])
    for i, k, j in sorted(model.early_edges):
        _transition(tpl, ids[i], ids[j], True, f"c == {k * ticks}", "up!",
                    f"c = 0, e = upd(e, {i}, {k})")
    for i, j in sorted(model.trigger_edges):
        _transition(tpl, ids[i], ids[j], False, f"c == {i * ticks}", "up!",
                    f"c = 0, e = upd(e, {i}, {i})")


def _network_template(nta, net: NetworkTGA):
    tpl = ET.SubElement(nta, "template")
    ET.SubElement(tpl, "name").text = "Network"
    ET.SubElement(tpl, "declaration").text = "clock cN;"
    _location(tpl, "net_Idle", "Idle")
    _location(tpl, "net_InUse", "InUse", "cN <= DELTA")
    _location(tpl, "net_Bad", "Bad")
    ET.SubElement(tpl, "init", ref="net_Idle")
    _transition(tpl, "net_Idle", "net_InUse", False, None, "up?", "cN = 0")
    _transition(tpl, "net_InUse", "net_Idle", False, "cN == DELTA", None, None)
    _transition(tpl, "net_InUse", "net_Bad", False, None, "up?", None)
    _transition(tpl, "net_Bad", "net_Bad", False, None, "up?", None)


def export_uppaal(models: Sequence[TrafficModel], net: NetworkTGA, params: EarlinessParams,
                  base_tick=None, initial: Optional[Dict[str, int]] = None) -> str:
    """Return the NTGA as an UPPAAL-Tiga XML document.

    UPPAAL needs one initial location per template; ``initial`` maps loop
    ids to the chosen region (default ``k_min``). Checking every joint
    initial state means re-running the query per choice.
    """
    models = list(models)
    if base_tick is None:
        base_tick = default_base_tick([m.h for m in models])
    base_tick = Fraction(base_tick)
    initial = initial or {}
    nta = ET.Element("nta")
    ET.SubElement(nta, "declaration").text = _global_declarations(params, net)
    names = []
    for m in models:
        name = _ident(m.loop_id)
        if name in names or name == "Network":
            name = f"{name}_{len(names)}"
        names.append(name)
        ticks = Fraction(m.h) / base_tick
        if ticks.denominator != 1:
            raise InputError(f"{m.loop_id}: period is not a multiple of the base tick")
        _loop_template(nta, m, name, int(ticks), initial.get(m.loop_id, m.k_min))
    _network_template(nta, net)
    inst = [f"{n.lower()}_inst = {n}();" for n in names]
    ET.SubElement(nta, "system").text = "\n".join(
        inst + ["network = Network();",
                f"system {', '.join(n.lower() + '_inst' for n in names)}, network;"])
    queries = ET.SubElement(nta, "queries")
    q = ET.SubElement(queries, "query")
    ET.SubElement(q, "formula").text = QUERY
    ET.SubElement(q, "comment").text = "conflict-free scheduling with bounded earliness"
    ET.indent(nta, space="  ")
    body = ET.tostring(nta, encoding="unicode")
    return f"<?xml version=\"1.0\" encoding=\"utf-8\"?>\n{DOCTYPE}\n{body}\n"


def location_count(xml_text: str) -> int:
    root = ET.fromstring(xml_text.split(DOCTYPE, 1)[-1])
    return len(root.findall("./template/location"))
