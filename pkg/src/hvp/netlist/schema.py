"""Netlist document model, JSON ingestion and validation.

Grammar (JSON)::

    netlist := {"name": str,
                "ports": {"in": [port*], "out": [port*]},
                "cells": [cell*]}
    port    := {"name": str, "width": int, "bits": [net*]}
    cell    := {"id": int, "kind": KIND, "pins": {pin: net | [net*]},
                "name"?: str, "attrs"?: {...}}
    net     := non-negative int

Pins per kind (outputs marked with *):

    AND ANDNOT NAND NOR OR ORNOT XNOR XOR   A B Y*
    NOT                                     A Y*
    MUX                                     A B S Y*      (Y = S ? B : A)
    DFF                                     D Q*          attrs.init in {0, 1}
    CONST0 CONST1                           Y*
    ROM                                     addr[k] rdata*[32]
    RAM                                     addr[v] wdata[w] wflag rdata*[w]

ANDNOT is A & ~B and ORNOT is A | ~B.  Every net has exactly one driver
(an input-port bit or a cell output pin).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

GATE_KINDS = ("AND", "ANDNOT", "MUX", "NAND", "NOR", "NOT", "OR", "ORNOT", "XNOR", "XOR")
MEMORY_KINDS = ("ROM", "RAM")
CONST_KINDS = ("CONST0", "CONST1")
KINDS = GATE_KINDS + ("DFF",) + MEMORY_KINDS + CONST_KINDS

PINS_IN = {k: ("A", "B") for k in GATE_KINDS}
PINS_IN["NOT"] = ("A",)
PINS_IN["MUX"] = ("A", "B", "S")
PINS_IN["DFF"] = ("D",)
PINS_IN["CONST0"] = ()
PINS_IN["CONST1"] = ()
PINS_IN["ROM"] = ("addr",)
PINS_IN["RAM"] = ("addr", "wdata", "wflag")
PINS_OUT = {k: ("Y",) for k in GATE_KINDS + CONST_KINDS}
PINS_OUT["DFF"] = ("Q",)
PINS_OUT["ROM"] = ("rdata",)
PINS_OUT["RAM"] = ("rdata",)
VECTOR_PINS = {"addr", "wdata", "rdata"}


class NetlistError(ValueError):
    pass


@dataclass(frozen=True)
class Port:
    name: str
    width: int
    bits: tuple[int, ...]


@dataclass(frozen=True)
class Cell:
    id: int
    kind: str
    pins: dict
    name: str | None = None
    attrs: dict = field(default_factory=dict)

    def inputs(self) -> list[int]:
        out = []
        for pin in PINS_IN[self.kind]:
            v = self.pins[pin]
            out.extend(v if isinstance(v, (list, tuple)) else [v])
        return out

    def outputs(self) -> list[int]:
        out = []
        for pin in PINS_OUT[self.kind]:
            v = self.pins[pin]
            out.extend(v if isinstance(v, (list, tuple)) else [v])
        return out


@dataclass(frozen=True)
class Netlist:
    name: str
    inputs: tuple[Port, ...]
    outputs: tuple[Port, ...]
    cells: tuple[Cell, ...]

    def port(self, name: str) -> Port:
        for p in self.inputs + self.outputs:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def num_nets(self) -> int:
        top = -1
        for p in self.inputs + self.outputs:
            top = max([top, *p.bits])
        for c in self.cells:
            top = max([top, *c.inputs(), *c.outputs()])
        return top + 1

    def cells_of(self, kind: str) -> list[Cell]:
        return [c for c in self.cells if c.kind == kind]


def _port(obj, where: str) -> Port:
    try:
        name, width, bits = obj["name"], int(obj["width"]), tuple(int(b) for b in obj["bits"])
    except (KeyError, TypeError, ValueError) as exc:
        raise NetlistError(f"malformed {where} port {obj!r}: {exc}") from None
    if len(bits) != width:
        raise NetlistError(f"port {name!r} declares width {width} but lists {len(bits)} bits")
    return Port(str(name), width, bits)


def _cell(obj) -> Cell:
    try:
        cid, kind, pins = int(obj["id"]), str(obj["kind"]), dict(obj["pins"])
    except (KeyError, TypeError, ValueError) as exc:
        raise NetlistError(f"malformed cell {obj!r}: {exc}") from None
    if kind not in KINDS:
        raise NetlistError(f"cell {cid}: unknown cell kind {kind!r}")
    norm = {}
    for pin in PINS_IN[kind] + PINS_OUT[kind]:
        if pin not in pins:
            raise NetlistError(f"cell {cid} ({kind}): pin {pin!r} is not connected")
        v = pins[pin]
        if pin in VECTOR_PINS:
            if not isinstance(v, list) or not v:
                raise NetlistError(f"cell {cid} ({kind}): pin {pin!r} must be a non-empty list of nets")
            norm[pin] = tuple(int(x) for x in v)
        else:
            if isinstance(v, list):
                raise NetlistError(f"cell {cid} ({kind}): pin {pin!r} must be a single net")
            norm[pin] = int(v)
    extra = set(pins) - set(norm)
    if extra:
        raise NetlistError(f"cell {cid} ({kind}): unknown pins {sorted(extra)}")
    attrs = dict(obj.get("attrs") or {})
    return Cell(cid, kind, norm, obj.get("name"), attrs)


def validate(nl: Netlist) -> Netlist:
    ids = set()
    driver: dict[int, str] = {}

    def drive(net: int, who: str) -> None:
        if net < 0:
            raise NetlistError(f"{who}: negative net id {net}")
        if net in driver:
            raise NetlistError(f"net {net} has multiple drivers: {driver[net]} and {who}")
        driver[net] = who

    names = set()
    for p in nl.inputs + nl.outputs:
        if p.name in names:
            raise NetlistError(f"duplicate port name {p.name!r}")
        names.add(p.name)
    for p in nl.inputs:
        for b in p.bits:
            drive(b, f"input port {p.name!r}")
    for c in nl.cells:
        if c.id in ids:
            raise NetlistError(f"duplicate cell id {c.id}")
        ids.add(c.id)
        for net in c.outputs():
            drive(net, f"cell {c.id} ({c.kind})")
        if c.kind == "RAM":
            if len(c.pins["rdata"]) != len(c.pins["wdata"]):
                raise NetlistError(f"cell {c.id} (RAM): rdata and wdata widths differ")
        if c.kind == "ROM" and len(c.pins["rdata"]) != 32:
            raise NetlistError(f"cell {c.id} (ROM): rdata must be 32 bits")
        if c.kind == "DFF" and int(c.attrs.get("init", 0)) not in (0, 1):
            raise NetlistError(f"cell {c.id} (DFF): init must be 0 or 1")
    for c in nl.cells:
        for net in c.inputs():
            if net not in driver:
                raise NetlistError(f"cell {c.id} ({c.kind}): input net {net} has no driver (dangling pin)")
    for p in nl.outputs:
        for b in p.bits:
            if b not in driver:
                raise NetlistError(f"output port {p.name!r}: net {b} has no driver")
    from .dag import find_cycle

    cyc = find_cycle(nl)
    if cyc:
        raise NetlistError(f"combinational cycle through cells {cyc}")
    return nl


def parse_netlist(document: str | bytes) -> Netlist:
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise NetlistError(f"syntax error: {exc}") from None
    if not isinstance(obj, dict):
        raise NetlistError("top level must be an object")
    try:
        ports = obj.get("ports", {})
        ins = tuple(_port(p, "input") for p in ports.get("in", []))
        outs = tuple(_port(p, "output") for p in ports.get("out", []))
        cells = tuple(_cell(c) for c in obj.get("cells", []))
    except AttributeError as exc:
        raise NetlistError(f"malformed document: {exc}") from None
    return validate(Netlist(str(obj.get("name", "")), ins, outs, cells))


def to_dict(nl: Netlist) -> dict:
    def port(p: Port) -> dict:
        return {"name": p.name, "width": p.width, "bits": list(p.bits)}

    def cell(c: Cell) -> dict:
        d = {"id": c.id, "kind": c.kind, "pins": {k: list(v) if isinstance(v, tuple) else v for k, v in c.pins.items()}}
        if c.name is not None:
            d["name"] = c.name
        if c.attrs:
            d["attrs"] = c.attrs
        return d

    return {
        "name": nl.name,
        "ports": {"in": [port(p) for p in nl.inputs], "out": [port(p) for p in nl.outputs]},
        "cells": [cell(c) for c in nl.cells],
    }


def to_json(nl: Netlist) -> str:
    return json.dumps(to_dict(nl), separators=(",", ":"))
