"""Programmatic netlist construction with constant folding and structural hashing."""

from __future__ import annotations

from .schema import Cell, Netlist, Port, validate

_COMMUTATIVE = {"AND", "NAND", "OR", "NOR", "XOR", "XNOR"}


class CircuitBuilder:
    """Emit gate cells on integer nets.

    Constants are the nets returned by :attr:`zero` and :attr:`one`.  Gates
    whose result is a constant or an existing net are folded away, and
    identical gates are shared.  DFFs are created with an unbound D pin that
    is connected later with :meth:`connect`.
    """

    def __init__(self, name: str) -> None:
        self.name = name
        self._next_net = 0
        self._next_id = 0
        self._cells: list[dict] = []
        self._inputs: list[Port] = []
        self._outputs: list[Port] = []
        self._hash: dict = {}
        self._not_of: dict[int, int] = {}
        self._const_net: dict[int, int] = {}
        self._pending: dict[int, dict] = {}

    # -- nets ----------------------------------------------------------------

    def _net(self) -> int:
        n = self._next_net
        self._next_net += 1
        return n

    def _cell(self, kind: str, pins: dict, name: str | None = None, attrs: dict | None = None) -> dict:
        c = {"id": self._next_id, "kind": kind, "pins": pins, "name": name, "attrs": attrs or {}}
        self._next_id += 1
        self._cells.append(c)
        return c

    def const(self, bit: int) -> int:
        bit = int(bool(bit))
        if bit not in self._const_net:
            y = self._net()
            self._cell("CONST1" if bit else "CONST0", {"Y": y})
            self._const_net[bit] = y
        return self._const_net[bit]

    @property
    def zero(self) -> int:
        return self.const(0)

    @property
    def one(self) -> int:
        return self.const(1)

    def const_value(self, net: int):
        for bit, n in self._const_net.items():
            if n == net:
                return bit
        return None

    def input(self, name: str, width: int = 1) -> list[int]:
        bits = [self._net() for _ in range(width)]
        self._inputs.append(Port(name, width, tuple(bits)))
        return bits

    def output(self, name: str, bits) -> None:
        bits = list(bits) if isinstance(bits, (list, tuple)) else [bits]
        self._outputs.append(Port(name, len(bits), tuple(bits)))

    # -- gates ------------------------------------------------------------------

    def gate(self, kind: str, *ins: int) -> int:
        folded = self._fold(kind, ins)
        if folded is not None:
            return folded
        if kind in _COMMUTATIVE:
            key = (kind, tuple(sorted(ins)))
        else:
            key = (kind, tuple(ins))
        hit = self._hash.get(key)
        if hit is not None:
            return hit
        y = self._net()
        pins = dict(zip(("A", "B", "S") if kind == "MUX" else ("A", "B"), ins))
        pins["Y"] = y
        self._cell(kind, pins)
        self._hash[key] = y
        if kind == "NOT":
            self._not_of[y] = ins[0]
        return y

    def _fold(self, kind: str, ins):
        cv = [self.const_value(x) for x in ins]
        if kind == "NOT":
            (a,) = ins
            if cv[0] is not None:
                return self.const(1 - cv[0])
            if a in self._not_of:
                return self._not_of[a]
            return None
        if kind == "MUX":
            a, b, s = ins
            if cv[2] is not None:
                return b if cv[2] else a
            if a == b:
                return a
            if cv[0] == 0 and cv[1] == 1:
                return s
            if cv[0] == 1 and cv[1] == 0:
                return self.NOT(s)
            if cv[0] == 0:
                return self.AND(s, b)
            if cv[1] == 0:
                return self.ANDNOT(a, s)
            if cv[0] == 1:
                return self.ORNOT(b, s)
            if cv[1] == 1:
                return self.OR(s, a)
            return None
        a, b = ins
        ca, cb = cv
        if ca is not None and cb is not None:
            return self.const(_truth(kind, ca, cb))
        if kind in _COMMUTATIVE and ca is not None:
            a, b, ca, cb = b, a, cb, ca
        same = a == b
        inv = self._not_of.get(a) == b or self._not_of.get(b) == a
        if kind == "AND":
            if cb is not None:
                return a if cb else self.zero
            if same:
                return a
            if inv:
                return self.zero
        elif kind == "NAND":
            if cb is not None:
                return self.NOT(a) if cb else self.one
            if same:
                return self.NOT(a)
        elif kind == "OR":
            if cb is not None:
                return self.one if cb else a
            if same:
                return a
            if inv:
                return self.one
        elif kind == "NOR":
            if cb is not None:
                return self.zero if cb else self.NOT(a)
            if same:
                return self.NOT(a)
        elif kind == "XOR":
            if cb is not None:
                return self.NOT(a) if cb else a
            if same:
                return self.zero
            if inv:
                return self.one
        elif kind == "XNOR":
            if cb is not None:
                return a if cb else self.NOT(a)
            if same:
                return self.one
        elif kind == "ANDNOT":
            if ca is not None:
                return self.NOT(b) if ca else self.zero
            if cb is not None:
                return self.zero if cb else a
            if same:
                return self.zero
        elif kind == "ORNOT":
            if ca is not None:
                return self.one if ca else self.NOT(b)
            if cb is not None:
                return a if cb else self.one
            if same:
                return self.one
        return None

    def AND(self, a, b):
        return self.gate("AND", a, b)

    def NAND(self, a, b):
        return self.gate("NAND", a, b)

    def OR(self, a, b):
        return self.gate("OR", a, b)

    def NOR(self, a, b):
        return self.gate("NOR", a, b)

    def XOR(self, a, b):
        return self.gate("XOR", a, b)

    def XNOR(self, a, b):
        return self.gate("XNOR", a, b)

    def ANDNOT(self, a, b):
        return self.gate("ANDNOT", a, b)

    def ORNOT(self, a, b):
        return self.gate("ORNOT", a, b)

    def NOT(self, a):
        return self.gate("NOT", a)

    def MUX(self, s, a1, a0):
        """s ? a1 : a0 (emitted with the Yosys pin order A=a0, B=a1)."""
        return self.gate("MUX", a0, a1, s)

    # -- sequential and memory cells ------------------------------------------------

    def dff(self, name: str | None = None, init: int = 0) -> int:
        q = self._net()
        c = self._cell("DFF", {"D": None, "Q": q}, name, {"init": init} if init else None)
        self._pending[q] = c
        return q

    def connect(self, q: int, d: int) -> None:
        c = self._pending.pop(q, None)
        if c is None:
            raise ValueError(f"net {q} is not an unconnected DFF output")
        c["pins"]["D"] = d

    def register(self, d: int, name: str | None = None, init: int = 0) -> int:
        q = self.dff(name, init)
        self.connect(q, d)
        return q

    def rom(self, addr: list[int], name: str = "rom") -> list[int]:
        rdata = [self._net() for _ in range(32)]
        self._cell("ROM", {"addr": tuple(addr), "rdata": tuple(rdata)}, name)
        return rdata

    def ram(self, addr: list[int], wdata: list[int], wflag: int, name: str = "ram") -> list[int]:
        rdata = [self._net() for _ in range(len(wdata))]
        self._cell("RAM", {"addr": tuple(addr), "wdata": tuple(wdata), "wflag": wflag, "rdata": tuple(rdata)}, name)
        return rdata

    # -- finish -------------------------------------------------------------

    def build(self, prune: bool = True) -> Netlist:
        if self._pending:
            raise ValueError(f"DFFs without D input: {sorted(c['id'] for c in self._pending.values())}")
        cells = self._cells
        if prune:
            cells = self._live_cells()
        out = tuple(Cell(c["id"], c["kind"], dict(c["pins"]), c["name"], dict(c["attrs"])) for c in cells)
        return validate(Netlist(self.name, tuple(self._inputs), tuple(self._outputs), out))

    def _live_cells(self) -> list[dict]:
        """Drop gates that feed no output, DFF or memory port."""
        driver = {}
        for c in self._cells:
            for pin in ("Y", "Q", "rdata"):
                v = c["pins"].get(pin)
                if v is None:
                    continue
                for net in v if isinstance(v, tuple) else (v,):
                    driver[net] = c
        live = set()
        stack = [b for p in self._outputs for b in p.bits]
        for c in self._cells:
            if c["kind"] in ("DFF", "ROM", "RAM"):
                live.add(c["id"])
                stack.extend(_inputs(c))
        while stack:
            net = stack.pop()
            c = driver.get(net)
            if c is None or c["id"] in live:
                continue
            live.add(c["id"])
            stack.extend(_inputs(c))
        return [c for c in self._cells if c["id"] in live]


def _inputs(c: dict) -> list[int]:
    out = []
    for pin, v in c["pins"].items():
        if pin in ("Y", "Q", "rdata"):
            continue
        out.extend(v if isinstance(v, tuple) else [v])
    return out


def _truth(kind: str, a: int, b: int) -> int:
    return {
        "AND": a & b,
        "NAND": 1 - (a & b),
        "OR": a | b,
        "NOR": 1 - (a | b),
        "XOR": a ^ b,
        "XNOR": 1 - (a ^ b),
        "ANDNOT": a & (1 - b),
        "ORNOT": a | (1 - b),
    }[kind]
