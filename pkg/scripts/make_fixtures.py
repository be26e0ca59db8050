"""Regenerate the shipped fixture programs under src/leofuzz/fixtures/.

    python scripts/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "leofuzz" / "fixtures"


class Builder:
    def __init__(self, entry_function: str, source: str):
        self.entry_function = entry_function
        self.source = source
        self.functions: list[dict] = []
        self.predicates: list[dict] = []
        self.defaults: list[list[str]] = []
        self.crash: list[str] = []
        self._line = 10
        self._fn: dict | None = None

    def function(self, name: str) -> None:
        self._fn = {"name": name, "blocks": [], "edges": [], "calls": []}
        self.functions.append(self._fn)

    def block(self, bid: str, line: tuple[str, int] | None = None, crash: bool = False) -> str:
        assert self._fn is not None
        if line is None:
            line = (self.source, self._line)
            self._line += 3
        self._fn["blocks"].append({"id": bid, "lines": [list(line)]})
        if crash:
            self.crash.append(bid)
        return bid

    def edge(self, a: str, b: str, kind: str | None = None, offset: int = 0, value=None, default: bool = False) -> None:
        assert self._fn is not None
        self._fn["edges"].append([a, b])
        if kind is not None:
            self.predicates.append({"from": a, "to": b, "kind": kind, "offset": offset, "value": value})
        if default:
            self.defaults.append([a, b])

    def call(self, site: str, callee: str) -> None:
        assert self._fn is not None
        self._fn["calls"].append({"block": site, "callees": [callee]})

    def doc(self) -> dict:
        return {
            "entry_function": self.entry_function,
            "functions": self.functions,
            "predicates": self.predicates,
            "default_edges": self.defaults,
            "crash_blocks": self.crash,
            "max_steps": 4096,
        }


def noise(b: Builder, name: str, cases: int, subcases: int, offset: int) -> None:
    """A header parser: a byte switch whose arms switch on the next byte.

    It gives the fuzzer plenty of edge coverage that has nothing to do with
    any target.
    """
    b.function(name)
    head = b.block(f"{name}0")
    done = b.block(f"{name}_end")
    b.edge(head, done, default=True)
    for i in range(cases):
        arm = b.block(f"{name}_c{i}")
        b.edge(head, arm, "byte_eq", offset, 0x30 + 7 * i)
        sub_default = b.block(f"{name}_c{i}x")
        b.edge(arm, sub_default, default=True)
        for j in range(subcases):
            leaf = b.block(f"{name}_c{i}_{j}")
            b.edge(arm, leaf, "byte_eq", offset + 1, 0x61 + 5 * j + i % 5)


def fig1(magic: str = "LF") -> dict:
    """A two-target slice: m sits behind a magic-byte gate, p behind single bytes."""
    b = Builder("main", "objdump.c")
    noise(b, "hdr", cases=12, subcases=5, offset=8)

    b.function("display_object_bfd")
    a = b.block("a", ("objdump.c", 3682))
    bb = b.block("b", ("format.c", 234))
    c = b.block("c", ("objdump.c", 3688))
    d = b.block("d", ("format.c", 240))
    e = b.block("e", ("objdump.c", 3695))
    f = b.block("f", ("format.c", 250))
    g = b.block("g", ("format.c", 255))
    h = b.block("h", ("objdump.c", 3700))
    i = b.block("i", ("objdump.c", 2490))
    j = b.block("j", ("format.c", 262))
    k = b.block("k", ("format.c", 270))
    l_ = b.block("l", ("objdump.c", 2495))
    m = b.block("m", ("objdump.c", 2508), crash=True)
    n = b.block("n", ("objdump.c", 2497))
    o = b.block("o", ("format.c", 275))
    p = b.block("p", ("libbfd.c", 271), crash=True)
    q = b.block("q", ("objdump.c", 2503))
    b.edge(a, bb, "byte_eq", 0, "B")
    b.edge(a, c, default=True)
    b.edge(c, e, "byte_eq", 1, "E")
    b.edge(e, i, "byte_eq", 2, "I")
    b.edge(e, h, default=True)
    b.edge(i, q, "magic_bytes", 4, magic)
    b.edge(i, l_, default=True)
    b.edge(q, m, "byte_eq", 3, "M")
    b.edge(l_, n)
    b.edge(bb, d, "byte_eq", 1, "D")
    b.edge(d, k, "byte_eq", 2, "K")
    b.edge(d, f, default=True)
    b.edge(f, g)
    b.edge(g, j)
    b.edge(j, k, "byte_eq", 3, "J")
    b.edge(k, p, "byte_eq", 3, "P")
    b.edge(k, o, default=True)

    b.function("main")
    m1 = b.block("main1", ("main.c", 10))
    m2 = b.block("main2", ("main.c", 12))
    b.edge(m1, m2)
    b.call(m1, "hdr")
    b.call(m2, "display_object_bfd")
    doc = b.doc()
    # keep main first for readability
    doc["functions"] = doc["functions"][-1:] + doc["functions"][:-1]
    return doc


def multi10() -> dict:
    """Ten planted crash sites spread over five object handlers.

    Each handler owns a shallow target and a deeper one behind a two-byte
    magic value, so handler pairs share most of their target sequences.
    """
    b = Builder("main", "decode_r2007.c")
    noise(b, "hdr", cases=12, subcases=5, offset=10)
    letters = "ACEGT"
    check1 = [0x31, 0x4B, 0x72, 0x0A, 0x55]
    check2 = [0x42, 0x88, 0x21, 0x5A, 0x13]
    shallow = [0x53, 0x39, 0x7E, 0x44, 0x03]
    deep_tag = [0x64, 0x4D, 0x2F, 0x91, 0x48]
    magics = ["DW", "G7", "R2", "XQ", "0K"]
    last = [0x51, 0x08, 0x6C, 0x49, 0x33]
    for h in range(5):
        fn = f"dwg_obj{h}"
        b.function(fn)
        e = b.block(f"o{h}_entry")
        s1 = b.block(f"o{h}_s1")
        s2 = b.block(f"o{h}_s2")
        s3 = b.block(f"o{h}_s3")
        t_a = b.block(f"o{h}_bug_a", crash=True)
        s4 = b.block(f"o{h}_s4")
        s5 = b.block(f"o{h}_s5")
        t_b = b.block(f"o{h}_bug_b", crash=True)
        out = b.block(f"o{h}_out")
        b.edge(e, s1, "byte_eq", 1, check1[h])
        b.edge(e, out, default=True)
        b.edge(s1, s2, "byte_eq", 2, check2[h])
        b.edge(s2, s3)
        b.edge(s3, t_a, "byte_eq", 3, shallow[h])
        b.edge(s3, s4, "byte_eq", 3, deep_tag[h])
        b.edge(s3, out, default=True)
        b.edge(s4, s5, "magic_bytes", 4, magics[h])
        b.edge(s5, t_b, "byte_eq", 6, last[h])

    b.function("main")
    m1 = b.block("main1", ("decode.c", 10))
    disp = b.block("main2", ("decode.c", 12))
    end = b.block("main_end", ("decode.c", 40))
    b.call(m1, "hdr")
    b.edge(m1, disp)
    b.edge(disp, end, default=True)
    for h, letter in enumerate(letters):
        site = b.block(f"main_obj{h}", ("decode.c", 20 + h))
        b.edge(disp, site, "byte_eq", 0, letter)
        b.call(site, f"dwg_obj{h}")
    doc = b.doc()
    doc["functions"] = doc["functions"][-1:] + doc["functions"][:-1]
    return doc


def p0() -> dict:
    return {
        "entry_function": "main",
        "functions": [
            {
                "name": "main",
                "entry_block": "n0",
                "blocks": [
                    {"id": f"n{i}", "lines": [["p0.c", 10 + 2 * i]]} for i in range(7)
                ],
                "edges": [["n0", "n1"], ["n0", "n2"], ["n1", "n3"], ["n2", "n4"], ["n2", "n5"], ["n4", "n6"]],
            }
        ],
        "predicates": [
            {"from": "n0", "to": "n1", "kind": "byte_eq", "offset": 0, "value": "A"},
            {"from": "n2", "to": "n4", "kind": "magic_bytes", "offset": 1, "value": "XYZ"},
            {"from": "n4", "to": "n6", "kind": "byte_eq", "offset": 4, "value": "!"},
        ],
        "default_edges": [["n0", "n2"], ["n2", "n5"]],
        "crash_blocks": ["n3", "n6"],
        "max_steps": 64,
    }


def fig3() -> dict:
    """Call graph main->{A,B}, A->{C,D}, {C,D}->G, B->E plus G's CFG."""
    def fn(name, blocks, edges=(), calls=(), line0=10):
        return {
            "name": name,
            "entry_block": blocks[0],
            "blocks": [{"id": x, "lines": [["fig3.c", line0 + 2 * k]]} for k, x in enumerate(blocks)],
            "edges": [list(e) for e in edges],
            "calls": [{"block": s, "callees": list(cs)} for s, cs in calls],
        }

    return {
        "entry_function": "main",
        "functions": [
            fn("main", ["main1", "main2", "main3"], [("main1", "main2"), ("main1", "main3")],
               [("main2", ["A"]), ("main3", ["B"])], 10),
            fn("A", ["A1", "A2", "A3"], [("A1", "A2"), ("A1", "A3")], [("A2", ["C"]), ("A3", ["D"])], 20),
            fn("B", ["B1"], (), [("B1", ["E"])], 30),
            fn("C", ["C1"], (), [("C1", ["G"])], 34),
            fn("D", ["D1"], (), [("D1", ["G"])], 38),
            fn("E", ["E1"], (), (), 42),
            fn("G", ["entry", "a", "b", "c", "d", "e", "f", "g"],
               [("entry", "a"), ("a", "b"), ("a", "c"), ("b", "f"), ("c", "d"), ("d", "f"),
                ("f", "e"), ("f", "g"), ("e", "g")], (), 50),
        ],
    }


def write(name: str, doc: dict) -> None:
    (OUT / name).write_text(json.dumps(doc, indent=1) + "\n")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    write("p0.json", p0())
    write("fig3.json", fig3())
    write("fig1.json", fig1())
    write("fig1_magic4.json", fig1("LFRZ"))
    write("multi10.json", multi10())
    (OUT / "p0.targets").write_text("# crash sites planted in p0\np0.c:16\np0.c:22\n")
    (OUT / "fig3.targets").write_text("fig3.c:64\n")
    (OUT / "fig1.targets").write_text(
        "# m: deep, magic-gated; p: shallow\nobjdump.c:2508\nlibbfd.c:271\n"
    )
    (OUT / "fig1_magic4.targets").write_text((OUT / "fig1.targets").read_text())
    lines = ["# ten planted crash sites"]
    doc = multi10()
    for f in doc["functions"]:
        for blk in f["blocks"]:
            if blk["id"] in doc["crash_blocks"]:
                file, line = blk["lines"][0]
                lines.append(f"{file}:{line}")
    (OUT / "multi10.targets").write_text("\n".join(lines) + "\n")
    for name, seed in (("p0", b"QQQQ"), ("fig1", b"\x00" * 16), ("fig1_magic4", b"\x00" * 16), ("multi10", b"\x00" * 16)):
        d = OUT / "seeds" / name
        d.mkdir(parents=True, exist_ok=True)
        (d / "seed-000").write_bytes(seed)


if __name__ == "__main__":
    main()
