"""Instance files and generators.

Text format::

    # comments start with '#', blank lines are ignored
    m n k p          (p is a decimal >= 1 or 'inf')
    x y              (m lines of A)
    x y              (n lines of B)

A document whose first non-blank character is ``{`` is read as JSON with
keys ``A``, ``B``, ``k``, ``p`` and an optional ``name``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError


class InstanceFormatError(GeometryError):
    """Malformed instance text; ``line`` is 1-based (0 when not line-specific)."""

    def __init__(self, kind: str, line: int, detail: str):
        self.kind = kind
        self.line = line
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{kind}: {detail}")


@dataclass(frozen=True)
class InstanceFile:
    A: tuple
    B: tuple
    k: int
    p: float
    name: str | None = None

    @property
    def m(self) -> int:
        return len(self.A)

    @property
    def n(self) -> int:
        return len(self.B)

    def arrays(self):
        return (np.array(self.A, dtype=float).reshape(-1, 2),
                np.array(self.B, dtype=float).reshape(-1, 2))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_p(p: float) -> str:
    return "inf" if math.isinf(p) else _fmt(p)


def _number(tok: str, line: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise InstanceFormatError("non-numeric token", line, f"{what} {tok!r}") from None
    if not math.isfinite(v):
        raise InstanceFormatError("non-numeric token", line, f"{what} must be finite, got {tok!r}")
    return v


def _exponent(tok: str, line: int) -> float:
    if tok.lower() in ("inf", "infinity"):
        return math.inf
    try:
        p = float(tok)
    except ValueError:
        raise InstanceFormatError("malformed header", line, f"p must be a number or inf, got {tok!r}") from None
    if math.isnan(p) or p < 1:
        raise InstanceFormatError("malformed header", line, f"p must be >= 1, got {tok!r}")
    return p


def _check_k(k, m, n, line):
    if not 1 <= k <= min(m, n):
        raise InstanceFormatError("k out of range", line, f"need 1 <= k <= min(m, n) = {min(m, n)}, got {k}")


def parse_instance(text: str) -> InstanceFile:
    if text.lstrip().startswith("{"):
        return _parse_json(text)
    rows = []
    for no, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((no, body.split()))
    if not rows:
        raise InstanceFormatError("malformed header", 1, "empty instance")
    hline, head = rows[0]
    if len(head) != 4:
        raise InstanceFormatError("malformed header", hline, f"expected 'm n k p', got {len(head)} tokens")
    counts = []
    for tok, what in zip(head[:3], "mnk"):
        try:
            counts.append(int(tok))
        except ValueError:
            raise InstanceFormatError("malformed header", hline, f"{what} must be an integer, got {tok!r}") from None
    m, n, k = counts
    if m < 1 or n < 1:
        raise InstanceFormatError("malformed header", hline, "m and n must be >= 1")
    p = _exponent(head[3], hline)
    _check_k(k, m, n, hline)
    pts = []
    for no, toks in rows[1:]:
        if len(toks) != 2:
            raise InstanceFormatError("malformed point", no, f"expected 'x y', got {len(toks)} tokens")
        pts.append((_number(toks[0], no, "x"), _number(toks[1], no, "y")))
    if len(pts) != m + n:
        last = rows[-1][0]
        raise InstanceFormatError("count mismatch", last, f"header promises {m + n} points, found {len(pts)}")
    return InstanceFile(tuple(pts[:m]), tuple(pts[m:]), k, p)


def _parse_json(text: str) -> InstanceFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError("malformed JSON", exc.lineno, exc.msg) from None
    if not isinstance(doc, dict) or not {"A", "B", "k", "p"} <= doc.keys():
        raise InstanceFormatError("malformed header", 1, "JSON instance needs keys A, B, k, p")
    try:
        A = tuple((_number(str(x), 0, "x"), _number(str(y), 0, "y")) for x, y in doc["A"])
        B = tuple((_number(str(x), 0, "x"), _number(str(y), 0, "y")) for x, y in doc["B"])
    except (TypeError, ValueError):
        raise InstanceFormatError("malformed point", 0, "points must be [x, y] pairs") from None
    if not A or not B:
        raise InstanceFormatError("count mismatch", 0, "A and B must be nonempty")
    k = doc["k"]
    if not isinstance(k, int) or isinstance(k, bool):
        raise InstanceFormatError("malformed header", 0, f"k must be an integer, got {k!r}")
    p = _exponent(str(doc["p"]), 0)
    _check_k(k, len(A), len(B), 0)
    name = doc.get("name")
    return InstanceFile(A, B, k, p, str(name) if name is not None else None)


def write_instance(inst: InstanceFile) -> str:
    lines = []
    if inst.name:
        lines.append(f"# {inst.name}")
    lines.append(f"{inst.m} {inst.n} {inst.k} {format_p(inst.p)}")
    lines += [f"{_fmt(x)} {_fmt(y)}" for x, y in inst.A + inst.B]
    return "\n".join(lines) + "\n"


def read_instance(path) -> InstanceFile:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def gen_random_instance(m: int, n: int, k: int, p, box_side: float = 1.0, seed: int = 0) -> InstanceFile:
    """Uniform points in [0, box_side]^2 from a seeded PCG64 stream."""
    if m < 1 or n < 1 or not 1 <= k <= min(m, n):
        raise GeometryError(f"invalid sizes m={m}, n={n}, k={k}")
    if not (box_side > 0 and math.isfinite(box_side)):
        raise GeometryError("box side must be positive")
    gen = np.random.Generator(np.random.PCG64(seed))
    A = gen.uniform(0.0, box_side, size=(m, 2))
    B = gen.uniform(0.0, box_side, size=(n, 2))
    return InstanceFile(tuple(map(tuple, A.tolist())), tuple(map(tuple, B.tolist())),
                        int(k), _exponent(str(p), 0), f"random m={m} n={n} seed={seed}")


def gen_grid_instance(m_side: int, n_side: int, k: int, p) -> InstanceFile:
    """A = m_side x m_side unit grid, B = n_side x n_side unit grid."""
    if m_side < 1 or n_side < m_side:
        raise GeometryError("need 1 <= m_side <= n_side")
    if not 1 <= k <= m_side * m_side:
        raise GeometryError(f"k must lie in 1..{m_side * m_side}")
    grid = lambda s: tuple((float(x), float(y)) for x in range(s) for y in range(s))
    return InstanceFile(grid(m_side), grid(n_side), int(k), _exponent(str(p), 0),
                        f"grid {m_side}x{m_side} vs {n_side}x{n_side}")
