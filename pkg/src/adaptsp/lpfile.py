"""Read and write models in the CPLEX LP text layout.

The writer emits coefficients with ``repr`` (shortest round-trip decimal), one
bound line per variable in index order, and wraps long expressions at term
boundaries.  See ``docs/lp_format.md`` for the exact grammar produced.
"""
from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from .errors import MalformedModel
from .model import EQ, GE, LE, ModelBuilder, ModelInstance

_WRAP = 200
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_\[\]().,#]*$")


def _num(v: float) -> str:
    if v == math.inf:
        return "+inf"
    if v == -math.inf:
        return "-inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _expr(terms, names, constant=0.0) -> list[str]:
    parts = []
    for j, v in terms:
        parts.append(f"{'-' if v < 0 else '+'} {_num(abs(v))} {names[j]}")
    if constant:
        parts.append(f"{'-' if constant < 0 else '+'} {_num(abs(constant))}")
    if not parts:
        parts.append(f"0 {names[0]}" if names else "0")
    lines, cur = [], ""
    for p in parts:
        if cur and len(cur) + len(p) + 1 > _WRAP:
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return lines


def dumps(model: ModelInstance) -> str:
    names = model.var_names
    for v in names:
        if not _NAME_RE.match(v):
            raise MalformedModel(f"variable name {v!r} is not LP-file safe")
    out = [f"\\ model: {model.name}", "Minimize"]
    obj = [(j, model.c[j]) for j in np.flatnonzero(model.c)]
    body = _expr(obj, names, model.obj_constant)
    out.append(" obj: " + body[0])
    out.extend(body[1:])
    out.append("Subject To")
    A = model.A.tocsr()
    sense_txt = {LE: "<=", GE: ">=", EQ: "="}
    for i in range(model.n_cons):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        body = _expr(zip(A.indices[lo:hi], A.data[lo:hi]), names)
        body[-1] += f" {sense_txt[model.senses[i]]} {_num(model.rhs[i])}"
        out.append(f" {model.con_names[i]}: " + body[0])
        out.extend(body[1:])
    out.append("Bounds")
    for j, v in enumerate(names):
        lb, ub = model.lb[j], model.ub[j]
        if lb == -math.inf and ub == math.inf:
            out.append(f" {v} free")
        elif lb == ub:
            out.append(f" {v} = {_num(lb)}")
        elif ub == math.inf:
            out.append(f" {v} >= {_num(lb)}")
        else:
            out.append(f" {_num(lb)} <= {v} <= {_num(ub)}")
    ints = [names[j] for j in np.flatnonzero(model.integer)]
    if ints:
        out.append("Generals")
        for k in range(0, len(ints), 10):
            out.append(" " + " ".join(ints[k:k + 10]))
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(model: ModelInstance, path) -> None:
    Path(path).write_text(dumps(model))


_SECTIONS = {
    "minimize": "min", "minimise": "min", "minimum": "min", "min": "min",
    "maximize": "max", "maximise": "max", "maximum": "max", "max": "max",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "general": "gen", "generals": "gen", "gen": "gen",
    "binary": "bin", "binaries": "bin", "bin": "bin",
    "end": "end",
}
_TOKEN = re.compile(
    r"\s*(?:(?P<op><=|>=|=<|=>|<|>|=)|(?P<num>[+-]?inf(?:inity)?\b|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<sign>[+-])|(?P<colon>:)|(?P<name>[A-Za-z_][A-Za-z0-9_\[\]().,#]*))",
    re.IGNORECASE,
)
_OPS = {"<=": LE, "=<": LE, "<": LE, ">=": GE, "=>": GE, ">": GE, "=": EQ}


def _tokens(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise MalformedModel(f"cannot parse LP text near {text[pos:pos + 30]!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


def _parse_num(s):
    s = s.lower()
    if s.lstrip("+-").startswith("inf"):
        return -math.inf if s.startswith("-") else math.inf
    return float(s)


def _linear(toks, k):
    """Parse terms from toks[k]; stop at an operator, a 'name :' label or the end."""
    terms, const = [], 0.0
    while k < len(toks):
        kind, val = toks[k]
        if kind == "op":
            break
        if kind == "name" and k + 1 < len(toks) and toks[k + 1][0] == "colon":
            break
        sign, coef = 1.0, None
        while k < len(toks) and toks[k][0] == "sign":
            if toks[k][1] == "-":
                sign = -sign
            k += 1
        if k < len(toks) and toks[k][0] == "num":
            coef = _parse_num(toks[k][1])
            k += 1
        if k < len(toks) and toks[k][0] == "name" and not (k + 1 < len(toks) and toks[k + 1][0] == "colon"):
            terms.append((toks[k][1], sign * (1.0 if coef is None else coef)))
            k += 1
        elif coef is not None:
            const += sign * coef
        else:
            raise MalformedModel(f"dangling sign in LP expression at token {toks[k] if k < len(toks) else 'end'}")
    return terms, const, k


def loads(text: str, name: str = "model") -> ModelInstance:
    sections: dict[str, list[str]] = {}
    order: list[str] = []
    cur = None
    for raw in text.splitlines():
        if raw.lstrip().startswith("\\"):
            m = re.match(r"\\\s*model:\s*(\S+)", raw.strip())
            if m:
                name = m.group(1)
            continue
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = _SECTIONS.get(line.lower())
        if key:
            cur = key
            order.append(key)
            sections.setdefault(key, [])
            continue
        if cur is None:
            raise MalformedModel(f"text before first section: {line!r}")
        sections[cur].append(line)
    if "max" in sections and "min" in sections:
        raise MalformedModel("both Minimize and Maximize sections")
    sense = "max" if "max" in sections else "min"

    var_order: list[str] = []
    seen: dict[str, int] = {}

    def idx(v):
        if v not in seen:
            seen[v] = len(var_order)
            var_order.append(v)
        return seen[v]

    # bounds first so an explicit bounds listing fixes variable order
    bounds: dict[str, list[float]] = {}
    for line in sections.get("bounds", []):
        toks = _tokens(line)
        if len(toks) == 2 and toks[0][0] == "name" and toks[1] == ("name", "free") or \
                len(toks) == 2 and toks[0][0] == "name" and toks[1][1].lower() == "free":
            idx(toks[0][1])
            bounds[toks[0][1]] = [-math.inf, math.inf]
            continue
        vals = [(k, _parse_num(v) if k == "num" else v) for k, v in _merge_signs(toks)]
        if len(vals) == 5 and vals[2][0] == "name":
            v = vals[2][1]
            idx(v)
            bounds[v] = [vals[0][1], vals[4][1]]
        elif len(vals) == 3 and vals[0][0] == "name":
            v, op, num = vals[0][1], _OPS[vals[1][1]], vals[2][1]
            idx(v)
            b = bounds.setdefault(v, [0.0, math.inf])
            if op == GE:
                b[0] = num
            elif op == LE:
                b[1] = num
            else:
                b[0] = b[1] = num
        elif len(vals) == 3 and vals[2][0] == "name":
            num, op, v = vals[0][1], _OPS[vals[1][1]], vals[2][1]
            idx(v)
            b = bounds.setdefault(v, [0.0, math.inf])
            if op == LE:
                b[0] = num
            elif op == GE:
                b[1] = num
            else:
                b[0] = b[1] = num
        else:
            raise MalformedModel(f"cannot parse bound line {line!r}")

    obj_toks = _tokens(" ".join(sections.get(sense, [])))
    k = 0
    if len(obj_toks) >= 2 and obj_toks[0][0] == "name" and obj_toks[1][0] == "colon":
        k = 2
    obj_terms, obj_const, k = _linear(obj_toks, k)
    if k != len(obj_toks):
        raise MalformedModel("trailing tokens in objective")
    for v, _ in obj_terms:
        idx(v)

    cons = []
    st = _tokens(" ".join(sections.get("st", [])))
    k = 0
    while k < len(st):
        cname = None
        if st[k][0] == "name" and k + 1 < len(st) and st[k + 1][0] == "colon":
            cname = st[k][1]
            k += 2
        terms, const, k = _linear(st, k)
        if k >= len(st) or st[k][0] != "op":
            raise MalformedModel(f"constraint {cname} lacks a sense")
        op = _OPS[st[k][1]]
        k += 1
        sign = 1.0
        while k < len(st) and st[k][0] == "sign":
            sign = -sign if st[k][1] == "-" else sign
            k += 1
        if k >= len(st) or st[k][0] != "num":
            raise MalformedModel(f"constraint {cname} lacks a right-hand side")
        rhs = sign * _parse_num(st[k][1]) - const
        k += 1
        for v, _ in terms:
            idx(v)
        cons.append((cname, terms, op, rhs))

    ints = set()
    for line in sections.get("gen", []):
        for v in line.split():
            idx(v)
            ints.add(v)
    bins = set()
    for line in sections.get("bin", []):
        for v in line.split():
            idx(v)
            bins.add(v)

    b = ModelBuilder(name)
    for v in var_order:
        lo, hi = bounds.get(v, [0.0, math.inf])
        if v in bins:
            lo, hi = (lo, hi) if v in bounds else (0.0, 1.0)
        b.add_var(v, lo, hi, integer=v in ints or v in bins)
    flip = -1.0 if sense == "max" else 1.0
    for v, coef in obj_terms:
        b.add_obj(seen[v], flip * coef)
    b.obj_constant = flip * obj_const
    for i, (cname, terms, op, rhs) in enumerate(cons):
        row: dict[int, float] = {}
        for v, coef in terms:
            row[seen[v]] = row.get(seen[v], 0.0) + coef
        b.add_constr(row, op, rhs, cname or f"c{i}")
    if sense == "max":
        b.meta["sense"] = "max"
    return b.build()


def _merge_signs(toks):
    out, sign = [], None
    for kind, v in toks:
        if kind == "sign":
            sign = v
            continue
        if kind == "num" and sign == "-":
            v = "-" + v.lstrip("+")
        out.append((kind, v))
        sign = None
    return out


def read_lp(path) -> ModelInstance:
    return loads(Path(path).read_text(), name=Path(path).stem)
