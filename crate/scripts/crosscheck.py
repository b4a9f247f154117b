#!/usr/bin/env python3
"""Solve a CPLEX-LP file with scipy's HiGHS MILP and print the objective.

    crosscheck.py model.lp [expected [rel_tol]]

With an expected value the exit code is 0 on a match, 1 on a mismatch and
2 when the solver does not report an optimum.
"""

import re
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

SECTIONS = {
    "maximize": "max", "maximum": "max", "max": "max",
    "minimize": "min", "minimum": "min", "min": "min",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "gen": "gen",
    "end": "end",
}

NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$|^[+-]?inf(inity)?$", re.I)


def number(tok):
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return np.inf
    if t in ("-inf", "-infinity"):
        return -np.inf
    return float(tok)


def tokens(text):
    return re.findall(r"<=|>=|=<|=>|[<>=]|[+-]|[^\s+\-<>=]+", text)


def terms(toks):
    """Linear terms and constant from a token list."""
    out, const, sign, coef = [], 0.0, 1.0, None
    for t in toks:
        if t in ("+", "-"):
            if coef is not None:
                const += sign * coef
                sign, coef = 1.0, None
            if t == "-":
                sign = -sign
        elif NUMBER.match(t):
            coef = number(t) if coef is None else coef * number(t)
        else:
            out.append((t, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
    if coef is not None:
        const += sign * coef
    return out, const


class Model:
    def __init__(self):
        self.sense = "min"
        self.names = {}
        self.obj = {}
        self.obj_const = 0.0
        self.rows = []
        self.lo = {}
        self.hi = {}
        self.integer = set()

    def var(self, name):
        if name not in self.names:
            self.names[name] = len(self.names)
        return self.names[name]


def statements(lines):
    """Joins continuation lines: a statement ends where the next one starts."""
    buf = []
    for line in lines:
        if buf and re.match(r"^\s*[A-Za-z_][\w.\[\]]*\s*:", line):
            yield " ".join(buf)
            buf = []
        buf.append(line.strip())
    if buf:
        yield " ".join(buf)


def parse(text):
    m = Model()
    section, chunks = None, {}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if key in SECTIONS:
            section = SECTIONS[key]
            if section in ("max", "min"):
                m.sense = section
                section = "obj"
            chunks.setdefault(section, [])
            continue
        chunks.setdefault(section, []).append(line)

    obj = " ".join(l.strip() for l in chunks.get("obj", []))
    obj = re.sub(r"^[A-Za-z_][\w.]*\s*:", "", obj)
    lin, const = terms(tokens(obj))
    for name, c in lin:
        m.obj[m.var(name)] = m.obj.get(m.var(name), 0.0) + c
    m.obj_const = const

    for stmt in statements(chunks.get("st", [])):
        stmt = re.sub(r"^[A-Za-z_][\w.\[\]]*\s*:", "", stmt)
        toks = tokens(stmt)
        k = next(i for i, t in enumerate(toks) if t in ("<=", ">=", "=", "<", ">", "=<", "=>"))
        lin, const = terms(toks[:k])
        rhs = sum(s * number(t) for s, t in signed(toks[k + 1:])) - const
        op = {"<": "<=", "=<": "<=", ">": ">=", "=>": ">="}.get(toks[k], toks[k])
        row = {}
        for name, c in lin:
            j = m.var(name)
            row[j] = row.get(j, 0.0) + c
        m.rows.append((row, op, rhs))

    for line in chunks.get("bounds", []):
        toks = tokens(line.strip())
        if len(toks) == 2 and toks[1].lower() == "free":
            j = m.var(toks[0])
            m.lo[j], m.hi[j] = -np.inf, np.inf
            continue
        vals = fold_signs(toks)
        if len(vals) == 5:
            lo, _, name, _, hi = vals
            j = m.var(name)
            m.lo[j], m.hi[j] = number(lo), number(hi)
        elif len(vals) == 3:
            a, op, b = vals
            if NUMBER.match(a):
                a, b, op = b, a, {"<=": ">=", ">=": "<=", "=": "="}[op]
            j = m.var(a)
            if op in ("<=", "=<", "<"):
                m.hi[j] = number(b)
            elif op in (">=", "=>", ">"):
                m.lo[j] = number(b)
            else:
                m.lo[j] = m.hi[j] = number(b)
        else:
            raise ValueError(f"cannot read bound: {line}")

    for sec in ("bin", "gen"):
        for line in chunks.get(sec, []):
            for name in line.split():
                j = m.var(name)
                m.integer.add(j)
                if sec == "bin":
                    m.lo.setdefault(j, 0.0)
                    m.hi.setdefault(j, 1.0)
    return m


def signed(toks):
    sign = 1.0
    for t in toks:
        if t == "-":
            sign = -sign
        elif t == "+":
            continue
        else:
            yield sign, t
            sign = 1.0


def fold_signs(toks):
    out, pending = [], ""
    for t in toks:
        if t in ("+", "-"):
            pending = "-" if (pending == "-") != (t == "-") else ""
            continue
        out.append(pending + t if NUMBER.match(pending + t) else t)
        pending = ""
    return out


def solve(m):
    n = len(m.names)
    c = np.zeros(n)
    for j, v in m.obj.items():
        c[j] = v
    if m.sense == "max":
        c = -c
    lo = np.array([m.lo.get(j, 0.0) for j in range(n)])
    hi = np.array([m.hi.get(j, np.inf) for j in range(n)])
    rows, cols, vals, rlo, rhi = [], [], [], [], []
    for i, (row, op, rhs) in enumerate(m.rows):
        for j, v in row.items():
            rows.append(i)
            cols.append(j)
            vals.append(v)
        rlo.append(rhs if op in (">=", "=") else -np.inf)
        rhi.append(rhs if op in ("<=", "=") else np.inf)
    integrality = np.array([1 if j in m.integer else 0 for j in range(n)])
    cons = []
    if m.rows:
        a = coo_matrix((vals, (rows, cols)), shape=(len(m.rows), n)).tocsr()
        cons.append(LinearConstraint(a, rlo, rhi))
    res = milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lo, hi),
               options={"mip_rel_gap": 1e-9, "disp": False})
    if res.status != 0:
        return None, res.message
    obj = float(res.fun)
    if m.sense == "max":
        obj = -obj
    return obj + m.obj_const, res.message


def main(argv):
    if len(argv) < 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    with open(argv[1]) as f:
        model = parse(f.read())
    obj, message = solve(model)
    if obj is None:
        print(f"no optimum: {message}")
        return 2
    print(f"objective {obj:.9f}")
    if len(argv) >= 3:
        expected = float(argv[2])
        tol = float(argv[3]) if len(argv) >= 4 else 1e-6
        if abs(obj - expected) > tol * max(abs(obj), abs(expected), 1.0):
            print(f"mismatch: expected {expected:.9f}")
            return 1
        print("match")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
