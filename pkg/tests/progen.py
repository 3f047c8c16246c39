"""Random program generator and an independent brute-force reference.

The reference works on the raw JSON dictionaries, numbers locations with its
own walk and signals exceptions by return value rather than by raising, so it
shares no execution machinery with the package under test.
"""

from __future__ import annotations

import random
from collections import Counter

EXCEPTIONS = ["IOException", "ParseException", "TimeoutException"]
TOKENS = ["a", "b", "c", "d", "e"]


# --------------------------------------------------------------------------
# generation


def _gen_block(rng: random.Random, budget: int, me: int, n_methods: int) -> tuple[list, int]:
    """A block using at most ``budget`` statement nodes (at least one)."""
    out, used = [], 0
    while used < budget:
        stmt, n = _gen_stmt(rng, budget - used, me, n_methods)
        out.append(stmt)
        used += n
        if rng.random() < 0.35:
            break
    return out, used


def _gen_stmt(rng: random.Random, budget: int, me: int, n_methods: int) -> tuple[dict, int]:
    kinds = ["emit"] * 3 + ["throw"]
    if me + 1 < n_methods:
        kinds += ["call"] * 6
    if budget >= 2:
        kinds += ["try"] * 3 + ["loop"] * 2
    if rng.random() < 0.04:
        kinds = ["hang"]
    kind = rng.choice(kinds)
    if kind == "emit":
        return {"emit": rng.choice(TOKENS)}, 1
    if kind == "call":
        return {"call": f"m{rng.randrange(me + 1, n_methods)}"}, 1
    if kind == "throw":
        return {"throw": rng.choice(EXCEPTIONS)}, 1
    if kind == "hang":
        return {"hang": True}, 1
    if kind == "loop":
        body, n = _gen_block(rng, budget - 1, me, n_methods)
        return {"loop": rng.randint(1, 3), "body": body}, n + 1
    body, n = _gen_block(rng, budget - 1, me, n_methods)
    used = n + 1
    clauses = []
    for _ in range(rng.randint(1, 2)):
        types = ["*"] if rng.random() < 0.25 else rng.sample(EXCEPTIONS, rng.randint(1, 2))
        hbody = []
        if used < budget and rng.random() < 0.6:
            hbody, hn = _gen_block(rng, budget - used, me, n_methods)
            used += hn
        clauses.append({"types": types, "body": hbody})
    return {"try": body, "catch": clauses}, used


def gen_program_dict(rng: random.Random, max_methods: int = 6, max_stmts: int = 4, max_declared: int = 2) -> dict:
    n = rng.randint(1, max_methods)
    methods = {}
    for i in range(n):
        body, _ = _gen_block(rng, rng.randint(1, max_stmts), i, n)
        methods[f"m{i}"] = {"throws": sorted(rng.sample(EXCEPTIONS, rng.randint(0, max_declared))), "body": body}
    return {"format_version": 1, "entry": "m0", "methods": methods}


def gen_workload_dict(rng: random.Random, program: dict) -> dict:
    if rng.random() < 0.7:
        return {"format_version": 1, "invocations": [{"method": "m0", "repeat": rng.randint(1, 2)}]}
    names = sorted(program["methods"])
    return {
        "format_version": 1,
        "invocations": [{"method": rng.choice(names), "repeat": rng.randint(1, 2)} for _ in range(rng.randint(1, 3))],
    }


def count_nodes(block: list) -> int:
    total = 0
    for s in block:
        total += 1
        if "loop" in s:
            total += count_nodes(s["body"])
        elif "try" in s:
            total += count_nodes(s["try"])
            for c in s.get("catch", []):
                total += count_nodes(c["body"])
    return total


# --------------------------------------------------------------------------
# reference interpreter


class _Frozen(Exception):
    pass


class _Exc:
    __slots__ = ("kind", "depth", "tag")

    def __init__(self, kind, depth, tag=None):
        self.kind, self.depth, self.tag = kind, depth, tag


def _number(block: list, start: int, table: dict) -> int:
    """Assign pre-order ordinals by object identity; returns the next free ordinal."""
    for s in block:
        table[id(s)] = start
        start += 1
        if "loop" in s:
            start = _number(s["body"], start, table)
        elif "try" in s:
            start = _number(s["try"], start, table)
            for c in s.get("catch", []):
                start = _number(c["body"], start, table)
    return start


class RefRun:
    """One execution. ``point`` is (method, loc, exc) or None; ``always`` selects the fault model."""

    def __init__(self, prog: dict, point=None, always=False, fo=None, budget=2000, instrument=True):
        self.prog = prog
        self.point = point
        self.always = always
        self.fo = fo
        self.budget = budget
        self.instrument = instrument
        self.loc = {}
        for body in prog["methods"].values():
            _number(body["body"], 0, self.loc)
        self.steps = 0
        self.trace = []
        self.stack = []
        self.reach = Counter()
        self.injections = 0
        self.first_stack = None
        self.first_catch_distance = None  # None: not caught (or never injected)

    def call(self, name):
        self.stack.append(name)
        r = self.block(self.prog["methods"][name]["body"], name)
        if r is not None and self.instrument and name == self.fo:
            if r.tag == "first":
                self.first_catch_distance = r.depth - (len(self.stack) - 1)
            r = None
        self.stack.pop()
        return r

    def block(self, stmts, me):
        for s in stmts:
            r = self.stmt(s, me)
            if r is not None:
                return r
        return None

    def stmt(self, s, me):
        self.steps += 1
        if self.steps >= self.budget:
            raise _Frozen
        if self.instrument:
            loc = self.loc[id(s)]
            self.reach[(me, loc)] += 1
            p = self.point
            if p is not None and p[0] == me and p[1] == loc and (self.always or self.reach[(me, loc)] == 1):
                self.injections += 1
                tag = None
                if self.first_stack is None:
                    self.first_stack = list(reversed(self.stack))
                    tag = "first"
                return _Exc(p[2], len(self.stack) - 1, tag)
        if "emit" in s:
            self.trace.append(s["emit"])
            return None
        if "call" in s:
            return self.call(s["call"])
        if "throw" in s:
            return _Exc(s["throw"], len(self.stack) - 1)
        if "hang" in s:
            raise _Frozen
        if "loop" in s:
            for _ in range(s["loop"]):
                r = self.block(s["body"], me)
                if r is not None:
                    return r
            return None
        r = self.block(s["try"], me)
        if r is None:
            return None
        for c in s.get("catch", []):
            if "*" in c["types"] or r.kind in c["types"]:
                if r.tag == "first":
                    self.first_catch_distance = r.depth - (len(self.stack) - 1)
                return self.block(c["body"], me)
        return r

    def run(self, workload: dict):
        """Returns (trace, exit) with exit in NORMAL/CRASH/HANG."""
        try:
            for inv in workload["invocations"]:
                for _ in range(inv.get("repeat", 1)):
                    if self.call(inv["method"]) is not None:
                        return self.trace, "CRASH"
        except _Frozen:
            return self.trace, "HANG"
        return self.trace, "NORMAL"


def ref_plain(prog: dict, workload: dict, budget: int = 2000):
    return RefRun(prog, budget=budget, instrument=False).run(workload)


def ref_points(prog: dict) -> list[tuple]:
    pts = []
    for name in sorted(prog["methods"]):
        m = prog["methods"][name]
        for loc in range(count_nodes(m["body"])):
            for e in sorted(m["throws"]):
                pts.append((name, loc, e))
    return pts


def ref_campaign(prog: dict, workload: dict, budget: int = 2000, contains: list | None = None):
    """Exhaustive reference: categories per point and the validated bindings.

    The oracle is "normal exit and trace equals the baseline trace", or with
    ``contains`` given, "normal exit and ``contains`` is a subsequence of the trace".

    Returns ``(categories, validated, candidates)`` where categories maps point
    triples to "fragile"/"sensitive"/"immunized"/"unreached", validated maps
    (point, handler) to (achieved, status) and candidates maps points to
    handler sets.
    """
    base = RefRun(prog, budget=budget)
    expected, exit_ = base.run(workload)
    assert exit_ == "NORMAL"

    def ok(point, always, fo=None):
        tr, ex = RefRun(prog, point, always, fo, budget).run(workload)
        if ex != "NORMAL":
            return False
        if contains is None:
            return tr == expected
        rest = iter(tr)
        return all(any(t == u for u in rest) for t in contains)

    def category(b1, b2):
        if b1 and b2:
            return "immunized"
        if b1:
            return "sensitive"
        return "fragile"

    rank = {"fragile": 0, "sensitive": 1, "immunized": 2}
    categories, validated, candidates = {}, {}, {}
    for p in ref_points(prog):
        if base.reach[(p[0], p[1])] == 0:
            categories[p] = "unreached"
            continue
        categories[p] = category(ok(p, False), ok(p, True))
        first = RefRun(prog, p, False, None, budget)
        first.run(workload)
        frames = first.first_stack
        if first.first_catch_distance is not None:
            frames = frames[: first.first_catch_distance]
        candidates[p] = set(frames)
        for n in sorted(set(frames)):
            achieved = category(ok(p, False, n), ok(p, True, n))
            orig = categories[p]
            if rank[achieved] > rank[orig]:
                validated[(p, n)] = (achieved, "VALIDATED_IMPROVEMENT")
            elif achieved == orig and orig != "fragile":
                validated[(p, n)] = (achieved, "ALTERNATIVE_RESILIENT")
    return categories, validated, candidates


def gen_case(rng: random.Random, budget: int = 2000, **kw) -> tuple[dict, dict, list | None]:
    """A (program, workload, contains) case whose uninstrumented baseline exits normally.

    ``contains`` is None for an exact-trace oracle, else a subsequence of the
    baseline trace for a contains oracle.
    """
    while True:
        prog = gen_program_dict(rng, **kw)
        work = gen_workload_dict(rng, prog)
        trace, exit_ = ref_plain(prog, work, budget)
        if exit_ == "NORMAL":
            break
    contains = None
    if rng.random() < 0.5:
        contains = [t for t in trace if rng.random() < 0.3]
    return prog, work, contains


def corpus(n: int, seed: int = 20201019, budget: int = 2000, **kw) -> list[tuple[dict, dict, list | None]]:
    rng = random.Random(seed)
    return [gen_case(rng, budget, **kw) for _ in range(n)]
