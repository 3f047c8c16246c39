"""A tiny deterministic program language used as the built-in experiment target.

Programs are JSON documents::

    {"format_version": 1,
     "entry": "main",
     "methods": {
        "main": {"throws": [], "body": [{"call": "m0"}]},
        "m0": {"throws": ["IOException"], "body": [{"emit": "x"}]}}}

Statements are ``{"emit": tok}``, ``{"call": name}``, ``{"throw": type}``,
``{"try": [...], "catch": [{"types": [...], "body": [...]}]}``,
``{"loop": n, "body": [...]}`` and ``{"hang": true}``.

Every statement node, nested ones included, gets a location ordinal in
document order within its method. An injection at location ``l`` raises
before that node executes. Each method also carries an implicit catch-all
wrapper that re-raises unless the method is an active failure-oblivious
handler, in which case the exception is swallowed and the method returns.
"""

from __future__ import annotations

import enum
import json
import sys
import time
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .errors import ParseError, UsageError
from .model import (
    METHOD_NAME_RE,
    ExitKind,
    FaultModel,
    MethodRef,
    PerturbationPoint,
)

FORMAT_VERSION = 1
DEFAULT_STEP_BUDGET = 100_000
CATCH_ALL = "*"
MAX_CALL_DEPTH = 1000
STACK_OVERFLOW = "StackOverflowError"


@dataclass(frozen=True)
class Emit:
    index: int
    token: str


@dataclass(frozen=True)
class Call:
    index: int
    target: MethodRef


@dataclass(frozen=True)
class Throw:
    index: int
    exception_type: str


@dataclass(frozen=True)
class CatchClause:
    types: tuple[str, ...]
    body: tuple["Statement", ...]

    def matches(self, exception_type: str) -> bool:
        return CATCH_ALL in self.types or exception_type in self.types


@dataclass(frozen=True)
class Try:
    index: int
    body: tuple["Statement", ...]
    catches: tuple[CatchClause, ...]


@dataclass(frozen=True)
class Loop:
    index: int
    count: int
    body: tuple["Statement", ...]


@dataclass(frozen=True)
class Hang:
    index: int


Statement = Union[Emit, Call, Throw, Try, Loop, Hang]


@dataclass(frozen=True)
class MethodBody:
    declared_exceptions: tuple[str, ...]
    statements: tuple[Statement, ...]
    n_locations: int


@dataclass(frozen=True)
class ProgramModel:
    entry: MethodRef
    methods: dict[MethodRef, MethodBody]


@dataclass(frozen=True)
class WorkloadSpec:
    invocations: tuple[tuple[MethodRef, int], ...]

    @classmethod
    def default(cls, program: ProgramModel) -> "WorkloadSpec":
        return cls(((program.entry, 1),))


@dataclass(frozen=True)
class InjectionPlan:
    active_point: PerturbationPoint | None = None
    fault_model: FaultModel = FaultModel.FIRST_HIT


@dataclass(frozen=True)
class FOPlan:
    active_handlers: frozenset[MethodRef] = frozenset()


NO_INJECTION = InjectionPlan()
NO_FO = FOPlan()


class HandlerKind(enum.Enum):
    MANUAL = "MANUAL"
    FO_WRAPPER = "FO_WRAPPER"


@dataclass(frozen=True)
class CatchEvent:
    exception_type: str
    raiser: MethodRef
    catcher: MethodRef
    stack_distance: int
    handler_kind: HandlerKind


@dataclass(frozen=True)
class Injection:
    point: PerturbationPoint
    # ordered callee -> caller
    stack: tuple[MethodRef, ...]


Event = Union[Injection, CatchEvent]


class EventTimeline:
    """Mixin for anything holding an ordered ``events`` list of injections and catches."""

    events: list[Event]

    @property
    def injection_stacks(self) -> list[tuple[PerturbationPoint, tuple[MethodRef, ...]]]:
        return [(e.point, e.stack) for e in self.events if isinstance(e, Injection)]

    @property
    def catch_events(self) -> list[CatchEvent]:
        return [e for e in self.events if isinstance(e, CatchEvent)]

    def first_injection(self, point: PerturbationPoint) -> tuple[Injection, CatchEvent | None] | None:
        """The first injection of ``point`` and the catch that stopped it, if any.

        Propagation runs no program code, so an injected exception is either
        caught by the very next recorded event or escapes the workload.
        """
        for i, e in enumerate(self.events):
            if isinstance(e, Injection) and e.point == point:
                nxt = self.events[i + 1] if i + 1 < len(self.events) else None
                return e, nxt if isinstance(nxt, CatchEvent) else None
        return None


@dataclass
class ExecutionResult(EventTimeline):
    emitted_trace: list[str]
    exit: ExitKind
    reach_counts: dict[PerturbationPoint, int]
    events: list[Event] = field(default_factory=list)
    steps_used: int = 0
    exceptions_raised: int = 0
    crash_exception: str | None = None
    crash_stack: tuple[MethodRef, ...] = ()


# --------------------------------------------------------------------------
# parsing


def _as_name(value, locus: str) -> str:
    if not isinstance(value, str) or not METHOD_NAME_RE.match(value):
        raise ParseError(f"invalid name {value!r}", locus)
    return value


def _as_token(value, locus: str) -> str:
    if not isinstance(value, str) or not value or any(c.isspace() for c in value):
        raise ParseError(f"token must be a non-empty string without whitespace, got {value!r}", locus)
    return value


class _BodyParser:
    def __init__(self, method: str):
        self.method = method
        self.next_index = 0
        self.calls: list[tuple[str, str]] = []

    def block(self, raw, locus: str) -> tuple[Statement, ...]:
        if not isinstance(raw, list):
            raise ParseError("statement list expected", locus)
        return tuple(self.statement(s, f"{locus}[{i}]") for i, s in enumerate(raw))

    def statement(self, raw, locus: str) -> Statement:
        if not isinstance(raw, dict):
            raise ParseError("statement must be an object", locus)
        index = self.next_index
        self.next_index += 1
        keys = set(raw)
        if keys == {"emit"}:
            return Emit(index, _as_token(raw["emit"], locus))
        if keys == {"call"}:
            target = _as_name(raw["call"], locus)
            self.calls.append((target, locus))
            return Call(index, target)
        if keys == {"throw"}:
            return Throw(index, _as_token(raw["throw"], locus))
        if keys == {"hang"}:
            if raw["hang"] is not True:
                raise ParseError("hang must be true", locus)
            return Hang(index)
        if keys == {"loop", "body"}:
            count = raw["loop"]
            if not isinstance(count, int) or isinstance(count, bool) or count < 1:
                raise ParseError(f"loop count must be an integer >= 1, got {count!r}", locus)
            return Loop(index, count, self.block(raw["body"], f"{locus}.body"))
        if keys in ({"try", "catch"}, {"try"}):
            body = self.block(raw["try"], f"{locus}.try")
            clauses = []
            raw_catch = raw.get("catch", [])
            if not isinstance(raw_catch, list):
                raise ParseError("catch must be a list", locus)
            for ci, clause in enumerate(raw_catch):
                cl = f"{locus}.catch[{ci}]"
                if not isinstance(clause, dict) or set(clause) != {"types", "body"}:
                    raise ParseError("catch clause needs exactly 'types' and 'body'", cl)
                types = clause["types"]
                if not isinstance(types, list) or not types:
                    raise ParseError("catch types must be a non-empty list", cl)
                types = tuple(_as_token(t, f"{cl}.types") for t in types)
                clauses.append(CatchClause(types, self.block(clause["body"], f"{cl}.body")))
            return Try(index, body, tuple(clauses))
        raise ParseError(f"unknown statement shape with keys {sorted(keys)}", locus)


def program_from_dict(doc) -> ProgramModel:
    if not isinstance(doc, dict):
        raise ParseError("program document must be an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {doc.get('format_version')!r}", "format_version")
    entry = doc.get("entry")
    if not entry:
        raise ParseError("missing entry", "entry")
    entry = _as_name(entry, "entry")
    raw_methods = doc.get("methods")
    if not isinstance(raw_methods, dict) or not raw_methods:
        raise ParseError("methods must be a non-empty object", "methods")

    methods: dict[str, MethodBody] = {}
    calls: list[tuple[str, str]] = []
    for name, raw in raw_methods.items():
        locus = f"methods.{name}"
        _as_name(name, locus)
        if not isinstance(raw, dict) or not set(raw) <= {"throws", "body"} or "body" not in raw:
            raise ParseError("method needs 'body' and optional 'throws'", locus)
        throws = raw.get("throws", [])
        if not isinstance(throws, list):
            raise ParseError("throws must be a list", f"{locus}.throws")
        throws = tuple(_as_token(t, f"{locus}.throws") for t in throws)
        if len(set(throws)) != len(throws):
            raise ParseError("duplicate declared exception", f"{locus}.throws")
        parser = _BodyParser(name)
        body = parser.block(raw["body"], f"{locus}.body")
        if not body:
            raise ParseError("method body is empty", f"{locus}.body")
        calls.extend(parser.calls)
        methods[name] = MethodBody(throws, body, parser.next_index)

    if entry not in methods:
        raise ParseError(f"entry method {entry!r} is not defined", "entry")
    for target, locus in calls:
        if target not in methods:
            raise ParseError(f"call to undefined method {target!r}", locus)
    return ProgramModel(entry, methods)


def parse_program(text: str) -> ProgramModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}") from None
    return program_from_dict(doc)


def load_program(path: str | Path) -> ProgramModel:
    return parse_program(Path(path).read_text())


def _stmt_to_dict(s: Statement) -> dict:
    if isinstance(s, Emit):
        return {"emit": s.token}
    if isinstance(s, Call):
        return {"call": s.target}
    if isinstance(s, Throw):
        return {"throw": s.exception_type}
    if isinstance(s, Hang):
        return {"hang": True}
    if isinstance(s, Loop):
        return {"loop": s.count, "body": [_stmt_to_dict(b) for b in s.body]}
    return {
        "try": [_stmt_to_dict(b) for b in s.body],
        "catch": [{"types": list(c.types), "body": [_stmt_to_dict(b) for b in c.body]} for c in s.catches],
    }


def program_to_dict(program: ProgramModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "entry": program.entry,
        "methods": {
            name: {"throws": list(m.declared_exceptions), "body": [_stmt_to_dict(s) for s in m.statements]}
            for name, m in program.methods.items()
        },
    }


def workload_from_dict(doc, program: ProgramModel | None = None) -> WorkloadSpec:
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise ParseError("workload needs format_version 1", "format_version")
    raw = doc.get("invocations")
    if not isinstance(raw, list) or not raw:
        raise ParseError("invocations must be a non-empty list", "invocations")
    invocations = []
    for i, inv in enumerate(raw):
        locus = f"invocations[{i}]"
        if not isinstance(inv, dict) or "method" not in inv:
            raise ParseError("invocation needs a method", locus)
        method = _as_name(inv["method"], f"{locus}.method")
        repeat = inv.get("repeat", 1)
        if not isinstance(repeat, int) or isinstance(repeat, bool) or repeat < 1:
            raise ParseError(f"repeat must be an integer >= 1, got {repeat!r}", f"{locus}.repeat")
        if program is not None and method not in program.methods:
            raise ParseError(f"workload invokes undefined method {method!r}", f"{locus}.method")
        invocations.append((method, repeat))
    return WorkloadSpec(tuple(invocations))


def workload_to_dict(workload: WorkloadSpec) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "invocations": [{"method": m, "repeat": r} for m, r in workload.invocations],
    }


def load_workload(path: str | Path, program: ProgramModel | None = None) -> WorkloadSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}") from None
    return workload_from_dict(doc, program)


# --------------------------------------------------------------------------
# detection


def enumerate_points(program: ProgramModel, prefix: str = "") -> list[PerturbationPoint]:
    """All ``<m, l, e>`` for methods whose name starts with ``prefix``."""
    points = []
    for name in sorted(program.methods):
        if not name.startswith(prefix):
            continue
        body = program.methods[name]
        for loc in range(body.n_locations):
            for exc in sorted(body.declared_exceptions):
                points.append(PerturbationPoint(name, loc, exc))
    return points


# --------------------------------------------------------------------------
# interpretation


class _Raised(Exception):
    def __init__(self, exception_type: str, raiser: str, depth: int, stack: tuple[str, ...]):
        self.exception_type = exception_type
        self.raiser = raiser
        self.depth = depth
        self.stack = stack


class _OutOfSteps(BaseException):
    """Not catchable by program handlers, including the catch-all wrappers."""


class _StackOverflow(BaseException):
    """Call depth beyond MAX_CALL_DEPTH; terminates the run as a crash."""

    def __init__(self, stack: tuple[str, ...]):
        self.stack = stack


@contextmanager
def _recursion_headroom():
    old = sys.getrecursionlimit()
    needed = 12 * MAX_CALL_DEPTH + 1000
    if needed > old:
        sys.setrecursionlimit(needed)
    try:
        yield
    finally:
        sys.setrecursionlimit(old)


class _Interpreter:
    def __init__(self, program: ProgramModel, injection: InjectionPlan, fo: FOPlan, step_budget: int):
        self.program = program
        self.point = injection.active_point
        self.always = injection.fault_model is FaultModel.ALWAYS
        self.fo = fo.active_handlers
        self.budget = step_budget
        self.steps = 0
        self.stack: list[str] = []
        self.trace: list[str] = []
        self.reach: Counter = Counter()
        self.events: list[Event] = []
        self.raised = 0

    def snapshot(self) -> tuple[str, ...]:
        return tuple(reversed(self.stack))

    def raise_here(self, exception_type: str):
        self.raised += 1
        method = self.stack[-1]
        raise _Raised(exception_type, method, len(self.stack) - 1, self.snapshot())

    def run_method(self, name: str) -> None:
        if len(self.stack) >= MAX_CALL_DEPTH:
            self.raised += 1
            raise _StackOverflow(self.snapshot())
        self.stack.append(name)
        depth = len(self.stack) - 1
        try:
            try:
                self.run_block(self.program.methods[name].statements)
            except _Raised as exc:
                if name not in self.fo:
                    raise
                self.events.append(
                    CatchEvent(exc.exception_type, exc.raiser, name, exc.depth - depth, HandlerKind.FO_WRAPPER)
                )
        finally:
            self.stack.pop()

    def run_block(self, block: Iterable[Statement]) -> None:
        for stmt in block:
            self.run_statement(stmt)

    def run_statement(self, stmt: Statement) -> None:
        self.steps += 1
        if self.steps >= self.budget:
            self.steps = self.budget
            raise _OutOfSteps
        method = self.stack[-1]
        key = (method, stmt.index)
        self.reach[key] += 1
        point = self.point
        if point is not None and point.method == method and point.location == stmt.index:
            if self.always or self.reach[key] == 1:
                self.events.append(Injection(point, self.snapshot()))
                self.raise_here(point.exception_type)

        if isinstance(stmt, Emit):
            self.trace.append(stmt.token)
        elif isinstance(stmt, Call):
            self.run_method(stmt.target)
        elif isinstance(stmt, Throw):
            self.raise_here(stmt.exception_type)
        elif isinstance(stmt, Loop):
            for _ in range(stmt.count):
                self.run_block(stmt.body)
        elif isinstance(stmt, Try):
            depth = len(self.stack) - 1
            try:
                self.run_block(stmt.body)
            except _Raised as exc:
                clause = next((c for c in stmt.catches if c.matches(exc.exception_type)), None)
                if clause is None:
                    raise
                self.events.append(
                    CatchEvent(exc.exception_type, exc.raiser, method, exc.depth - depth, HandlerKind.MANUAL)
                )
                self.run_block(clause.body)
        elif isinstance(stmt, Hang):
            self.steps = self.budget
            raise _OutOfSteps

    def reach_counts(self) -> dict[PerturbationPoint, int]:
        counts = {}
        for name, body in self.program.methods.items():
            for loc in range(body.n_locations):
                n = self.reach[(name, loc)]
                for exc in body.declared_exceptions:
                    counts[PerturbationPoint(name, loc, exc)] = n
        return counts


def execute(
    program: ProgramModel,
    workload: WorkloadSpec,
    injection: InjectionPlan = NO_INJECTION,
    fo: FOPlan = NO_FO,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> ExecutionResult:
    if step_budget <= 0:
        raise UsageError("step_budget must be positive")
    for handler in fo.active_handlers:
        if handler not in program.methods:
            raise UsageError(f"unknown failure-oblivious handler {handler!r}")
    interp = _Interpreter(program, injection, fo, step_budget)
    exit_kind = ExitKind.NORMAL
    crash_exc, crash_stack = None, ()
    with _recursion_headroom():
        try:
            for method, repeat in workload.invocations:
                for _ in range(repeat):
                    interp.run_method(method)
        except _Raised as exc:
            exit_kind, crash_exc, crash_stack = ExitKind.CRASH, exc.exception_type, exc.stack
        except _StackOverflow as exc:
            exit_kind, crash_exc, crash_stack = ExitKind.CRASH, STACK_OVERFLOW, exc.stack
        except _OutOfSteps:
            exit_kind = ExitKind.HANG
    return ExecutionResult(
        emitted_trace=interp.trace,
        exit=exit_kind,
        reach_counts=interp.reach_counts(),
        events=interp.events,
        steps_used=interp.steps,
        exceptions_raised=interp.raised,
        crash_exception=crash_exc,
        crash_stack=crash_stack,
    )


def baseline_trace(program: ProgramModel, workload: WorkloadSpec, step_budget: int = DEFAULT_STEP_BUDGET) -> ExecutionResult:
    return execute(program, workload, NO_INJECTION, NO_FO, step_budget)


def run_plain(program: ProgramModel, workload: WorkloadSpec, step_budget: int = DEFAULT_STEP_BUDGET) -> tuple[list[str], ExitKind]:
    """Run without any monitoring, injection or wrappers. Used as the overhead baseline."""
    trace: list[str] = []
    steps = 0
    depth = 0

    class Thrown(Exception):
        def __init__(self, kind):
            self.kind = kind

    def block(stmts):
        nonlocal steps
        for s in stmts:
            steps += 1
            if steps >= step_budget:
                raise _OutOfSteps
            if isinstance(s, Emit):
                trace.append(s.token)
            elif isinstance(s, Call):
                call(s.target)
            elif isinstance(s, Throw):
                raise Thrown(s.exception_type)
            elif isinstance(s, Loop):
                for _ in range(s.count):
                    block(s.body)
            elif isinstance(s, Try):
                try:
                    block(s.body)
                except Thrown as exc:
                    clause = next((c for c in s.catches if c.matches(exc.kind)), None)
                    if clause is None:
                        raise
                    block(clause.body)
            else:
                raise _OutOfSteps

    def call(name):
        nonlocal depth
        if depth >= MAX_CALL_DEPTH:
            raise _StackOverflow(())
        depth += 1
        try:
            block(program.methods[name].statements)
        finally:
            depth -= 1

    with _recursion_headroom():
        try:
            for method, repeat in workload.invocations:
                for _ in range(repeat):
                    call(method)
        except (Thrown, _StackOverflow):
            return trace, ExitKind.CRASH
        except _OutOfSteps:
            return trace, ExitKind.HANG
    return trace, ExitKind.NORMAL


def time_runs(fn, runs: int) -> float:
    """Mean wall-clock milliseconds of ``fn()`` over ``runs`` calls."""
    total = 0.0
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        total += time.perf_counter() - t0
    return 1000 * total / max(runs, 1)
