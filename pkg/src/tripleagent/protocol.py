"""File channel between the controller and an instrumented target.

Activation file (controller -> target)::

    TRIPLEAGENT 1
    POINT <method> <location> <exception> <FIRST_HIT|ALWAYS>
    FO <method>
    BUDGET <steps> <timeout_ms>

Monitor log (target -> controller), one newline-terminated record per line::

    REACH <method> <location> <exception> <count>
    INJECT <method> <location> <exception> <stack>
    CATCH <exception> <raiser> <catcher> <distance> <MANUAL|FO_WRAPPER>
    EXIT <NORMAL|CRASH>

Stacks are callee-first and ``;``-joined. A log without its EXIT record is
an incomplete run. An unterminated final line is treated as a torn write
and ignored.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .errors import ParseError, UsageError
from .model import METHOD_NAME_RE, ExitKind, FaultModel, MethodRef, PerturbationPoint
from .simprog import CatchEvent, Event, EventTimeline, ExecutionResult, FOPlan, HandlerKind, Injection, InjectionPlan

HEADER = "TRIPLEAGENT 1"
CONFIG_ENV = "TRIPLEAGENT_CONFIG"
LOG_ENV = "TRIPLEAGENT_LOG"


@dataclass(frozen=True)
class Activation:
    injection: InjectionPlan = InjectionPlan()
    fo: FOPlan = FOPlan()
    step_budget: int = 100_000
    timeout_ms: int = 60_000

    def dumps(self) -> str:
        lines = [HEADER]
        p = self.injection.active_point
        if p is not None:
            lines.append(f"POINT {p.method} {p.location} {p.exception_type} {self.injection.fault_model.value}")
        lines.extend(f"FO {m}" for m in sorted(self.fo.active_handlers))
        lines.append(f"BUDGET {self.step_budget} {self.timeout_ms}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Activation":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        else:
            raise ParseError("activation file must end with a newline", f"line {len(lines)}")
        if not lines or lines[0] != HEADER:
            raise ParseError(f"expected header {HEADER!r}", "line 1")
        injection, handlers, budget = InjectionPlan(), [], None
        for lineno, line in enumerate(lines[1:], start=2):
            locus = f"line {lineno}"
            f = line.split(" ")
            if budget is not None:
                raise ParseError("record after BUDGET", locus)
            if f[0] == "POINT" and len(f) == 5:
                if injection.active_point is not None or handlers:
                    raise ParseError("POINT must appear once, before FO records", locus)
                point = PerturbationPoint(_name(f[1], locus), _int(f[2], locus), _token(f[3], locus))
                injection = InjectionPlan(point, _enum(FaultModel, f[4], locus))
            elif f[0] == "FO" and len(f) == 2:
                handlers.append(_name(f[1], locus))
            elif f[0] == "BUDGET" and len(f) == 3:
                budget = (_int(f[1], locus), _int(f[2], locus))
                if budget[0] <= 0 or budget[1] <= 0:
                    raise ParseError("budget values must be positive", locus)
            else:
                raise ParseError(f"malformed record {line!r}", locus)
        if budget is None:
            raise ParseError("missing BUDGET record", f"line {len(lines) + 1}")
        return cls(injection, FOPlan(frozenset(handlers)), budget[0], budget[1])


def write_activation(
    plan: InjectionPlan, fo: FOPlan, path: str | Path, step_budget: int = 100_000, timeout_ms: int = 60_000
) -> None:
    data = Activation(plan, fo, step_budget, timeout_ms).dumps().encode()
    with open(path, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())


def read_activation(path: str | Path) -> Activation:
    return Activation.loads(Path(path).read_text())


# --------------------------------------------------------------------------
# monitor log


@dataclass(frozen=True)
class Reach:
    point: PerturbationPoint
    count: int


@dataclass(frozen=True)
class Inject:
    point: PerturbationPoint
    stack: tuple[MethodRef, ...]


@dataclass(frozen=True)
class Catch:
    event: CatchEvent


@dataclass(frozen=True)
class Exit:
    kind: ExitKind


Record = Union[Reach, Inject, Catch, Exit]


def format_record(rec: Record) -> str:
    if isinstance(rec, Reach):
        p = rec.point
        return f"REACH {p.method} {p.location} {p.exception_type} {rec.count}"
    if isinstance(rec, Inject):
        p = rec.point
        return f"INJECT {p.method} {p.location} {p.exception_type} {';'.join(rec.stack)}"
    if isinstance(rec, Catch):
        e = rec.event
        return f"CATCH {e.exception_type} {e.raiser} {e.catcher} {e.stack_distance} {e.handler_kind.value}"
    return f"EXIT {rec.kind.value}"


def parse_record(line: str, locus: str) -> Record:
    f = line.split(" ")
    tag = f[0]
    if tag == "REACH" and len(f) == 5:
        count = _int(f[4], locus)
        return Reach(PerturbationPoint(_name(f[1], locus), _int(f[2], locus), _token(f[3], locus)), count)
    if tag == "INJECT" and len(f) == 5:
        stack = tuple(_name(m, locus) for m in f[4].split(";"))
        return Inject(PerturbationPoint(_name(f[1], locus), _int(f[2], locus), _token(f[3], locus)), stack)
    if tag == "CATCH" and len(f) == 6:
        event = CatchEvent(
            _token(f[1], locus), _name(f[2], locus), _name(f[3], locus), _int(f[4], locus),
            _enum(HandlerKind, f[5], locus),
        )
        return Catch(event)
    if tag == "EXIT" and len(f) == 2 and f[1] in ("NORMAL", "CRASH"):
        return Exit(ExitKind(f[1]))
    raise ParseError(f"malformed record {line!r}", locus)


@dataclass
class MonitorLog:
    records: list[Record] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return bool(self.records) and isinstance(self.records[-1], Exit)

    def dumps(self) -> str:
        return "".join(format_record(r) + "\n" for r in self.records)

    @classmethod
    def loads(cls, text: str) -> "MonitorLog":
        lines = text.split("\n")
        # the last element is either "" (clean end) or a torn partial record
        lines.pop()
        records: list[Record] = []
        for lineno, line in enumerate(lines, start=1):
            locus = f"line {lineno}"
            if records and isinstance(records[-1], Exit):
                raise ParseError("record after EXIT", locus)
            records.append(parse_record(line, locus))
        return cls(records)

    @classmethod
    def from_result(cls, result: ExecutionResult, include_exit: bool = True) -> "MonitorLog":
        records: list[Record] = [Reach(p, n) for p, n in sorted(result.reach_counts.items())]
        records += [Inject(e.point, e.stack) if isinstance(e, Injection) else Catch(e) for e in result.events]
        if include_exit and result.exit is not ExitKind.HANG:
            records.append(Exit(result.exit))
        return cls(records)


@dataclass
class MonitorView(EventTimeline):
    """What the controller learns about one run from a monitor log."""

    reach_counts: dict[PerturbationPoint, int]
    events: list[Event]
    exit: ExitKind


def view_of(log: MonitorLog, timed_out: bool = False) -> MonitorView:
    """Missing EXIT means CRASH, or HANG when the controller saw a timeout."""
    reach: dict[PerturbationPoint, int] = {}
    events: list[Event] = []
    exit_kind = ExitKind.HANG if timed_out else ExitKind.CRASH
    for rec in log.records:
        if isinstance(rec, Reach):
            reach[rec.point] = rec.count
        elif isinstance(rec, Inject):
            events.append(Injection(rec.point, rec.stack))
        elif isinstance(rec, Catch):
            events.append(rec.event)
        elif not timed_out:
            exit_kind = rec.kind
    return MonitorView(reach, events, exit_kind)


def parse_monitor_log(path: str | Path, timed_out: bool = False) -> MonitorView:
    """Read a log written by an agent. A missing file counts as an empty log."""
    p = Path(path)
    text = p.read_text() if p.exists() else ""
    return view_of(MonitorLog.loads(text), timed_out)


def stack_distance(stack: list[MethodRef] | tuple[MethodRef, ...], raiser: MethodRef, catcher: MethodRef) -> int:
    """Frames between the first occurrences of ``raiser`` and ``catcher`` in a callee-first stack."""
    stack = list(stack)
    try:
        r = stack.index(raiser)
        c = stack.index(catcher)
    except ValueError:
        raise UsageError(f"{raiser!r} or {catcher!r} not on stack {stack}") from None
    if c < r:
        raise UsageError(f"catcher {catcher!r} is below raiser {raiser!r} on the stack")
    return c - r


def _name(value: str, locus: str) -> str:
    if not METHOD_NAME_RE.match(value):
        raise ParseError(f"invalid method name {value!r}", locus)
    return value


def _token(value: str, locus: str) -> str:
    if not value:
        raise ParseError("empty field", locus)
    return value


def _int(value: str, locus: str) -> int:
    if not value.isdigit() or (len(value) > 1 and value[0] == "0"):
        raise ParseError(f"expected a non-negative integer, got {value!r}", locus)
    return int(value)


def _enum(cls, value: str, locus: str):
    try:
        return cls(value)
    except ValueError:
        raise ParseError(f"unknown {cls.__name__} {value!r}", locus) from None
