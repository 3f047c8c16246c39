"""Core vocabulary and the pure decision rules of a campaign.

Everything here is immutable and side-effect free, except
:func:`evaluate_oracle` which may shell out for an external domain check.
"""

from __future__ import annotations

import enum
import os
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .errors import InvariantViolation, UsageError

MethodRef = str

METHOD_NAME_RE = re.compile(r"^[A-Za-z0-9_/$.]+$")


def check_method_name(name: str) -> str:
    if not isinstance(name, str) or not METHOD_NAME_RE.match(name):
        raise UsageError(f"invalid method name {name!r}")
    return name


@dataclass(frozen=True, order=True)
class PerturbationPoint:
    """Injection site: raise ``exception_type`` before statement ``location`` of ``method``."""

    method: MethodRef
    location: int
    exception_type: str

    def __post_init__(self):
        if self.location < 0:
            raise UsageError(f"negative location in {self}")

    def key(self) -> str:
        return f"{self.method}@{self.location}:{self.exception_type}"

    def __str__(self) -> str:
        return f"<{self.method}, {self.location}, {self.exception_type}>"


class FaultModel(enum.Enum):
    FIRST_HIT = "FIRST_HIT"
    ALWAYS = "ALWAYS"


class PointCategory(enum.Enum):
    FRAGILE = "fragile"
    SENSITIVE = "sensitive"
    IMMUNIZED = "immunized"
    UNREACHED = "unreached"

    @property
    def rank(self) -> int:
        if self is PointCategory.UNREACHED:
            raise UsageError("UNREACHED has no rank")
        return _RANK[self]

    def __lt__(self, other: "PointCategory") -> bool:
        if not isinstance(other, PointCategory):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other: "PointCategory") -> bool:
        if not isinstance(other, PointCategory):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other: "PointCategory") -> bool:
        if not isinstance(other, PointCategory):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other: "PointCategory") -> bool:
        if not isinstance(other, PointCategory):
            return NotImplemented
        return self.rank >= other.rank


_RANK = {PointCategory.FRAGILE: 0, PointCategory.SENSITIVE: 1, PointCategory.IMMUNIZED: 2}
RANKED = (PointCategory.FRAGILE, PointCategory.SENSITIVE, PointCategory.IMMUNIZED)


class ExitKind(enum.Enum):
    NORMAL = "NORMAL"
    CRASH = "CRASH"
    HANG = "HANG"


class VerdictReason(enum.Enum):
    OK = "OK"
    CRASH = "CRASH"
    FREEZE = "FREEZE"
    DOMAIN_CHECK_FAILED = "DOMAIN_CHECK_FAILED"
    NOT_RUN = "NOT_RUN"


@dataclass(frozen=True)
class OracleVerdict:
    passed: bool
    reason: VerdictReason

    def __post_init__(self):
        if self.passed != (self.reason is VerdictReason.OK):
            raise InvariantViolation(f"passed={self.passed} inconsistent with {self.reason}")

    @classmethod
    def of(cls, reason: VerdictReason) -> "OracleVerdict":
        return cls(reason is VerdictReason.OK, reason)


PASS = OracleVerdict.of(VerdictReason.OK)


class DomainCheck(enum.Enum):
    TRACE_EXACT = "TRACE_EXACT"
    TRACE_CONTAINS = "TRACE_CONTAINS"
    EXTERNAL_COMMAND = "EXTERNAL_COMMAND"


@dataclass(frozen=True)
class AcceptabilityOracle:
    """Generic checks (normal exit, no freeze) followed by one domain check.

    For the trace checks ``expected`` holds the expected token sequence; for
    ``EXTERNAL_COMMAND`` ``command`` is run and exit status 0 means pass.
    """

    domain: DomainCheck = DomainCheck.TRACE_EXACT
    expected: tuple[str, ...] | None = None
    command: str | None = None
    require_normal_exit: bool = True
    timeout_ms: int = 60_000

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise UsageError("timeout_ms must be positive")
        if self.domain is DomainCheck.EXTERNAL_COMMAND and not self.command:
            raise UsageError("EXTERNAL_COMMAND oracle needs a command")
        if self.domain is not DomainCheck.EXTERNAL_COMMAND and self.expected is None:
            raise UsageError(f"{self.domain.value} oracle needs expected trace tokens")


class Observed(Protocol):
    exit: ExitKind
    emitted_trace: Sequence[str]


def is_subsequence(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    it = iter(haystack)
    return all(any(tok == h for h in it) for tok in needle)


def evaluate_oracle(result: Observed, oracle: AcceptabilityOracle, log_path: str | None = None) -> OracleVerdict:
    """Judge one execution. Generic checks short-circuit the domain check."""
    if result.exit is ExitKind.HANG:
        return OracleVerdict.of(VerdictReason.FREEZE)
    if result.exit is ExitKind.CRASH and oracle.require_normal_exit:
        return OracleVerdict.of(VerdictReason.CRASH)

    trace = list(result.emitted_trace)
    if oracle.domain is DomainCheck.TRACE_EXACT:
        ok = trace == list(oracle.expected)
    elif oracle.domain is DomainCheck.TRACE_CONTAINS:
        ok = is_subsequence(oracle.expected, trace)
    else:
        ok = _run_external_check(oracle, trace, log_path)
        if ok is None:
            return OracleVerdict.of(VerdictReason.NOT_RUN)
    return OracleVerdict.of(VerdictReason.OK if ok else VerdictReason.DOMAIN_CHECK_FAILED)


def _run_external_check(oracle: AcceptabilityOracle, trace: list[str], log_path: str | None) -> bool | None:
    with tempfile.NamedTemporaryFile("w", suffix=".trace", delete=False) as fh:
        fh.write("".join(t + "\n" for t in trace))
        trace_path = fh.name
    env = dict(os.environ, TRIPLEAGENT_TRACE=trace_path)
    if log_path:
        env["TRIPLEAGENT_LOG"] = log_path
    try:
        proc = subprocess.run(
            shlex.split(oracle.command),
            env=env,
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
            timeout=oracle.timeout_ms / 1000,
        )
    except (OSError, subprocess.TimeoutExpired):
        return None
    finally:
        os.unlink(trace_path)
    return proc.returncode == 0


@dataclass(frozen=True, order=True)
class CandidateBinding:
    point: PerturbationPoint
    handler: MethodRef

    def __str__(self) -> str:
        return f"{self.point} -> {self.handler}"


class BindingStatus(enum.Enum):
    VALIDATED_IMPROVEMENT = "VALIDATED_IMPROVEMENT"
    ALTERNATIVE_RESILIENT = "ALTERNATIVE_RESILIENT"
    NO_EFFECT = "NO_EFFECT"


@dataclass
class Classification:
    fragile: set[PerturbationPoint] = field(default_factory=set)
    sensitive: set[PerturbationPoint] = field(default_factory=set)
    immunized: set[PerturbationPoint] = field(default_factory=set)
    unreached: set[PerturbationPoint] = field(default_factory=set)
    # fail-then-pass points; always also members of ``fragile``
    anomalies: set[PerturbationPoint] = field(default_factory=set)

    def bucket(self, category: PointCategory) -> set[PerturbationPoint]:
        return {
            PointCategory.FRAGILE: self.fragile,
            PointCategory.SENSITIVE: self.sensitive,
            PointCategory.IMMUNIZED: self.immunized,
            PointCategory.UNREACHED: self.unreached,
        }[category]

    def add(self, point: PerturbationPoint, category: PointCategory) -> None:
        self.bucket(category).add(point)

    def category_of(self, point: PerturbationPoint) -> PointCategory:
        for cat in PointCategory:
            if point in self.bucket(cat):
                return cat
        raise KeyError(point)

    def as_dict(self) -> dict[PerturbationPoint, PointCategory]:
        return {p: cat for cat in PointCategory for p in self.bucket(cat)}

    def points(self) -> set[PerturbationPoint]:
        return self.fragile | self.sensitive | self.immunized | self.unreached

    def check_partition(self, points: set[PerturbationPoint]) -> None:
        buckets = [self.bucket(c) for c in PointCategory]
        if sum(len(b) for b in buckets) != len(set().union(*buckets)):
            raise InvariantViolation("category sets overlap")
        if set().union(*buckets) != set(points):
            raise InvariantViolation("categories do not cover the detected point set")


def classify(b1: OracleVerdict, b2: OracleVerdict) -> tuple[PointCategory, bool]:
    """Category from the FIRST_HIT (``b1``) and ALWAYS (``b2``) verdicts.

    Returns ``(category, anomaly)``. The fail-then-pass combination is
    classified FRAGILE with ``anomaly=True``.
    """
    if VerdictReason.NOT_RUN in (b1.reason, b2.reason):
        raise UsageError("cannot classify from an experiment that was not run")
    if not b1.passed and not b2.passed:
        return PointCategory.FRAGILE, False
    if b1.passed and not b2.passed:
        return PointCategory.SENSITIVE, False
    if b1.passed and b2.passed:
        return PointCategory.IMMUNIZED, False
    return PointCategory.FRAGILE, True


def experiment_budget(n_points: int, n_candidates: int) -> int:
    if n_points < 0 or n_candidates < 0:
        raise UsageError("counts must be non-negative")
    return 2 * (n_points + n_candidates)


def binding_status(original: PointCategory, achieved: PointCategory) -> BindingStatus:
    if PointCategory.UNREACHED in (original, achieved):
        raise UsageError("binding status undefined for unreached points")
    if achieved > original:
        return BindingStatus.VALIDATED_IMPROVEMENT
    if achieved == original and original is not PointCategory.FRAGILE:
        return BindingStatus.ALTERNATIVE_RESILIENT
    return BindingStatus.NO_EFFECT


TRANSITION_LABELS = {
    (PointCategory.FRAGILE, PointCategory.FRAGILE): "a",
    (PointCategory.FRAGILE, PointCategory.SENSITIVE): "b",
    (PointCategory.FRAGILE, PointCategory.IMMUNIZED): "c",
    (PointCategory.SENSITIVE, PointCategory.SENSITIVE): "d",
    (PointCategory.SENSITIVE, PointCategory.IMMUNIZED): "e",
    (PointCategory.IMMUNIZED, PointCategory.IMMUNIZED): "f",
}


def transition_label(original: PointCategory, best_achieved: PointCategory) -> str:
    if PointCategory.UNREACHED in (original, best_achieved):
        raise UsageError("unreached points have no transition")
    try:
        return TRANSITION_LABELS[(original, best_achieved)]
    except KeyError:
        raise InvariantViolation(
            f"downgrade {original.value} -> {best_achieved.value} is not a valid transition"
        ) from None
