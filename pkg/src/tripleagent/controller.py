"""Campaign orchestration: detection, classification, candidate discovery and assessment.

Every workload execution is an experiment. Results are appended to a JSONL
journal as they complete; a campaign re-opened over an existing journal
replays recorded experiments instead of re-running them.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import shlex
import signal
import subprocess
import tempfile
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CampaignAborted, ControllerError, IntegrityError, UsageError
from .model import (
    AcceptabilityOracle,
    BindingStatus,
    CandidateBinding,
    Classification,
    DomainCheck,
    ExitKind,
    FaultModel,
    MethodRef,
    OracleVerdict,
    PerturbationPoint,
    PointCategory,
    VerdictReason,
    binding_status,
    classify,
    evaluate_oracle,
)
from .protocol import (
    CONFIG_ENV,
    LOG_ENV,
    MonitorLog,
    format_record,
    parse_monitor_log,
    parse_record,
    view_of,
    write_activation,
)
from .simprog import (
    DEFAULT_STEP_BUDGET,
    Event,
    EventTimeline,
    FOPlan,
    InjectionPlan,
    ProgramModel,
    WorkloadSpec,
    execute,
    run_plain,
    time_runs,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 60_000


class Purpose(enum.Enum):
    BASELINE = "BASELINE"
    CLASSIFY = "CLASSIFY"
    DISCOVER = "DISCOVER"
    ASSESS = "ASSESS"


@dataclass(frozen=True)
class ExperimentSpec:
    id: int
    point: PerturbationPoint | None
    fault_model: FaultModel | None
    fo_handler: MethodRef | None
    purpose: Purpose

    def __post_init__(self):
        if self.purpose is Purpose.BASELINE:
            if self.point is not None or self.fo_handler is not None:
                raise UsageError("baseline runs carry no point or handler")
            return
        if self.point is None or self.fault_model is None:
            raise UsageError(f"{self.purpose.value} experiment needs a point and fault model")
        if (self.purpose is Purpose.ASSESS) != (self.fo_handler is not None):
            raise UsageError("exactly the ASSESS experiments carry a failure-oblivious handler")

    @property
    def key(self) -> str:
        return experiment_key(self.purpose, self.point, self.fault_model, self.fo_handler)

    @property
    def injection(self) -> InjectionPlan:
        if self.point is None:
            return InjectionPlan()
        return InjectionPlan(self.point, self.fault_model)

    @property
    def fo(self) -> FOPlan:
        return FOPlan(frozenset([self.fo_handler]) if self.fo_handler else frozenset())


def experiment_key(purpose: Purpose, point, fault_model, fo_handler) -> str:
    return "|".join(
        [purpose.value, point.key() if point else "-", fault_model.value if fault_model else "-", fo_handler or "-"]
    )


@dataclass
class Execution(EventTimeline):
    """Observable outcome of one workload execution, whatever the backend."""

    emitted_trace: list[str]
    exit: ExitKind
    reach_counts: dict[PerturbationPoint, int]
    events: list[Event] = field(default_factory=list)
    log_path: str | None = None

    def to_json(self) -> dict:
        monitor = MonitorLog.from_result(self, include_exit=False)  # type: ignore[arg-type]
        return {
            "trace": list(self.emitted_trace),
            "exit": self.exit.value,
            "monitor": [format_record(r) for r in monitor.records],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Execution":
        log_ = MonitorLog([parse_record(line, "journal") for line in doc["monitor"]])
        view = view_of(log_)
        return cls(list(doc["trace"]), ExitKind(doc["exit"]), view.reach_counts, view.events)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    execution: Execution | None
    verdict: OracleVerdict
    wall_ms: float = 0.0
    restarted: bool = False

    def to_json(self) -> dict:
        s = self.spec
        return {
            "kind": "experiment",
            "id": s.id,
            "key": s.key,
            "purpose": s.purpose.value,
            "point": [s.point.method, s.point.location, s.point.exception_type] if s.point else None,
            "fault_model": s.fault_model.value if s.fault_model else None,
            "fo_handler": s.fo_handler,
            "verdict": {"passed": self.verdict.passed, "reason": self.verdict.reason.value},
            "execution": self.execution.to_json() if self.execution else None,
            "wall_ms": round(self.wall_ms, 3),
            "restarted": self.restarted,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentResult":
        point = PerturbationPoint(*doc["point"]) if doc["point"] else None
        spec = ExperimentSpec(
            doc["id"],
            point,
            FaultModel(doc["fault_model"]) if doc["fault_model"] else None,
            doc["fo_handler"],
            Purpose(doc["purpose"]),
        )
        verdict = OracleVerdict(doc["verdict"]["passed"], VerdictReason(doc["verdict"]["reason"]))
        execution = Execution.from_json(doc["execution"]) if doc["execution"] else None
        return cls(spec, execution, verdict, doc["wall_ms"], doc["restarted"])


# --------------------------------------------------------------------------
# targets


class HealthStatus(enum.Enum):
    HEALTHY = "HEALTHY"
    RESTARTED = "RESTARTED"
    UNRECOVERABLE = "UNRECOVERABLE"


def _simulate(args) -> Execution:
    program, workload, injection, fo, budget = args
    r = execute(program, workload, injection, fo, budget)
    return Execution(r.emitted_trace, r.exit, r.reach_counts, r.events)


class SimulatorTarget:
    """In-process interpreter backend. Stateless, so always healthy."""

    parallel_safe = True

    def __init__(self, program: ProgramModel, workload: WorkloadSpec | None = None, step_budget: int = DEFAULT_STEP_BUDGET):
        self.program = program
        self.workload = workload or WorkloadSpec.default(program)
        self.step_budget = step_budget

    def job(self, injection: InjectionPlan, fo: FOPlan):
        return (self.program, self.workload, injection, fo, self.step_budget)

    def run(self, injection: InjectionPlan, fo: FOPlan, timeout_ms: int, workdir: Path | None = None) -> Execution:
        return _simulate(self.job(injection, fo))

    def health_check_and_restart(self) -> HealthStatus:
        return HealthStatus.HEALTHY

    def measure_overhead(self, runs: int) -> tuple[float, float] | None:
        plain = time_runs(lambda: run_plain(self.program, self.workload, self.step_budget), runs)
        inactive = time_runs(lambda: execute(self.program, self.workload, step_budget=self.step_budget), runs)
        return plain, inactive


class ExternalTarget:
    """A target process launched per experiment, talking through the activation file and monitor log."""

    parallel_safe = False

    def __init__(
        self,
        launch: str,
        health_check: str,
        restart: str,
        workdir: str | Path = ".",
        step_budget: int = DEFAULT_STEP_BUDGET,
        plain_launch: str | None = None,
    ):
        if not launch or not health_check or not restart:
            raise UsageError("external targets need launch, health-check and restart commands")
        self.launch = launch
        self.health_check = health_check
        self.restart = restart
        self.workdir = Path(workdir)
        self.step_budget = step_budget
        self.plain_launch = plain_launch

    def _spawn(self, command: str, env: dict, timeout_ms: int) -> tuple[str, bool] | None:
        try:
            proc = subprocess.Popen(
                shlex.split(command),
                cwd=self.workdir,
                env=env,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                start_new_session=True,
            )
        except OSError as exc:
            log.warning("launch failed: %s", exc)
            return None
        try:
            out, _ = proc.communicate(timeout=timeout_ms / 1000)
            return out, False
        except subprocess.TimeoutExpired:
            os.killpg(proc.pid, signal.SIGKILL)
            out, _ = proc.communicate()
            return out, True

    def run(self, injection: InjectionPlan, fo: FOPlan, timeout_ms: int, workdir: Path | None = None) -> Execution | None:
        if workdir is None:
            workdir = Path(tempfile.mkdtemp(prefix="tripleagent-"))
        workdir.mkdir(parents=True, exist_ok=True)
        config_path, log_path = workdir / "activation.txt", workdir / "monitor.log"
        if log_path.exists():
            log_path.unlink()
        try:
            write_activation(injection, fo, config_path, self.step_budget, timeout_ms)
        except OSError as exc:
            log.warning("cannot write activation file: %s", exc)
            return None
        env = dict(os.environ, **{CONFIG_ENV: str(config_path.resolve()), LOG_ENV: str(log_path.resolve())})
        spawned = self._spawn(self.launch, env, timeout_ms)
        if spawned is None:
            return None
        out, timed_out = spawned
        try:
            view = parse_monitor_log(log_path, timed_out=timed_out)
        except Exception as exc:  # malformed log from a foreign agent
            log.warning("unreadable monitor log %s: %s", log_path, exc)
            return None
        return Execution(out.split(), view.exit, view.reach_counts, view.events, str(log_path))

    def _check(self, command: str) -> bool:
        env = {k: v for k, v in os.environ.items() if k not in (CONFIG_ENV, LOG_ENV)}
        try:
            return (
                subprocess.run(
                    shlex.split(command), cwd=self.workdir, env=env, stdout=subprocess.DEVNULL,
                    stderr=subprocess.DEVNULL, timeout=DEFAULT_TIMEOUT_MS / 1000,
                ).returncode
                == 0
            )
        except (OSError, subprocess.TimeoutExpired):
            return False

    def health_check_and_restart(self) -> HealthStatus:
        if self._check(self.health_check):
            return HealthStatus.HEALTHY
        log.warning("health check failed; running restart command")
        if not self._check(self.restart):
            return HealthStatus.UNRECOVERABLE
        return HealthStatus.RESTARTED if self._check(self.health_check) else HealthStatus.UNRECOVERABLE

    def measure_overhead(self, runs: int) -> tuple[float, float] | None:
        if not self.plain_launch:
            return None
        env = {k: v for k, v in os.environ.items() if k not in (CONFIG_ENV, LOG_ENV)}
        plain = time_runs(lambda: self._spawn(self.plain_launch, env, DEFAULT_TIMEOUT_MS), runs)
        inactive = time_runs(lambda: self.run(InjectionPlan(), FOPlan(), DEFAULT_TIMEOUT_MS), runs)
        return plain, inactive


def health_check_and_restart(target) -> HealthStatus:
    return target.health_check_and_restart()


# --------------------------------------------------------------------------
# journal


class Journal:
    """Append-only JSONL record of finished experiments, keyed for replay."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self.records: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        text = self.path.read_text()
        lines = text.split("\n")
        torn = lines.pop()
        if torn:
            log.warning("ignoring torn final journal record")
        bad = []
        for lineno, line in enumerate(lines, start=1):
            try:
                doc = json.loads(line)
                key = doc["key"]
            except (json.JSONDecodeError, KeyError, TypeError):
                bad.append(f"line {lineno}: unreadable record")
                continue
            if key in self.records and self.records[key] != doc:
                bad.append(f"line {lineno}: conflicting duplicate of {key}")
            self.records[key] = doc
        if bad:
            raise IntegrityError(f"journal {self.path} is inconsistent", bad)
        if torn:
            with open(self.path, "w") as fh:
                fh.write("".join(line + "\n" for line in lines))

    def get(self, key: str) -> dict | None:
        return self.records.get(key)

    def append(self, doc: dict) -> None:
        with self._lock:
            self.records[doc["key"]] = doc
            if self.path is None:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(json.dumps(doc, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())


class JournalIncomplete(ControllerError):
    pass


# --------------------------------------------------------------------------
# campaign


@dataclass
class Assessment:
    binding: CandidateBinding
    achieved: PointCategory | None
    status: BindingStatus | None
    excluded: bool = False


@dataclass
class CampaignState:
    points: list[PerturbationPoint] = field(default_factory=list)
    reach: dict[PerturbationPoint, int] = field(default_factory=dict)
    baseline_trace: list[str] = field(default_factory=list)
    classification: Classification = field(default_factory=Classification)
    verdicts: dict[PerturbationPoint, tuple[OracleVerdict, OracleVerdict]] = field(default_factory=dict)
    default_handlers: dict[PerturbationPoint, MethodRef | None] = field(default_factory=dict)
    candidates: dict[PerturbationPoint, list[MethodRef]] = field(default_factory=dict)
    assessments: list[Assessment] = field(default_factory=list)
    flagged: set[PerturbationPoint] = field(default_factory=set)
    restarts: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    experiments: int = 0
    overhead: tuple[float, float] | None = None

    @property
    def reached(self) -> list[PerturbationPoint]:
        return [p for p in self.points if self.reach.get(p, 0) > 0]

    @property
    def candidate_set(self) -> set[CandidateBinding]:
        return {CandidateBinding(p, n) for p, ns in self.candidates.items() for n in ns}

    @property
    def validated(self) -> dict[CandidateBinding, tuple[PointCategory, BindingStatus]]:
        return {
            a.binding: (a.achieved, a.status)
            for a in self.assessments
            if not a.excluded and a.status not in (None, BindingStatus.NO_EFFECT)
        }

    def original(self, point: PerturbationPoint) -> PointCategory:
        return self.classification.category_of(point)

    def best_achieved(self, point: PerturbationPoint) -> PointCategory:
        best = self.original(point)
        for (b, (achieved, _)) in self.validated.items():
            if b.point == point and achieved > best:
                best = achieved
        return best


def candidates_from(execution: EventTimeline, point: PerturbationPoint) -> list[MethodRef] | None:
    """Methods between the throwing frame (inclusive) and the catching frame (exclusive).

    Returns None when the point was never injected. If nothing caught the
    exception, every frame down to the workload root is a candidate.
    """
    found = execution.first_injection(point)
    if found is None:
        return None
    injection, catch = found
    frames = injection.stack if catch is None else injection.stack[: catch.stack_distance]
    seen: list[MethodRef] = []
    for m in frames:
        if m not in seen:
            seen.append(m)
    return seen


class Campaign:
    def __init__(
        self,
        target,
        oracle: AcceptabilityOracle | None = None,
        *,
        filter_prefix: str = "",
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        journal: Journal | str | Path | None = None,
        experiments_dir: str | Path | None = None,
        parallel: int = 1,
        replay_only: bool = False,
        reuse_stacks: bool = True,
    ):
        if parallel > 1 and not target.parallel_safe:
            raise UsageError("parallel execution is only supported for the simulator backend")
        self.target = target
        # None means: compare traces exactly against the baseline run
        self.oracle_template = oracle
        self.oracle: AcceptabilityOracle | None = None
        self.filter_prefix = filter_prefix
        self.timeout_ms = timeout_ms
        self.journal = journal if isinstance(journal, Journal) else Journal(journal)
        self.experiments_dir = Path(experiments_dir) if experiments_dir else None
        self.parallel = parallel
        self.replay_only = replay_only
        self.reuse_stacks = reuse_stacks
        self.state = CampaignState()
        self.executions = 0
        self._next_id = 0
        self._stage = 0

    # -- single experiments ------------------------------------------------

    def _spec(self, purpose: Purpose, point=None, fault_model=None, fo_handler=None) -> ExperimentSpec:
        spec = ExperimentSpec(self._next_id, point, fault_model, fo_handler, purpose)
        self._next_id += 1
        return spec

    def _resolve_oracle(self, baseline: Execution) -> AcceptabilityOracle:
        tmpl = self.oracle_template
        if tmpl is None:
            return AcceptabilityOracle(DomainCheck.TRACE_EXACT, tuple(baseline.emitted_trace), timeout_ms=self.timeout_ms)
        if tmpl.domain is not DomainCheck.EXTERNAL_COMMAND and tmpl.expected is None:
            raise UsageError("trace oracles need expected tokens")
        return tmpl

    def _finish(self, spec: ExperimentSpec, execution: Execution | None, wall_ms: float) -> ExperimentResult:
        if execution is None:
            verdict = OracleVerdict.of(VerdictReason.NOT_RUN)
            self.state.warnings.append(f"experiment {spec.id} ({spec.key}) could not be run")
        else:
            verdict = evaluate_oracle(execution, self.oracle, execution.log_path)
            if verdict.reason is VerdictReason.NOT_RUN:
                self.state.warnings.append(f"oracle command for experiment {spec.id} could not be run")
        health = self.target.health_check_and_restart()
        result = ExperimentResult(spec, execution, verdict, wall_ms, restarted=health is not HealthStatus.HEALTHY)
        self.journal.append(result.to_json())
        if health is HealthStatus.UNRECOVERABLE:
            raise CampaignAborted(f"target unrecoverable after experiment {spec.id} ({spec.key})")
        return result

    def _replayed(self, spec: ExperimentSpec) -> ExperimentResult | None:
        doc = self.journal.get(spec.key)
        if doc is None:
            return None
        result = ExperimentResult.from_json(doc)
        if result.spec.id != spec.id:
            raise IntegrityError(
                f"journal record {spec.key} has id {result.spec.id}, expected {spec.id}", [spec.key]
            )
        return result

    def run_experiment(self, spec: ExperimentSpec) -> ExperimentResult:
        return self._run_batch([spec])[0]

    def _run_batch(self, specs: list[ExperimentSpec]) -> list[ExperimentResult]:
        results: list[ExperimentResult | None] = [self._replayed(s) for s in specs]
        todo = [i for i, r in enumerate(results) if r is None]
        if todo and self.replay_only:
            raise JournalIncomplete(f"journal lacks {len(todo)} experiment(s), e.g. {specs[todo[0]].key}")
        if self.parallel > 1 and len(todo) > 1:
            t0 = time.perf_counter()
            with ProcessPoolExecutor(self.parallel) as pool:
                executions = list(pool.map(_simulate, [self.target.job(specs[i].injection, specs[i].fo) for i in todo]))
            wall = 1000 * (time.perf_counter() - t0) / len(todo)
            for i, ex in zip(todo, executions):
                self.executions += 1
                results[i] = self._finish(specs[i], ex, wall)
        else:
            for i in todo:
                spec = specs[i]
                workdir = self.experiments_dir / f"{spec.id:06d}" if self.experiments_dir else None
                t0 = time.perf_counter()
                ex = self.target.run(spec.injection, spec.fo, self.timeout_ms, workdir)
                self.executions += 1
                results[i] = self._finish(spec, ex, 1000 * (time.perf_counter() - t0))
        for r in results:
            if r.restarted:
                self.state.restarts.append(r.spec.id)
            if r.spec.purpose is not Purpose.BASELINE:
                self.state.experiments += 1
        return results  # type: ignore[return-value]

    # -- pipeline stages ---------------------------------------------------

    def detect_points(self) -> list[PerturbationPoint]:
        if self.target.health_check_and_restart() is HealthStatus.UNRECOVERABLE:
            raise CampaignAborted("target is not healthy before the campaign")
        spec = self._spec(Purpose.BASELINE)
        doc = self.journal.get(spec.key)
        if doc is None and self.replay_only:
            raise JournalIncomplete("journal has no baseline run")
        if doc is None:
            t0 = time.perf_counter()
            ex = self.target.run(spec.injection, spec.fo, self.timeout_ms,
                                 self.experiments_dir / "baseline" if self.experiments_dir else None)
            self.executions += 1
            wall = 1000 * (time.perf_counter() - t0)
            if ex is None:
                raise ControllerError("baseline run could not be launched")
            self.oracle = self._resolve_oracle(ex)
            result = self._finish(spec, ex, wall)
        else:
            result = ExperimentResult.from_json(doc)
            self.oracle = self._resolve_oracle(result.execution)
        if not result.verdict.passed:
            raise ControllerError(f"workload not green: baseline verdict {result.verdict.reason.value}")

        st = self.state
        st.baseline_trace = list(result.execution.emitted_trace)
        st.reach = dict(result.execution.reach_counts)
        st.points = sorted(p for p in st.reach if p.method.startswith(self.filter_prefix))
        for p in st.points:
            if st.reach[p] == 0:
                st.classification.unreached.add(p)
        self._stage = 1
        return st.points

    def classify_points(self) -> Classification:
        if self._stage < 1:
            self.detect_points()
        st = self.state
        specs = []
        for p in st.reached:
            specs.append(self._spec(Purpose.CLASSIFY, p, FaultModel.FIRST_HIT))
            specs.append(self._spec(Purpose.CLASSIFY, p, FaultModel.ALWAYS))
        results = self._run_batch(specs)
        for first, always in zip(results[::2], results[1::2]):
            p = first.spec.point
            if VerdictReason.NOT_RUN in (first.verdict.reason, always.verdict.reason):
                raise CampaignAborted(f"classification experiments for {p} could not be run")
            category, anomaly = classify(first.verdict, always.verdict)
            st.classification.add(p, category)
            if anomaly:
                st.classification.anomalies.add(p)
            st.verdicts[p] = (first.verdict, always.verdict)
            if first.restarted or always.restarted:
                st.warnings.append(f"target needed a restart while classifying {p}")
            found = first.execution.first_injection(p)
            catch = found[1] if found else None
            st.default_handlers[p] = catch.catcher if catch else None
            if self.reuse_stacks:
                st.candidates[p] = candidates_from(first.execution, p) or []
        st.classification.check_partition(set(st.points))
        self._stage = 2
        return st.classification

    def collect_candidates(self) -> set[CandidateBinding]:
        if self._stage < 2:
            self.classify_points()
        st = self.state
        missing = [p for p in st.reached if p not in st.candidates]
        specs = [self._spec(Purpose.DISCOVER, p, FaultModel.FIRST_HIT) for p in missing]
        for p, r in zip(missing, self._run_batch(specs)):
            if r.execution is None:
                st.warnings.append(f"no candidates for {p}: discovery run failed")
                st.candidates[p] = []
            else:
                st.candidates[p] = candidates_from(r.execution, p) or []
        for p in st.points:
            st.candidates.setdefault(p, [])
        self._stage = 3
        return st.candidate_set

    def assess_candidates(self) -> dict[CandidateBinding, tuple[PointCategory, BindingStatus]]:
        if self._stage < 3:
            self.collect_candidates()
        st = self.state
        for p in st.reached:
            for n in st.candidates[p]:
                binding = CandidateBinding(p, n)
                if p in st.flagged:
                    st.assessments.append(Assessment(binding, None, None, excluded=True))
                    continue
                first = self._run_batch([self._spec(Purpose.ASSESS, p, FaultModel.FIRST_HIT, n)])[0]
                if first.restarted or first.verdict.reason is VerdictReason.NOT_RUN:
                    self._exclude(binding, first)
                    continue
                always = self._run_batch([self._spec(Purpose.ASSESS, p, FaultModel.ALWAYS, n)])[0]
                if always.restarted or always.verdict.reason is VerdictReason.NOT_RUN:
                    self._exclude(binding, always)
                    continue
                achieved, _ = classify(first.verdict, always.verdict)
                st.assessments.append(Assessment(binding, achieved, binding_status(st.original(p), achieved)))
        self._stage = 4
        return st.validated

    def _exclude(self, binding: CandidateBinding, result: ExperimentResult) -> None:
        st = self.state
        why = "corrupted the target" if result.restarted else "could not be run"
        st.warnings.append(
            f"experiment {result.spec.id} {why}; {binding.handler} is not failure-oblivious for {binding.point}, "
            "point excluded from further assessment"
        )
        st.flagged.add(binding.point)
        st.assessments.append(Assessment(binding, None, None, excluded=True))

    def measure_overhead(self, runs: int) -> tuple[float, float] | None:
        key = "OVERHEAD"
        doc = self.journal.get(key)
        if doc is None:
            if self.replay_only or runs <= 0:
                return self.state.overhead
            measured = self.target.measure_overhead(runs)
            if measured is None:
                return None
            doc = {"kind": "overhead", "key": key, "runs": runs, "baseline_ms": measured[0], "instrumented_ms": measured[1]}
            self.journal.append(doc)
        self.state.overhead = (doc["baseline_ms"], doc["instrumented_ms"])
        return self.state.overhead

    def run(self, overhead_runs: int = 0) -> CampaignState:
        self.detect_points()
        self.classify_points()
        self.collect_candidates()
        self.assess_candidates()
        if overhead_runs:
            self.measure_overhead(overhead_runs)
        return self.state
