"""Campaign configuration file (JSON).

::

    {"format_version": 1,
     "target": {"backend": "simulator", "program": "prog.json", "workload": "work.json"},
     "oracle": {"domain": "TRACE_EXACT", "expected": null, "require_normal_exit": true},
     "filter": "", "timeout_ms": 60000, "step_budget": 100000,
     "output_dir": "out", "parallelism": 1, "overhead_runs": 0}

An external target replaces the target block with ``{"backend": "external",
"launch": ..., "health_check": ..., "restart": ..., "workdir": ...}`` and may
name an uninstrumented ``plain_launch`` for overhead timing. Relative paths
resolve against the config file's directory. ``expected: null`` means the
baseline run's trace is the expected one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .controller import DEFAULT_TIMEOUT_MS, ExternalTarget, SimulatorTarget
from .errors import ParseError, TripleAgentError
from .model import AcceptabilityOracle, DomainCheck
from .simprog import DEFAULT_STEP_BUDGET, WorkloadSpec, load_program, load_workload


class ConfigError(TripleAgentError):
    pass


@dataclass(frozen=True)
class CampaignConfig:
    target: dict
    oracle: dict
    base_dir: Path
    filter: str = ""
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    step_budget: int = DEFAULT_STEP_BUDGET
    output_dir: str = "out"
    parallelism: int = 1
    overhead_runs: int = 0

    @property
    def backend(self) -> str:
        return self.target["backend"]

    @property
    def out(self) -> Path:
        return self.base_dir / self.output_dir

    def build_target(self):
        t = self.target
        try:
            if self.backend == "simulator":
                program = load_program(self.base_dir / t["program"])
                workload = (
                    load_workload(self.base_dir / t["workload"], program)
                    if t.get("workload") else WorkloadSpec.default(program)
                )
                return SimulatorTarget(program, workload, self.step_budget)
            return ExternalTarget(
                t["launch"], t["health_check"], t["restart"],
                workdir=self.base_dir / t.get("workdir", "."),
                step_budget=self.step_budget,
                plain_launch=t.get("plain_launch"),
            )
        except (OSError, ParseError) as exc:
            raise ConfigError(f"target: {exc}") from exc

    def build_oracle(self) -> AcceptabilityOracle | None:
        o = self.oracle
        domain = DomainCheck(o.get("domain", "TRACE_EXACT"))
        expected = o.get("expected")
        if domain is not DomainCheck.EXTERNAL_COMMAND and expected is None and o.get("require_normal_exit", True):
            return None
        if domain is not DomainCheck.EXTERNAL_COMMAND and expected is None:
            raise ConfigError("oracle.expected is required when require_normal_exit is false")
        return AcceptabilityOracle(
            domain=domain,
            expected=tuple(expected) if expected is not None else None,
            command=o.get("command"),
            require_normal_exit=o.get("require_normal_exit", True),
            timeout_ms=o.get("timeout_ms", self.timeout_ms),
        )


_TOP_KEYS = {"format_version", "target", "oracle", "filter", "timeout_ms", "step_budget", "output_dir",
             "parallelism", "overhead_runs"}


def _positive_int(doc: dict, key: str, default: int, minimum: int = 1) -> int:
    v = doc.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {v!r}")
    return v


def load_config(path: str | Path, **overrides) -> CampaignConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if doc.get("format_version") != 1:
        raise ConfigError("config needs format_version 1")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    target = doc.get("target")
    if not isinstance(target, dict) or target.get("backend") not in ("simulator", "external"):
        raise ConfigError("target.backend must be 'simulator' or 'external'")
    if target["backend"] == "simulator" and not target.get("program"):
        raise ConfigError("simulator target needs a program file")
    if target["backend"] == "external":
        for key in ("launch", "health_check", "restart"):
            if not isinstance(target.get(key), str) or not target[key].strip():
                raise ConfigError(f"external target needs a non-empty {key} command")

    oracle = doc.get("oracle", {})
    if not isinstance(oracle, dict):
        raise ConfigError("oracle must be an object")
    try:
        domain = DomainCheck(oracle.get("domain", "TRACE_EXACT"))
    except ValueError:
        raise ConfigError(f"unknown oracle domain {oracle.get('domain')!r}") from None
    if domain is DomainCheck.EXTERNAL_COMMAND and not oracle.get("command"):
        raise ConfigError("EXTERNAL_COMMAND oracle needs a command")
    expected = oracle.get("expected")
    if expected is not None and (not isinstance(expected, list) or not all(isinstance(t, str) for t in expected)):
        raise ConfigError("oracle.expected must be a list of tokens or null")

    cfg = CampaignConfig(
        target=target,
        oracle=oracle,
        base_dir=path.parent,
        filter=doc.get("filter", "") or "",
        timeout_ms=_positive_int(doc, "timeout_ms", DEFAULT_TIMEOUT_MS),
        step_budget=_positive_int(doc, "step_budget", DEFAULT_STEP_BUDGET),
        output_dir=doc.get("output_dir", "out"),
        parallelism=_positive_int(doc, "parallelism", 1),
        overhead_runs=_positive_int(doc, "overhead_runs", 0, minimum=0),
    )
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    if cfg.parallelism > 1 and cfg.backend != "simulator":
        raise ConfigError("parallelism > 1 is only supported for the simulator backend")
    return cfg
