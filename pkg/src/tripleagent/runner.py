"""Out-of-process agent host for simulator programs.

Usage: ``python -m tripleagent.runner PROGRAM.json [WORKLOAD.json]``

Reads the activation file named by ``TRIPLEAGENT_CONFIG`` (agents are off
when unset), prints the emitted trace one token per line and writes the
monitor log to ``TRIPLEAGENT_LOG``. A run that exhausts its step budget
writes what it has observed and then blocks, like a frozen process, until
the controller's timeout kills it.
"""

from __future__ import annotations

import os
import sys
import time

from .model import ExitKind
from .protocol import CONFIG_ENV, LOG_ENV, Activation, MonitorLog, read_activation
from .simprog import WorkloadSpec, execute, load_program, load_workload


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not 1 <= len(argv) <= 2:
        print(__doc__.strip().splitlines()[2], file=sys.stderr)
        return 2
    program = load_program(argv[0])
    workload = load_workload(argv[1], program) if len(argv) == 2 else WorkloadSpec.default(program)
    config = os.environ.get(CONFIG_ENV)
    activation = read_activation(config) if config else Activation()

    result = execute(program, workload, activation.injection, activation.fo, activation.step_budget)
    sys.stdout.write("".join(tok + "\n" for tok in result.emitted_trace))
    sys.stdout.flush()
    log_path = os.environ.get(LOG_ENV)
    if log_path:
        with open(log_path, "w") as fh:
            fh.write(MonitorLog.from_result(result).dumps())
    if result.exit is ExitKind.HANG:
        while True:
            time.sleep(3600)
    return 0 if result.exit is ExitKind.NORMAL else 1


if __name__ == "__main__":
    sys.exit(main())
