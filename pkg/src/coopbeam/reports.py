"""Solver run records with a flat CSV row encoding."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class SolveReport:
    """Outcome of one optimizer run: objective trace and bookkeeping."""

    method: str
    objective: float
    trace: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    wall_time_s: float = 0.0

    CSV_HEADER = "method,objective,converged,iterations,wall_time_s,trace"

    def to_csv_row(self):
        trace = ";".join(format(v, ".12g") for v in self.trace)
        return ",".join(
            [
                self.method,
                format(self.objective, ".12g"),
                str(int(self.converged)),
                str(self.iterations),
                format(self.wall_time_s, ".6g"),
                trace,
            ]
        )
