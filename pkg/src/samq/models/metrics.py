"""Solver metrics tracking for estimation runs."""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

from rich.console import Console
from rich.table import Table


def _format_duration(seconds: float) -> str:
    """Format duration in human-readable format."""
    if seconds < 1:
        return f"{seconds * 1000:.0f}ms"
    if seconds < 60:
        return f"{seconds:.1f}s"

    minutes = int(seconds // 60)
    remaining_seconds = seconds % 60

    if minutes < 60:
        return f"{minutes}m {remaining_seconds:.0f}s"

    hours = minutes // 60
    remaining_minutes = minutes % 60
    return f"{hours}h {remaining_minutes}m {remaining_seconds:.0f}s"


@dataclass
class SolverMetrics:
    """Inner fixed-point work, outer likelihood evaluations and phase timings."""

    inner_iterations: Counter[int] = field(default_factory=Counter)
    outer_evaluations: int = 0
    start_time: float = field(default_factory=time.perf_counter)
    phase_durations: dict[str, float] = field(default_factory=dict)

    def record_inner(self, iterations: int) -> None:
        """Record one inner solve that took ``iterations`` operator applications."""
        self.inner_iterations[iterations] += 1

    def record_evaluation(self) -> None:
        self.outer_evaluations += 1

    def start_phase(self, name: str) -> float:
        return time.perf_counter()

    def end_phase(self, name: str, phase_start_time: float) -> float:
        """Accumulate the duration of a named phase."""
        duration = time.perf_counter() - phase_start_time
        self.phase_durations[name] = self.phase_durations.get(name, 0.0) + duration
        return duration

    @property
    def inner_solves(self) -> int:
        return sum(self.inner_iterations.values())

    @property
    def total_inner_iterations(self) -> int:
        return sum(k * count for k, count in self.inner_iterations.items())

    @property
    def avg_inner_iterations(self) -> float:
        solves = self.inner_solves
        return self.total_inner_iterations / solves if solves > 0 else 0.0

    @property
    def total_duration(self) -> float:
        return time.perf_counter() - self.start_time

    def histogram(self) -> dict[int, int]:
        return dict(sorted(self.inner_iterations.items()))

    def format_stats_table(self) -> str:
        """Format metrics as a Rich table."""
        table = Table(
            title="Estimation Statistics", show_header=False, box=None, padding=(0, 1)
        )
        table.add_column("Metric", style="bold cyan", justify="left")
        table.add_column("Value", style="green", justify="right")

        table.add_row("Likelihood Evaluations", f"{self.outer_evaluations:,}")
        table.add_row("Inner Solves", f"{self.inner_solves:,}")
        table.add_row("  Total Iterations", f"{self.total_inner_iterations:,}")
        if self.inner_solves > 0:
            table.add_row("  Avg per Solve", f"{self.avg_inner_iterations:.1f}")
            table.add_row("  Max per Solve", f"{max(self.inner_iterations):,}")

        table.add_row("", "")
        for name, duration in self.phase_durations.items():
            table.add_row(f"{name.capitalize()} Duration", _format_duration(duration))
        table.add_row("Total Duration", _format_duration(self.total_duration))

        console = Console()
        with console.capture() as capture:
            console.print(table)
        return capture.get()
