"""
Reporter Module - Console and JSON reports for runs, benchmarks and spectral checks
"""

import math
from datetime import datetime
from pathlib import Path
from typing import Dict, Optional, Union

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from core.bench import ComparisonResult, ScoreTable
from utils.helpers import save_to_json

console = Console()


def _fmt(value, digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


class Reporter:
    """Render a benchmark ScoreTable"""

    def __init__(self, table: ScoreTable):
        """
        Initialize reporter

        Args:
            table: Aggregated benchmark results
        """
        self.table = table
        self.report_time = datetime.now()

    def _best_method(self, kind: str) -> Optional[str]:
        rows = [r for r in self.table.rows if r.kind == kind and not math.isnan(r.mean_error)]
        return min(rows, key=lambda r: r.mean_error).method if rows else None

    def print_summary(self):
        """Print benchmark settings and run counts"""
        spec = self.table.spec
        failed = sum(not r.ok for r in self.table.records)

        summary_text = Text()
        summary_text.append("Phantoms: ", style="bold cyan")
        summary_text.append(f"{', '.join(spec.kinds)}\n", style="white")
        summary_text.append("Geometry: ", style="bold cyan")
        summary_text.append(f"N={spec.size}, angles {spec.angles}, {spec.n_rays} rays\n", style="white")
        summary_text.append("Noise / relaxation: ", style="bold cyan")
        summary_text.append(f"eta={spec.eta:g}, omega={spec.omega:g}\n", style="white")
        summary_text.append("Runs: ", style="bold cyan")
        summary_text.append(f"{spec.runs} per phantom (seeds {spec.seed0}..{spec.seed0 + spec.runs - 1})\n",
                            style="white")
        summary_text.append("Failed method runs: ", style="bold cyan")
        summary_text.append(f"{failed}\n", style="red" if failed else "white")

        panel = Panel(
            summary_text,
            title="[bold cyan]Benchmark Summary[/bold cyan]",
            border_style="cyan"
        )

        console.print()
        console.print(panel)
        console.print()

    def print_score_table(self):
        """Mean error, mean work units and score per phantom and method"""
        table = Table(
            title="[bold cyan]Average relative errors, work units and score[/bold cyan]",
            show_header=True,
            header_style="bold magenta"
        )

        table.add_column("Phantom", style="cyan")
        table.add_column("Method", style="bold")
        table.add_column("Error", justify="right")
        table.add_column("Work units", justify="right")
        table.add_column("Score", justify="right", style="yellow")
        table.add_column("Runs", justify="right")

        for kind in self.table.spec.kinds:
            best = self._best_method(kind)
            for row in (r for r in self.table.rows if r.kind == kind):
                style = "bold green" if row.method == best else None
                table.add_row(kind, row.method, _fmt(row.mean_error), _fmt(row.mean_work_units, 1),
                              _fmt(row.score, 1), str(row.completed), style=style)

        console.print(table)
        console.print()

    def generate_json_report(self, output_path: Union[str, Path] = "bench/report.json") -> Path:
        """
        Generate JSON report

        Args:
            output_path: Path to save JSON report

        Returns:
            Path to saved report
        """
        report = {
            'report_metadata': {
                'report_time': self.report_time.isoformat(),
                'records': len(self.table.records),
            },
            'scores': self.table.to_dict(),
        }
        path = save_to_json(output_path, report)
        console.print(f"[green]✓[/green] JSON report saved: {path}")
        return path

    def generate_console_report(self):
        self.print_summary()
        self.print_score_table()


def print_run_summary(summary: Dict):
    """One panel for a single reconstruction"""
    text = Text()
    for label, key in (("Method", "method"), ("Phantom", "kind"), ("k_stop", "k_stop"),
                       ("Stop reason", "stop_reason"), ("Relative error", "relative_error"),
                       ("Work units", "work_units"), ("sigma", "sigma"),
                       ("sigma (a posteriori)", "sigma_estimate"), ("Wall time [s]", "wall_time_s")):
        if key in summary:
            text.append(f"{label}: ", style="bold cyan")
            text.append(f"{_fmt(summary[key])}\n", style="white")
    console.print(Panel(text, title="[bold cyan]Run Summary[/bold cyan]", border_style="cyan"))


def print_comparison(result: ComparisonResult):
    table = Table(title="[bold cyan]Stopping rules on one instance[/bold cyan]", header_style="bold magenta")
    table.add_column("Rule", style="cyan")
    table.add_column("Stop", justify="right")
    table.add_column("Relative error", justify="right")
    for rule, stop in result.stops.items():
        table.add_row(rule, _fmt(stop), _fmt(result.stop_errors[rule]))
    console.print(table)


def print_spectral_report(report: Dict):
    status = "[bold green]✓ all checks passed[/bold green]" if report['passed'] else \
        f"[bold red]✗ {report['violations']} violations[/bold red]"
    console.print(f"{len(report['entries'])} spectral checks: {status}")
    if report['entries']:
        worst = max(e['rho'] for e in report['entries'])
        console.print(f"  largest rho(G): {worst:.6f}")


def generate_report(table: ScoreTable, output_dir: Union[str, Path] = "bench") -> Path:
    """
    Convenience function to generate reports

    Args:
        table: Aggregated benchmark results
        output_dir: Output directory for reports
    """
    reporter = Reporter(table)
    reporter.generate_console_report()
    return reporter.generate_json_report(Path(output_dir) / "report.json")
