#!/usr/bin/env python3
"""
twingauge - Kaczmarz reconstruction with twin error gauges

Builds parallel-beam test problems, runs the Twin Algorithm, the
Mutual-Step Algorithm or plain Kaczmarz with a statistical stopping rule,
and benchmarks them against each other.
"""

import argparse
import asyncio
import sys
from pathlib import Path
from typing import List, Optional

from rich.console import Console

from core.banner import display_banner
from core.bench import (BenchSpec, DEFAULT_BENCH_METHODS, METHODS, cmd_bench, cmd_phantom, cmd_run, cmd_spectral,
                        compare_rules, noise_study)
from core.phantoms import PHANTOM_KINDS, make_phantom
from core.reporter import generate_report, print_comparison, print_run_summary, print_spectral_report
from core.tomo import Geometry, build_matrix, make_problem
from utils.errors import TwinGaugeError
from utils.helpers import parse_angles, parse_float_list, save_to_json, write_sinogram
from utils.log import setup_logging

console = Console()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 3


def _add_problem_args(parser: argparse.ArgumentParser, kind: bool = True):
    if kind:
        parser.add_argument('--kind', default='grains', choices=sorted(PHANTOM_KINDS),
                            help='Phantom kind (default: grains)')
    parser.add_argument('--size', type=int, default=128, help='Image size N (default: 128)')
    parser.add_argument('--angles', default='0:1.5:178.5',
                        help='Projection angles start:step:stop in degrees, inclusive (default: 0:1.5:178.5)')
    parser.add_argument('--rays', type=int, default=181, help='Rays per angle (default: 181)')
    parser.add_argument('--eta', type=float, default=8e-3, help='Relative noise level (default: 8e-3)')
    parser.add_argument('--seed', type=int, default=0, help='Phantom and noise seed (default: 0)')


def _add_solver_args(parser: argparse.ArgumentParser):
    parser.add_argument('--omega', type=float, default=1.0, help='Relaxation parameter in (0, 2) (default: 1.0)')
    parser.add_argument('--maxits', type=int, default=300, help='Maximum number of sweeps (default: 300)')
    parser.add_argument('--tol', type=float, default=1e-4, help='Mutual-Step tolerance on |alpha|+|beta| (default: 1e-4)')
    parser.add_argument('--slack', type=int, default=10, help='Twin Algorithm slack (default: 10)')


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        description='twingauge - Kaczmarz sweeps with twin error gauges',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Write a grains phantom
  python twingauge.py phantom --kind grains --size 128 --seed 7 --out grains.pgm

  # Mutual-Step reconstruction with the default parallel-beam geometry
  python twingauge.py run --method msa --kind grains --out run_msa

  # Plain Kaczmarz stopped by generalized cross validation
  python twingauge.py run --method kaczmarz --rule gcv --out run_gcv

  # Twin, Mutual-Step and Kaczmarz+Oracle on three phantoms, 20 runs each
  python twingauge.py bench --kind grains,binary,shepplogan --runs 20 --out bench

  # Dense spectral checks on small random systems
  python twingauge.py spectral --sizes 8x6,12x10 --trials 5 --out spectral.json

  # Export the system matrix and a noisy sinogram
  python twingauge.py matrix --size 64 --angles 0:3:177 --rays 91 --out A.mtx --sinogram b.bin
        """
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    parser.add_argument('--no-banner', action='store_true', help='Do not display the banner')

    subparsers = parser.add_subparsers(dest='command', required=True)

    phantom = subparsers.add_parser('phantom', help='Write a test phantom as PGM')
    phantom.add_argument('--kind', default='grains', choices=sorted(PHANTOM_KINDS),
                         help='Phantom kind (default: grains)')
    phantom.add_argument('--size', type=int, default=128, help='Image size N (default: 128)')
    phantom.add_argument('--seed', type=int, default=0, help='Seed for random phantoms (default: 0)')
    phantom.add_argument('--plain', action='store_true', help='Write ASCII P2 instead of binary P5')
    phantom.add_argument('-o', '--out', default='phantom.pgm', help='Output PGM (default: phantom.pgm)')

    matrix = subparsers.add_parser('matrix', help='Write the system matrix as Matrix Market')
    _add_problem_args(matrix)
    matrix.add_argument('-o', '--out', default='matrix.mtx', help='Output Matrix Market file (default: matrix.mtx)')
    matrix.add_argument('--sinogram', help='Also write the noisy sinogram of --kind (.csv or raw)')

    run = subparsers.add_parser('run', help='Reconstruct one noisy instance')
    _add_problem_args(run)
    _add_solver_args(run)
    run.add_argument('--method', default='twin', help=f'One of {", ".join(METHODS)}, or kaczmarz+RULE')
    run.add_argument('--rule', help='Stopping rule for kaczmarz: upre, gcv, cdp, oracle, none')
    run.add_argument('--sigma', type=float, help='Noise level handed to upre/cdp (default: the true one)')
    run.add_argument('--parallel', action='store_true', help='Run paired sweeps on two threads')
    run.add_argument('-o', '--out', default='run', help='Output directory (default: run)')

    bench = subparsers.add_parser('bench', help='Benchmark methods over many seeds')
    _add_problem_args(bench, kind=False)
    _add_solver_args(bench)
    bench.add_argument('--kind', default='grains', help='Comma-separated phantom kinds, or "all" (default: grains)')
    bench.add_argument('--runs', type=int, default=100, help='Runs per phantom (default: 100)')
    bench.add_argument('--methods', '--method', dest='methods', default=','.join(DEFAULT_BENCH_METHODS),
                       help=f'Comma-separated methods (default: {",".join(DEFAULT_BENCH_METHODS)})')
    bench.add_argument('--max-concurrent', type=int, default=4, help='Concurrent runs (default: 4)')
    bench.add_argument('-o', '--out', default='bench', help='Output directory (default: bench)')

    spectral = subparsers.add_parser('spectral', help='Dense checks of the sweep algebra')
    spectral.add_argument('--sizes', default='8x6,12x10,20x15', help='Comma-separated MxN (default: 8x6,12x10,20x15)')
    spectral.add_argument('--omegas', default='0.25,1.0,1.75', help='Comma-separated omegas (default: 0.25,1.0,1.75)')
    spectral.add_argument('--trials', type=int, default=5, help='Random matrices per size (default: 5)')
    spectral.add_argument('--identity', action='store_true', help='Include A = I')
    spectral.add_argument('--seed', type=int, default=0, help='Seed (default: 0)')
    spectral.add_argument('-o', '--out', default='spectral.json', help='Output JSON (default: spectral.json)')

    noise = subparsers.add_parser('noise', help='Plain Kaczmarz error histories for several noise levels')
    _add_problem_args(noise)
    noise.add_argument('--etas', default='1e-3,2e-3,4e-3,8e-3,1.6e-2', help='Comma-separated noise levels')
    noise.add_argument('--omega', type=float, default=1.0, help='Relaxation parameter (default: 1.0)')
    noise.add_argument('--maxits', type=int, default=100, help='Sweeps per level (default: 100)')
    noise.add_argument('-o', '--out', default='noise.csv', help='Output CSV (default: noise.csv)')

    compare = subparsers.add_parser('compare', help='Stopping rules and the Twin gauge on one instance')
    _add_problem_args(compare)
    _add_solver_args(compare)
    compare.add_argument('-o', '--out', default='compare', help='Output directory (default: compare)')

    return parser.parse_args(argv)


def _geometry(args: argparse.Namespace) -> Geometry:
    return Geometry(image_size=args.size, angles=tuple(parse_angles(args.angles)), n_rays=args.rays)


def _bench_kinds(spec: str) -> List[str]:
    if spec == 'all':
        return list(PHANTOM_KINDS)
    return [k.strip() for k in spec.split(',') if k.strip()]


async def dispatch(args: argparse.Namespace) -> int:
    """Run one subcommand; returns the exit code"""
    if args.command == 'phantom':
        path = cmd_phantom(args.kind, args.size, args.seed, args.out, binary=not args.plain)
        console.print(f"[green]✓[/green] Phantom written: {path}")

    elif args.command == 'matrix':
        geometry = _geometry(args)
        console.print(f"[cyan]→[/cyan] Building {geometry.n_measurements}x{geometry.n_pixels} system matrix...")
        A = build_matrix(geometry)
        path = A.write_matrix_market(args.out)
        console.print(f"[green]✓[/green] Matrix written: {path} ({A.nnz} nonzeros)")
        if args.sinogram:
            problem = make_problem(geometry, make_phantom(args.kind, args.size, args.seed), args.eta,
                                   noise_seed=args.seed, A=A)
            path = write_sinogram(args.sinogram, problem.b)
            console.print(f"[green]✓[/green] Sinogram written: {path} (sigma={problem.sigma:.4g})")

    elif args.command == 'run':
        console.print("[bold cyan]═══ RECONSTRUCTION ═══[/bold cyan]\n")
        summary = cmd_run(_geometry(args), args.kind, args.method, rule=args.rule, omega=args.omega,
                          eta=args.eta, maxits=args.maxits, tol=args.tol, slack=args.slack, seed=args.seed,
                          output_dir=args.out, parallel=args.parallel, sigma=args.sigma)
        print_run_summary(summary)
        console.print(f"[green]✓[/green] Outputs written to {args.out}/")

    elif args.command == 'bench':
        spec = BenchSpec(kinds=_bench_kinds(args.kind), size=args.size, angles=args.angles, n_rays=args.rays,
                         eta=args.eta, omega=args.omega, runs=args.runs, seed0=args.seed,
                         methods=[m.strip() for m in args.methods.split(',') if m.strip()],
                         maxits=args.maxits, tol=args.tol, slack=args.slack)
        console.print("[bold cyan]═══ BENCHMARK ═══[/bold cyan]\n")
        table = await cmd_bench(spec, args.out, max_concurrent=args.max_concurrent)
        generate_report(table, args.out)

    elif args.command == 'spectral':
        console.print("[bold cyan]═══ SPECTRAL CHECKS ═══[/bold cyan]\n")
        report = cmd_spectral(args.sizes, parse_float_list(args.omegas), args.trials, seed=args.seed,
                              include_identity=args.identity, out_path=args.out)
        print_spectral_report(report)
        if not report['passed']:
            return 2

    elif args.command == 'noise':
        geometry = _geometry(args)
        phantom = make_phantom(args.kind, args.size, args.seed)
        console.print(f"[cyan]→[/cyan] Noise study on {args.kind}, {len(geometry.angles)} angles...")
        study = noise_study(geometry, phantom, parse_float_list(args.etas), omega=args.omega,
                            maxits=args.maxits, seed=args.seed)
        for eta, (k, error) in study.minima().items():
            console.print(f"  eta={eta:g}: minimum relative error {error:.4f} at sweep {k}")
        path = study.write_csv(args.out)
        console.print(f"[green]✓[/green] Error histories written: {path}")

    elif args.command == 'compare':
        geometry = _geometry(args)
        problem = make_problem(geometry, make_phantom(args.kind, args.size, args.seed), args.eta,
                               noise_seed=args.seed)
        console.print("[bold cyan]═══ STOPPING RULES ═══[/bold cyan]\n")
        result = compare_rules(problem, omega=args.omega, maxits=args.maxits, slack=args.slack, seed=args.seed)
        out = Path(args.out)
        result.write_csv(out / "comparison.csv")
        save_to_json(out / "comparison.json", result.to_dict())
        print_comparison(result)
        console.print(f"[green]✓[/green] Outputs written to {out}/")

    return EXIT_OK


async def main(argv: Optional[List[str]] = None) -> int:
    """Main execution function"""
    try:
        args = parse_arguments(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage, 0 after --help
        return EXIT_USAGE if e.code else EXIT_OK
    setup_logging(args.verbose)

    if not args.no_banner:
        display_banner()

    try:
        return await dispatch(args)

    except KeyboardInterrupt:
        console.print("\n[yellow]⚠ Interrupted by user[/yellow]")
        return 1
    except TwinGaugeError as e:
        console.print(f"\n[red]✗ {type(e).__name__}: {e}[/red]")
        return e.exit_code
    except IndexError as e:
        console.print(f"\n[red]✗ Index out of range: {e}[/red]")
        return 1
    except OSError as e:
        console.print(f"\n[red]✗ I/O error: {e}[/red]")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
