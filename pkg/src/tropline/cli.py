"""Command-line interface.

Reproducible runs over the library: validation, segment computation,
classification reports, worst-case generation, counting tables, random
pairs, and Monte-Carlo experiments.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 internal
classification-trichotomy violation.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from collections import Counter
from pathlib import Path

import click

from .ensembles import (
    EXPERIMENT_CSV_COLUMNS,
    SeededStream,
    enumerate_planar_trees,
    essential_pairs_experiment,
    marked_planar_tree_count,
    planar_tree_count,
    sample_generic_pair,
    worst_case_pair,
)
from .metric import (
    DimensionMismatch,
    UltraVector,
    first_four_point_violation,
    first_three_point_violation,
    format_vector,
    parse_vector,
)
from .segment import (
    NNI_WEIGHT,
    NonGenericPairError,
    TheoremViolation,
    analyze_segment,
    segment_class_counts,
    segment_report_dict,
    tropical_segment,
)
from .trees import NewickError, NotUltrametricError, parse_newick

DEFAULT_SEED = 20240808


def _load(path: str) -> UltraVector:
    text = Path(path).read_text()
    if "(" in text or ";" in text:
        return parse_newick(text).to_ultrametric()
    return parse_vector(text)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text, nl=not text.endswith("\n"))
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


@click.group()
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True,
              help="Seed for anything random; fixed by default for reproducibility.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None,
              help="Write output here instead of stdout.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True, help="Output format for tabular commands.")
@click.option("--decimal", is_flag=True,
              help="Add rounded decimal fields next to exact rationals.")
@click.pass_context
def cli(ctx, seed, out, fmt, decimal):
    """Tropical line segments between equidistant trees."""
    ctx.obj = {"seed": seed, "out": out, "fmt": fmt, "decimal": decimal}


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def validate(ctx, path):
    """Check the three- and four-point conditions of one input."""
    u = _load(path)
    lines = []
    bad3 = first_three_point_violation(u)
    if bad3 is None:
        lines.append("ultrametric: yes")
    else:
        lines.append(f"ultrametric: no; triple {bad3}")
    bad4 = first_four_point_violation(u) if u.n >= 4 else None
    if u.n < 4:
        lines.append("four-point: not applicable (n < 4)")
    elif bad4 is None:
        lines.append("four-point: yes")
    else:
        lines.append(f"four-point: no; quadruple {bad4}")
    _emit("\n".join(lines), ctx.obj["out"])
    if bad3 is not None or bad4 is not None:
        sys.exit(1)


@cli.command()
@click.argument("path_u", type=click.Path(exists=True, dir_okay=False))
@click.argument("path_v", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def segment(ctx, path_u, path_v):
    """Full segment report between two ultrametrics, as JSON."""
    seg = tropical_segment(_load(path_u), _load(path_v))
    report = segment_report_dict(seg, decimal=ctx.obj["decimal"])
    _emit(json.dumps(report, indent=2), ctx.obj["out"])


@cli.command()
@click.argument("path_u", type=click.Path(exists=True, dir_okay=False))
@click.argument("path_v", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def classify(ctx, path_u, path_v):
    """Classify every turning point and cross-check the move structure."""
    analysis = analyze_segment(_load(path_u), _load(path_v))
    report = {
        "n": analysis.n,
        "generic_pair": analysis.generic_pair,
        "points": [
            {
                "lambda": str(lam),
                "class": k.value if k is not None else None,
                "child_counts": list(p),
            }
            for lam, k, p in zip(analysis.scalars, analysis.classes, analysis.profiles)
        ],
        "class_counts": dict(
            Counter(k.value for k in analysis.classes if k is not None)
        ),
        "checks": {
            "convexity": analysis.convexity_ok,
            "piece_constancy": analysis.piece_constancy_ok,
            "moves": analysis.moves_ok,
            "endpoints": analysis.endpoints_ok,
        },
        "problems": analysis.problems,
    }
    if ctx.obj["decimal"]:
        for rec, lam in zip(report["points"], analysis.scalars):
            rec["lambda_decimal"] = float(lam)
    _emit(json.dumps(report, indent=2), ctx.obj["out"])
    all_ok = (
        analysis.convexity_ok
        and analysis.piece_constancy_ok
        and analysis.moves_ok
        and analysis.endpoints_ok
        and not analysis.problems
    )
    if not all_ok:
        raise TheoremViolation("; ".join(analysis.problems) or "structural check failed")


@cli.command()
@click.argument("path_u", type=click.Path(exists=True, dir_okay=False))
@click.argument("path_v", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def tnni(ctx, path_u, path_v):
    """Turning-point and NNI-move counts along the segment."""
    u, v = _load(path_u), _load(path_v)
    counts = segment_class_counts(u, v)
    report = {
        "n": u.n,
        "turning_points": sum(counts.values()),
        "tropical_nni_number": sum(NNI_WEIGHT[k] * c for k, c in counts.items()),
        "class_counts": {k.value: c for k, c in counts.items()},
    }
    _emit(json.dumps(report, indent=2), ctx.obj["out"])


@cli.command("worst-case")
@click.argument("n", type=int)
@click.pass_context
def worst_case(ctx, n):
    """Emit the caterpillar pair with the maximal number of turning points.

    With --out PREFIX, writes PREFIX.u.txt and PREFIX.v.txt; otherwise
    prints both vectors.
    """
    if n < 3:
        raise click.UsageError("n must be at least 3")
    u, v = worst_case_pair(n)
    out = ctx.obj["out"]
    if out is None:
        _emit(format_vector(u) + "\n" + format_vector(v), None)
    else:
        Path(out + ".u.txt").write_text(format_vector(u))
        Path(out + ".v.txt").write_text(format_vector(v))
        click.echo(f"wrote {out}.u.txt and {out}.v.txt")


@cli.command()
@click.argument("nmax", type=int)
@click.pass_context
def count(ctx, nmax):
    """Closed-form planar tree counts, with enumeration columns for n <= 10."""
    if nmax < 1:
        raise click.UsageError("nmax must be at least 1")
    rows = []
    for n in range(1, nmax + 1):
        formula = planar_tree_count(n)
        marked_formula = marked_planar_tree_count(n) if n >= 2 else 0
        if n <= 10:
            enum_total, enum_marked, _ = enumerate_planar_trees(n)
        else:
            enum_total, enum_marked = "", ""
        rows.append([n, formula, enum_total, marked_formula, enum_marked])
    header = ["n", "planar", "planar_enumerated", "marked", "marked_enumerated"]
    if ctx.obj["fmt"] == "csv":
        _emit(_csv_text(header, rows), ctx.obj["out"])
    else:
        _emit(
            json.dumps([dict(zip(header, r)) for r in rows], indent=2),
            ctx.obj["out"],
        )


@cli.command("random-pair")
@click.argument("n", type=int)
@click.pass_context
def random_pair(ctx, n):
    """A reproducible random generic pair of equidistant trees."""
    if n < 3:
        raise click.UsageError("n must be at least 3")
    seed = ctx.obj["seed"]
    t1, t2 = sample_generic_pair(n, SeededStream(seed))
    u, v = t1.to_ultrametric(), t2.to_ultrametric()
    report = {
        "n": n,
        "seed": seed,
        "u": [str(e) for e in u.entries],
        "v": [str(e) for e in v.entries],
        "newick_u": t1.newick(),
        "newick_v": t2.newick(),
    }
    if ctx.obj["decimal"]:
        report["u_decimal"] = [float(e) for e in u.entries]
        report["v_decimal"] = [float(e) for e in v.entries]
    _emit(json.dumps(report, indent=2), ctx.obj["out"])


@cli.command()
@click.option("-n", "sizes", type=int, multiple=True, required=True,
              help="Leaf count; repeat for a sweep.")
@click.option("--trials", type=int, default=2000, show_default=True)
@click.pass_context
def experiment(ctx, sizes, trials):
    """Monte-Carlo mean turning-point counts against the analytic bound.

    Emits CSV; with --out also writes a JSON sidecar (out + ".json") holding
    the exact rational bounds and the seed.
    """
    if trials < 1:
        raise click.UsageError("trials must be at least 1")
    seed = ctx.obj["seed"]
    reports = [
        essential_pairs_experiment(n, trials, seed, index_base=n * 10**6)
        for n in sizes
    ]
    text = _csv_text(EXPERIMENT_CSV_COLUMNS, [r.csv_row() for r in reports])
    out = ctx.obj["out"]
    _emit(text, out)
    if out is not None:
        sidecar = {
            "seed": seed,
            "trials": trials,
            "rows": [
                {
                    "n": r.n,
                    "mean_pi": r.mean,
                    "var": r.variance,
                    "ci99": r.ci99,
                    "bound_exact": str(r.bound_exact),
                    "bound": r.bound,
                }
                for r in reports
            ],
        }
        Path(out + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def main(argv=None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as e:
        sys.exit(e.exit_code)
    except click.UsageError as e:
        e.show()
        sys.exit(2)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except TheoremViolation as e:
        click.echo(f"theorem violation: {e}", err=True)
        sys.exit(3)
    except (
        NotUltrametricError,
        NewickError,
        NonGenericPairError,
        DimensionMismatch,
        ValueError,
        OSError,
    ) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
