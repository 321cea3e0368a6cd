import csv
import functools
import json
import math
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, List, Optional

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from src import __version__
from src.config import configure, load_settings
from src.engine.errors import EXIT_CHECK_FAILED, EXIT_INPUT_ERROR, BorelError, SchemaError
from src.engine.ode import characteristic_roots, datum_for, poincare_solution
from src.engine.oracles import airy_ai, bessel_k, hyp2f1
from src.engine.plane import VolterraOperator
from src.engine.problems import cantilever_residual
from src.engine.resurgence import REGULAR, regularity_verdict, stokes_constant
from src.engine.specs import ProblemSpecFile, load_spec, parse_coefficient, parse_complex, validate_spec
from src.engine.suite import TAGS, run_suite, summary
from src.engine.thimble import critical_data, monomial_closed_form, projection_identity, trace_length, trace_thimble
from src.logging_config import get_logger, setup_logging

SCHEMA_VERSION = 1

console = Console()
err_console = Console(stderr=True)
logger = get_logger("borelsum.cli")


# ==================== output ====================

def _plain(value: Any) -> Any:
    """JSON-safe copy: complex → [re, im], Fraction → "p/q", non-finite floats → null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [_plain(float(value.real)), _plain(float(value.imag))]
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _emit(payload: dict, out: Optional[str] = None):
    text = json.dumps(_plain({"schema": SCHEMA_VERSION, **payload}), sort_keys=True, indent=2)
    if out is None:
        click.echo(text)
        return
    path = Path(out)
    path.write_text(text + "\n")
    meta = {"created": datetime.now(timezone.utc).isoformat(), "version": __version__, "argv": sys.argv[1:]}
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    err_console.print(f"[green]wrote[/green] {path}")


def guarded(func: Callable) -> Callable:
    """Engine errors become a JSON error object on stdout and the error's exit code."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except BorelError as e:
            logger.error_with("command failed", code=e.code, error=e.message)
            click.echo(json.dumps(_plain({"schema": SCHEMA_VERSION, "error": e.to_dict()}), sort_keys=True, indent=2))
            sys.exit(e.exit_code)
        except ValueError as e:
            logger.error_with("command failed", code="invalid_argument", error=str(e))
            error = {"code": "invalid_argument", "message": str(e), "details": {}}
            click.echo(json.dumps({"schema": SCHEMA_VERSION, "error": error}, sort_keys=True, indent=2))
            sys.exit(EXIT_INPUT_ERROR)
    return wrapper


def _z_list(raw: Optional[str]) -> Optional[List[complex]]:
    if raw is None:
        return None
    points = [parse_complex(p) for p in raw.split(",") if p.strip()]
    if not points:
        raise SchemaError("--z needs at least one point")
    return points


def _write_samples(path: str, psi):
    t = psi.grid.flat_nodes
    zeta = psi.zeta_nodes.ravel()
    values = psi.position_values().ravel()
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "zeta_re", "zeta_im", "psi_re", "psi_im"])
        for row in zip(t, zeta.real, zeta.imag, values.real, values.imag):
            writer.writerow([repr(float(x)) for x in row])
    err_console.print(f"[green]wrote[/green] {path}")


# ==================== commands ====================

@click.group()
@click.version_option(version=__version__, prog_name="borelsum")
@click.option("--threads", type=int, default=None, help="Worker threads for parallel sections")
@click.option("--picard-tol", type=float, default=None, help="Picard update tolerance")
@click.option("--laplace-tol", type=float, default=None, help="Laplace quadrature/tail tolerance")
@click.option("--log-level", default=None, help="Log level (also BORELSUM_LOG_LEVEL)")
@click.option("--log-json", is_flag=True, help="JSON log lines on stderr")
@click.pass_context
@guarded
def main(ctx: click.Context, threads, picard_tol, laplace_tol, log_level, log_json):
    """borelsum - Borel summation of level-1 ODE solutions and thimble integrals."""
    setup_logging(level=log_level, json_format=log_json or None)
    ctx.obj = configure(load_settings(threads=threads, picard_tol=picard_tol, laplace_tol=laplace_tol))


def _with_family_parameters(spec: ProblemSpecFile, omega: Optional[str], mn: Optional[str]) -> ProblemSpecFile:
    if omega is None and mn is None:
        return spec
    if spec.operator is None:
        raise SchemaError("--omega/--mn need an operator problem file")
    update = {}
    if mn is not None:
        if spec.operator.family != "bessel":
            raise SchemaError("--mn applies to the bessel family", {"family": spec.operator.family})
        update["order"] = mn
    if omega is not None:
        if spec.operator.family != "cantilever":
            raise SchemaError("--omega applies to the cantilever family", {"family": spec.operator.family})
        update["omega"] = omega
    return spec.model_copy(update={"operator": spec.operator.model_copy(update=update)})


@main.command()
@click.option("--spec", "spec_path", required=True, help="Problem file (path or bundled name)")
@click.option("--root", default=None, help="Characteristic root α (e.g. 1, -1, 0.5+2i)")
@click.option("--order", type=click.IntRange(1, 60), default=8, help="Poincaré order to report")
@click.option("--z", "z_raw", default=None, help="Comma-separated z samples")
@click.option("--theta", type=float, default=None, help="Ray angle from α")
@click.option("--omega", default=None, help="Cantilever ω")
@click.option("--mn", default=None, help="Bessel order m/n")
@click.option("--tol-scale", type=float, default=1.0, help="Multiply every check tolerance")
@click.option("--csv", "csv_path", default=None, help="Write Borel-plane samples as CSV")
@click.option("--out", default=None, help="Write the JSON report here instead of stdout")
@click.pass_obj
@guarded
def ode(settings, spec_path, root, order, z_raw, theta, omega, mn, tol_scale, csv_path, out):
    """Sum the formal solution at a characteristic root and check its regularity."""
    spec = _with_family_parameters(load_spec(spec_path), omega, mn)
    if spec.kind != "ode":
        raise SchemaError("ode needs an ode problem file", {"kind": spec.kind})
    problem = spec.to_problem(root=parse_complex(root) if root is not None else None, theta=theta)
    z_points = _z_list(z_raw) or spec.z_points
    op = problem.operator
    datum = datum_for(op, problem.alpha)

    report = regularity_verdict(problem, z_points, spec.tolerances, tol_scale, settings)
    payload = {
        "command": "ode",
        "problem": problem.name,
        "operator": op.to_dict(),
        "characteristic": [d.to_dict() for d in characteristic_roots(op)],
        "datum": datum.to_dict(),
        "poincare": poincare_solution(op, datum, order).to_dict(),
        "report": report.to_dict(),
    }
    if spec.operator.family == "cantilever":
        omega_value = float(parse_coefficient(spec.operator.omega or 1))
        payload["universal"] = {
            "alpha": complex(datum.alpha),
            "volterra_residual": cantilever_residual(omega_value, complex(datum.alpha)),
        }
    if csv_path and report.psi is not None:
        _write_samples(csv_path, report.psi)
    _emit(payload, out)
    if report.verdict != REGULAR:
        sys.exit(EXIT_CHECK_FAILED)


@main.command()
@click.option("--spec", "spec_path", default=None, help="Thimble problem file")
@click.option("--f", "f_expr", default=None, help='Phase polynomial, e.g. "4u^3-3u"')
@click.option("--g", "g_expr", default=None, help="1-form polynomial (default 1)")
@click.option("--a", "crit_point", default=None, help="Critical point")
@click.option("--theta", type=float, default=None, help="Ray angle from f(a)")
@click.option("--orientation", type=click.Choice(["1", "-1"]), default=None)
@click.option("--z", "z_raw", default=None, help="Comma-separated z samples")
@click.option("--tol-scale", type=float, default=1.0)
@click.option("--polylines", default=None, help="Write the traced thimble as polyline JSON")
@click.option("--out", default=None, help="Write the JSON report here instead of stdout")
@click.pass_obj
@guarded
def thimble(settings, spec_path, f_expr, g_expr, crit_point, theta, orientation, z_raw, tol_scale,
            polylines, out):
    """Trace a thimble, compare direct and projected integrals, and check regularity."""
    if spec_path:
        spec = load_spec(spec_path)
        if spec.kind != "thimble":
            raise SchemaError("thimble needs a thimble problem file", {"kind": spec.kind})
        section = spec.thimble.model_dump(exclude_none=True)
    elif f_expr:
        spec, section = None, {"f": f_expr}
    else:
        raise SchemaError("give --spec or --f")
    section.update({k: v for k, v in (("f", f_expr), ("g", g_expr), ("a", crit_point)) if v is not None})
    if orientation is not None:
        section["orientation"] = int(orientation)
    data = {"kind": "thimble", "thimble": section, "z": [3, 5, 8]}
    if spec is not None:
        data.update(name=spec.name, theta=spec.theta, z=spec.z, tolerances=spec.tolerances)
    data = validate_spec({k: v for k, v in data.items() if v is not None}, spec_path or "<command line>")

    problem = data.to_problem(theta=theta)
    target = problem.spec
    z_points = _z_list(z_raw) or data.z_points
    report = regularity_verdict(problem, z_points, data.tolerances, tol_scale, settings)
    payload = {
        "command": "thimble",
        "thimble": target.to_dict(),
        "critical_points": [c.to_dict() for c in critical_data(target.f)],
        "projection": projection_identity(target, z_points, allow_degenerate=problem.allow_degenerate,
                                          settings=settings),
        "report": report.to_dict(),
    }
    try:
        payload["closed_form"] = [{"z": z, "value": monomial_closed_form(target, z)} for z in z_points]
    except BorelError:
        pass
    if polylines:
        traced = trace_thimble(target, trace_length(target, z_points), allow_degenerate=problem.allow_degenerate,
                               settings=settings)
        Path(polylines).write_text(json.dumps({"schema": SCHEMA_VERSION, **traced.to_polylines()}) + "\n")
        err_console.print(f"[green]wrote[/green] {polylines}")
    _emit(payload, out)
    if report.verdict != REGULAR:
        sys.exit(EXIT_CHECK_FAILED)


@main.command()
@click.option("--spec", "spec_path", required=True, help="ODE problem file")
@click.option("--alpha", required=True, help="Root whose solution is continued")
@click.option("--beta", required=True, help="Root on the cut")
@click.option("--theta", type=float, default=None, help="Cut direction (default arg(β-α))")
@click.option("--eps", type=float, default=None, help="Lateral offset of the two rays")
@click.option("--mn", default=None, help="Bessel order m/n")
@click.option("--out", default=None)
@click.pass_obj
@guarded
def stokes(settings, spec_path, alpha, beta, theta, eps, mn, out):
    """Measure the Stokes constant of the jump across the cut from α through β."""
    spec = _with_family_parameters(load_spec(spec_path), None, mn)
    if spec.kind != "ode":
        raise SchemaError("stokes needs an ode problem file", {"kind": spec.kind})
    alpha, beta = parse_complex(alpha), parse_complex(beta)
    theta = theta if theta is not None else float(np.angle(beta - alpha))
    op = spec.operator.build()
    measurement = stokes_constant(VolterraOperator.at(op, alpha), alpha, beta, theta, eps, settings)
    payload = {"command": "stokes", "operator": op.to_dict(), "stokes": measurement.to_dict()}
    if spec.operator.family == "bessel":
        order = float(parse_coefficient(spec.operator.order or "1/3"))
        sign = 1.0 if math.cos(measurement.theta) < 0 else -1.0
        payload["expected"] = sign * 2.0 * math.cos(math.pi * order)
    _emit(payload, out)


@main.command()
@click.option("--all", "run_all", is_flag=True, help="Run every check (the default)")
@click.option("--only", multiple=True, help=f"Tag or check name; tags: {', '.join(TAGS)}")
@click.option("--tol-scale", type=float, default=1.0, help="Multiply every threshold")
@click.option("--out", default=None, help="Also write the rows as JSON")
@click.pass_obj
@guarded
def verify(settings, run_all, only, tol_scale, out):
    """Run the acceptance suite; exit 0 only when every row passes."""
    results = run_suite(None if run_all else list(only), tol_scale=tol_scale, settings=settings)

    table = Table(title="borelsum acceptance")
    table.add_column("Check")
    table.add_column("Tag", style="dim")
    table.add_column("Measured", justify="right")
    table.add_column("Threshold", justify="right")
    table.add_column("Status")
    colors = {"pass": "green", "inconclusive": "yellow", "fail": "red"}
    for r in results:
        measured = f"{r.measured:.3e}" if math.isfinite(r.measured) else "-"
        table.add_row(r.name, r.tag, measured, f"{r.threshold * tol_scale:.1e}",
                      f"[{colors[r.status]}]{r.status}[/{colors[r.status]}]")
    console.print(table)
    counts = summary(results)
    console.print(f"{counts['pass']} passed, {counts['inconclusive']} inconclusive, {counts['fail']} failed")

    if out:
        _emit({"command": "verify", "tol_scale": tol_scale, "results": [r.to_dict() for r in results]}, out)
    if counts["pass"] != len(results):
        sys.exit(EXIT_CHECK_FAILED)


# ==================== oracles ====================

@main.group()
def oracle():
    """Reference values from independent quadratures."""


@oracle.command("bessel-k")
@click.option("--mu", type=float, required=True)
@click.option("--z", "z_raw", required=True)
@guarded
def oracle_bessel_k(mu, z_raw):
    z = parse_complex(z_raw)
    _emit({"command": "oracle bessel-k", "input": {"mu": mu, "z": z}, "result": bessel_k(mu, z).to_dict()})


@oracle.command("2f1")
@click.option("--a", type=float, required=True)
@click.option("--b", type=float, required=True)
@click.option("--c", type=float, required=True)
@click.option("--x", "x_raw", required=True)
@guarded
def oracle_hyp2f1(a, b, c, x_raw):
    x = parse_complex(x_raw)
    _emit({"command": "oracle 2f1", "input": {"a": a, "b": b, "c": c, "x": x},
           "result": hyp2f1(a, b, c, x).to_dict()})


@oracle.command("airy")
@click.option("--y", type=float, required=True)
@guarded
def oracle_airy(y):
    _emit({"command": "oracle airy", "input": {"y": y}, "result": airy_ai(y).to_dict()})


if __name__ == "__main__":
    main()
