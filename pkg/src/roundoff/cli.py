"""Command line entry point: ``roundoff <command> [options]``."""

import argparse
import sys
from pathlib import Path

from .diagnostics import bg_report
from .errors import RoundoffError
from .fem import solve_dirichlet
from .geometry import construct_rounded_domain, write_polyline, write_svg
from .harness import (
    ExperimentConfig,
    convergence_study,
    emit_plots,
    make_polygon,
    make_source,
    rounding_params,
    run_sweep,
)
from .mesh import SizingField, mesh_domain, mesh_quality, write_mesh
from .norms import CSV_COLUMNS, ratio_report
from .weights import WeightFunction

COMMANDS = ("construct", "mesh", "solve", "norms", "diagnose", "sweep", "converge")


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _rho(text):
    return text if text == "auto" else float(text)


def build_parser():
    p = argparse.ArgumentParser(prog="roundoff", description="Rounded polygon families and uniform weighted estimates.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with experiment settings")
    p.add_argument("--polygon", help="preset name (square, lshape, star5) or JSON vertex file")
    p.add_argument("--rho", type=_rho)
    p.add_argument("--rho-prime", type=_rho)
    p.add_argument("--n", type=int, default=None, help="family member for single-domain commands")
    p.add_argument("--n-list", type=_int_list)
    p.add_argument("--a-list", type=_float_list)
    p.add_argument("--source")
    p.add_argument("--h-max", type=float)
    p.add_argument("--h-min", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--order", type=int, choices=(1, 2))
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--output", "-o")
    p.add_argument("--no-plots", action="store_true")
    return p


def _config(args):
    data = ExperimentConfig.from_json(args.config).__dict__.copy() if args.config else {}
    if args.polygon is not None:
        path = Path(args.polygon)
        if path.suffix == ".json" and path.exists():
            import json

            data["polygon"] = json.loads(path.read_text())
        else:
            data["polygon"] = args.polygon
    for key in ("rho", "rho_prime", "n_list", "a_list", "source", "h_max", "h_min", "beta", "order", "seed", "samples", "output"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    return ExperimentConfig(**data)


def _single(config, args):
    polygon = make_polygon(config.polygon)
    params = rounding_params(config, polygon)
    n = args.n if args.n is not None else config.n_list[0]
    domain = construct_rounded_domain(polygon, params.at(n))
    return domain, WeightFunction.for_domain(domain)


def _mesh(config, domain, w):
    return mesh_domain(domain, SizingField(config.h_max, config.h_min, config.beta, w), order=config.order)


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "sweep":
            table = run_sweep(config)
            if not args.no_plots and any(r.ok for r in table.rows):
                emit_plots(table, out, config)
            for r in table.rows:
                print(f"n={r.n} a={r.a:g} status={r.status} ratio={r.ratio:.6g}")
            return 1 if table.errored else 0
        if args.command == "converge":
            table = convergence_study(config)
            for r in table.rows:
                print(f"n={r.n} l2_diff={r.l2_diff:.6g}{' floor' if r.floor else ''}")
            return 0
        if args.command == "diagnose":
            polygon = make_polygon(config.polygon)
            rep = bg_report(polygon, rounding_params(config, polygon), config.n_list, samples=config.samples)
            rep.to_csv(out / "diagnostics.csv")
            for r in rep.rows:
                print(f"n={r.n} width={r.width_sup:.6g} reach={r.reach_min:.6g} flags={','.join(r.flags) or '-'}")
            return 0 if rep.clean else 1
        domain, w = _single(config, args)
        if args.command == "construct":
            write_svg(domain, out / "domain.svg")
            write_polyline(domain, out / "boundary.txt")
            print(f"n={domain.n} pieces={len(domain.pieces)} area={domain.area():.10g}")
            return 0
        mesh = _mesh(config, domain, w)
        if args.command == "mesh":
            write_mesh(mesh, out / "mesh.txt")
            q = mesh_quality(mesh)
            print(f"elements={q['n_elements']} nodes={q['n_nodes']} min_angle={q['min_angle']:.3f}")
            return 0
        f = make_source(config, domain.parent)
        sol = solve_dirichlet(mesh, config.order, f)
        if args.command == "solve":
            write_mesh(mesh, out / "mesh.txt")
            sol.export(out / "solution.txt")
            print(f"dofs={int((~sol.dirichlet).sum())} cg_iterations={sol.iterations}")
            return 0
        lines = [",".join(CSV_COLUMNS)]
        for a in config.a_list:
            lines.append(ratio_report(domain, mesh, sol, f, w, a, config.gagliardo_s).csv_row())
        (out / "norms.csv").write_text("\n".join(lines) + "\n")
        print("\n".join(lines))
        return 0
    except RoundoffError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
