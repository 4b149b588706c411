"""Command-line front end: run the analysis pipelines on instance files and
write reports, CSV data, and figures into an output directory.

Exit codes: 0 for a conclusive run, 1 for input or validation errors, and 2
for mathematically inconclusive outcomes (indeterminate classification
bands), which are distinct from operational failure.
"""

from __future__ import annotations

import argparse
import os
import sys as _sys
from dataclasses import dataclass

import numpy as np

from . import plots, reporting
from .circle import MonotoneCircleLift, invariant_measure, rotation_number
from .classification import (InconclusiveClassification, birkhoff_average,
                             classify, decompose, default_test_family)
from .holonomy import detect_compact_classes, displacement_rows
from .incoherent import (GraphConvergenceError, IncoherentParameters,
                         build_3d_system, build_stable_graph,
                         build_unstable_graph, compact_leaf_census, cone_check,
                         graph_rows, oddness_defect, sample_splitting,
                         slope_refinement)
from .line_actions import (UnsupportedInstanceError, conjugation_scaling,
                           invariant_measure as line_invariant_measure,
                           load_action, master_semiconjugacy,
                           translation_number)
from .systems import load_system, step

_VARIANTS = {"cos": "cos_x", "cos_x": "cos_x",
             "sin": "sin_x_minus_x", "sin_x_minus_x": "sin_x_minus_x"}


@dataclass
class RunConfig:
    subcommand: str
    input: str = None
    out: str = "out"
    iters: int = None
    depth: int = 80
    tol: float = 1e-6
    seed: int = 0
    grid: int = None
    variant: str = "cos"

    def grid_or(self, default: int) -> int:
        return self.grid if self.grid is not None else default

    def iters_or(self, default: int) -> int:
        return self.iters if self.iters is not None else default


def _provenance(cfg: RunConfig, **extra):
    block = reporting.provenance(subcommand=cfg.subcommand, input_path=cfg.input,
                                 depth=cfg.depth, tol=cfg.tol, seed=cfg.seed,
                                 grid=cfg.grid, iters=cfg.iters)
    block.update(extra)
    return block


def _emit(cfg: RunConfig, name: str, title: str, sections) -> str:
    outdir = reporting.ensure_dir(cfg.out)
    path = os.path.join(outdir, name)
    reporting.write_text(path, reporting.render_report(title, sections))
    return path


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(reporting.ensure_dir(cfg.out), name)


def parse_circle_map(text: str) -> MonotoneCircleLift:
    """Grammar: lines 'rotation <float>' and '<coeff> sin|cos <k>'."""
    theta = 0.0
    terms = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0].lower() == "rotation":
            theta = float(toks[1])
        elif len(toks) == 3 and toks[1] in ("sin", "cos"):
            fn = np.sin if toks[1] == "sin" else np.cos
            terms.append((float(toks[0]), fn, int(toks[2])))
        else:
            raise ValueError(f"malformed circle-map line: {line!r}")

    def f(x):
        out = x + theta
        for coeff, fn, k in terms:
            out = out + coeff * fn(2.0 * np.pi * k * x)
        return out

    return MonotoneCircleLift.from_function(f)


def load_circle_map(path: str) -> MonotoneCircleLift:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_circle_map(fh.read())


def _require_input(cfg: RunConfig) -> str:
    if cfg.input is None:
        raise ValueError(f"{cfg.subcommand} requires --input")
    if not os.path.exists(cfg.input):
        raise FileNotFoundError(f"input file not found: {cfg.input}")
    return cfg.input


def _classification_sections(cfg: RunConfig, report) -> list:
    case = {"case": report.case, "theta": report.theta,
            "n_leaves": report.n_leaves, "K": report.K, "U": report.U,
            "rotation_kind": (("rational" if report.rotation.is_rational
                               else "irrational")
                              if report.rotation else None)}
    if report.subcases:
        for i, sub in enumerate(report.subcases):
            case[f"subcase_{i}"] = "; ".join(
                f"{k}:{reporting.format_value(v)}" for k, v in sub.items())
    if report.irrational_routing:
        for k, v in report.irrational_routing.items():
            case[f"irrational_{k}"] = v
    return [("provenance", _provenance(cfg)),
            ("classification", case),
            ("witnesses", report.witnesses)]


def cmd_classify(cfg: RunConfig) -> int:
    system = load_system(_require_input(cfg))
    try:
        report = classify(system, depth=cfg.depth, tol=cfg.tol,
                          grid_size=cfg.grid_or(4096))
    except InconclusiveClassification as exc:
        _emit(cfg, "classify.txt", "classification report",
              [("provenance", _provenance(cfg)),
               ("inconclusive", {"reason": str(exc), **{
                   k: v for k, v in exc.diagnostics.items()
                   if not hasattr(v, "__len__") or isinstance(v, (str, tuple))}})])
        print("classification inconclusive:", exc)
        return 2
    _emit(cfg, "classify.txt", "classification report",
          _classification_sections(cfg, report))
    header, rows = displacement_rows(report.compact)
    reporting.write_csv(_out(cfg, "displacements.csv"), header, rows)
    plots.save_displacement_profile(report.compact,
                                    _out(cfg, "displacement_profile.png"))
    print(f"case = {report.case}")
    return 0


def cmd_decompose(cfg: RunConfig) -> int:
    system = load_system(_require_input(cfg))
    try:
        report = classify(system, depth=cfg.depth, tol=cfg.tol,
                          grid_size=cfg.grid_or(4096))
    except InconclusiveClassification as exc:
        print("classification inconclusive:", exc)
        return 2
    decomp = decompose(system, report, n_iters=cfg.iters_or(100_000),
                       seed=cfg.seed)
    rows = []
    for j, comp in enumerate(decomp.components):
        for entry in comp.table:
            rows.append([j, comp.kind, reporting.format_value(comp.support),
                         entry["name"], entry["mean"], entry["dispersion"],
                         entry["clt_band"]])
    reporting.write_csv(_out(cfg, "components.csv"),
                        ["component", "kind", "support", "test", "mean",
                         "dispersion", "clt_band"], rows)
    _emit(cfg, "decompose.txt", "ergodic decomposition report",
          [("provenance", _provenance(cfg)),
           ("classification", {"case": report.case, "theta": report.theta,
                               "n_leaves": report.n_leaves}),
           ("decomposition", {"n_components": len(decomp.components),
                              "n_orbits": decomp.n_orbits,
                              "n_iters": decomp.n_iters,
                              "tests": tuple(decomp.test_names)})])
    plots.save_component_means(decomp, _out(cfg, "component_means.png"))
    print(f"case = {report.case}; components = {len(decomp.components)}")
    return 0


def cmd_rotnum(cfg: RunConfig) -> int:
    lift = load_circle_map(_require_input(cfg))
    rho = rotation_number(lift, n_iter=cfg.iters_or(10**6))
    measure = invariant_measure(lift, n_iter=cfg.iters_or(10**6))
    kind = "rational" if rho.is_rational else "irrational"
    sections = [("provenance", _provenance(cfg)),
                ("rotation_number",
                 {"value": rho.value, "kind": kind,
                  "numerator": rho.rational.numerator if rho.is_rational else None,
                  "denominator": (rho.rational.denominator
                                  if rho.is_rational else None),
                  "periodic_point": rho.periodic_point,
                  "error_bound": rho.error_bound}),
                ("invariant_measure",
                 {"kind": "atomic" if measure.atoms else "continuous",
                  "n_atoms": len(measure.atoms or ())})]
    _emit(cfg, "rotnum.txt", "rotation number report", sections)
    xs = np.linspace(0.0, 1.0, 513)
    reporting.write_csv(_out(cfg, "circle_map.csv"), ["x", "lift", "displacement"],
                        np.column_stack([xs, lift(xs), lift(xs) - xs]))
    plots.save_circle_map(lift, _out(cfg, "circle_map.png"),
                          title=f"rho = {rho.value:.6f} ({kind})")
    print(f"rho = {rho.value} ({kind})")
    return 0


def cmd_holonomy(cfg: RunConfig) -> int:
    system = load_system(_require_input(cfg))
    report = detect_compact_classes(system, depth=cfg.depth, tol=cfg.tol,
                                    grid_size=cfg.grid_or(4096))
    header, rows = displacement_rows(report)
    reporting.write_csv(_out(cfg, "displacements.csv"), header, rows)
    _emit(cfg, "holonomy.txt", "su-holonomy report",
          [("provenance", _provenance(cfg)),
           ("loops", {"anchor": tuple(float(a) for a in report.anchor),
                      "tail_bound": report.tail_bound,
                      "min_max_displacement": report.min_max_displacement,
                      "max_displacement": report.max_displacement}),
           ("compact_candidates",
            {"fixed_intervals": report.fixed_intervals,
             "moving_intervals": report.moving_intervals,
             "indeterminate_fraction": report.indeterminate_fraction})])
    plots.save_displacement_profile(report, _out(cfg, "displacement_profile.png"))
    print(f"min-max displacement = {report.min_max_displacement:.3g}; "
          f"fixed intervals = {len(report.fixed_intervals)}")
    return 0


def cmd_plante(cfg: RunConfig) -> int:
    action = load_action(_require_input(cfg))
    mu = line_invariant_measure(action, seed=cfg.seed)
    taus = translation_number(action, mu)
    sections = [("provenance", _provenance(cfg)),
                ("instance", {"gamma": action.gamma,
                              "n_generators": len(action.generators),
                              "measure": mu.describe()}),
                ("translation_numbers",
                 {f"tau_{i}": t for i, t in enumerate(taus)})]
    lam = conjugation_scaling(action, taus, mu)
    master = master_semiconjugacy(action)
    sections.append(("scaling", {"lambda": lam}))
    sections.append(("master_semiconjugacy",
                     {"fixed_point": master.fixed_point,
                      "offset": master.offset,
                      "translation_residual": master.translation_residual,
                      "scaling_residual": master.scaling_residual}))
    _emit(cfg, "plante.txt", "line-action report", sections)
    xs = np.linspace(-6.0, 6.0, 241)
    reporting.write_csv(_out(cfg, "semiconjugacy.csv"), ["x", "P"],
                        np.column_stack([xs, [master.P(x) for x in xs]]))
    plots.save_line_action(master, _out(cfg, "semiconjugacy.png"))
    print(f"lambda = {lam}; fixed point = {master.fixed_point}")
    return 0


def cmd_hhu(cfg: RunConfig) -> int:
    if cfg.variant not in _VARIANTS:
        raise ValueError(f"--variant must be one of {sorted(_VARIANTS)}")
    params = IncoherentParameters(forcing=_VARIANTS[cfg.variant])
    grid = cfg.grid_or(2000)
    u_graph = build_unstable_graph(params, grid=grid)
    c_graph = build_stable_graph(params, grid=grid)
    system = build_3d_system(params)
    samples = sample_splitting(u_graph, c_graph)
    cone_ok, cone_k = cone_check(system, samples, return_k=True)
    census = compact_leaf_census(params)
    u_slopes = slope_refinement(params, "unstable_u", np.pi - 1e-3)
    c_slopes = slope_refinement(params, "stable_c", 1e-3)
    sections = [
        ("provenance", _provenance(cfg, variant=params.forcing)),
        ("graphs", {"u_residual": u_graph.residual,
                    "c_residual": c_graph.residual,
                    "u_at_zero": float(u_graph(0.0)),
                    "c_at_pi": float(c_graph(np.pi)),
                    "u_slopes_near_pi": tuple(u_slopes),
                    "c_slopes_near_zero": tuple(c_slopes)}),
        ("cone_check", {"passed": cone_ok, "k": cone_k,
                        "n_samples": len(samples)}),
        ("compact_leaves",
         {"x0_torus_invariant": census.x0_torus_invariant,
          "pi_torus_invariant": census.pi_torus_invariant,
          "all_sampled_leaves_escape": census.all_sampled_leaves_escape,
          "unique_compact_leaf": census.unique_compact_leaf})]
    if params.forcing == "sin_x_minus_x":
        sections[1][1]["oddness_defect"] = oddness_defect(params)
    _emit(cfg, "hhu.txt", "incoherent-example report", sections)
    for graph, name in ((u_graph, "u_graph.csv"), (c_graph, "c_graph.csv")):
        header, rows = graph_rows(graph)
        reporting.write_csv(_out(cfg, name), header, rows)
    reporting.write_csv(_out(cfg, "leaf_escapes.csv"),
                        ["offset", "steps_to_escape"],
                        [[b, s] for b, s in census.escapes])
    plots.save_invariant_graphs(u_graph, c_graph,
                                _out(cfg, "invariant_graphs.png"))
    print(f"cone check {'PASS' if cone_ok else 'FAIL'} (k = {cone_k}); "
          f"unique compact leaf = {census.unique_compact_leaf}")
    return 0


def cmd_orbit(cfg: RunConfig) -> int:
    system = load_system(_require_input(cfg))
    n = cfg.iters_or(2000)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    v = rng.random(system.base.dim)
    z = float(rng.random())
    rows = np.empty((n, system.base.dim + 1))
    point = (v, z)
    for i in range(n):
        rows[i, :system.base.dim] = point[0]
        rows[i, -1] = point[1]
        point = step(system, point)
    header = [f"v{i}" for i in range(system.base.dim)] + ["z"]
    reporting.write_csv(_out(cfg, "orbit.csv"), header, rows)
    _emit(cfg, "orbit.txt", "orbit sample report",
          [("provenance", _provenance(cfg)),
           ("orbit", {"n": n, "start_v": tuple(float(x) for x in v),
                      "start_z": z})])
    plots.save_orbit(np.column_stack([rows[:, 0], rows[:, -1]]),
                     _out(cfg, "orbit.png"))
    print(f"sampled {n} orbit points")
    return 0


_COMMANDS = {"classify": cmd_classify, "decompose": cmd_decompose,
             "rotnum": cmd_rotnum, "holonomy": cmd_holonomy,
             "plante": cmd_plante, "hhu": cmd_hhu, "orbit": cmd_orbit}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skewlab",
        description="numerical laboratory for circle-fibered skew products "
                    "over hyperbolic toral automorphisms")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    descriptions = {
        "classify": "conservative three-case classification of a system file",
        "decompose": "validate the ergodic decomposition of a system file",
        "rotnum": "rotation number of a circle-map file",
        "holonomy": "su-loop displacement census of a system file",
        "plante": "translation numbers and semiconjugacy of a line action",
        "hhu": "build the dynamically incoherent 3-torus example",
        "orbit": "sample an orbit of a system file",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc)
        p.add_argument("--input", help="instance file (.sys, .map, or .act)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--iters", type=int, default=None)
        p.add_argument("--depth", type=int, default=80)
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--grid", type=int, default=None)
        p.add_argument("--variant", default="cos",
                       help="hhu forcing: cos or sin_x_minus_x")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(subcommand=args.subcommand, input=args.input, out=args.out,
                    iters=args.iters, depth=args.depth, tol=args.tol,
                    seed=args.seed, grid=args.grid, variant=args.variant)
    try:
        return _COMMANDS[cfg.subcommand](cfg)
    except (FileNotFoundError, ValueError, NotImplementedError,
            UnsupportedInstanceError, GraphConvergenceError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    _sys.exit(main())
