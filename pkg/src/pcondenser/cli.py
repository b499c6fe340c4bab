"""
Command-line front end
======================

    pcondenser capacity  --config run.toml [--naive] [--output DIR] [--plot]
    pcondenser potential --config run.toml
    pcondenser green     --config run.toml
    pcondenser perron    --config run.toml [--bracket]
    pcondenser classify  --profile rn --n 3 --p 2
    pcondenser warnring  --n 3 --p 2 --c0 1 --c 2 --stages 5
    pcondenser selftest  [--samples 200] [--seed 0]

Every run writes summary.txt (key=value lines, also echoed to stdout) and CSV
artifacts to the output directory. Exit codes: 0 success, 1 rejected input,
2 solver failure, 3 internal-consistency failure, 64 usage error.
"""

import argparse
import math
import os
import sys

import numpy as np

from .capacity import (CondenserProblem, build_warning_ring, cap_Dp, condenser_capacity,
                       condenser_capacity_naive)
from .config import RunConfig, predicate_mask
from .errors import ConsistencyError, RejectionError, SolverError
from . import oracles
from .perron import (FREE, PINNED, BoundaryData, bracket_upper_lower, hf_solution,
                     perron_solution, regularity_probe)
from .potential import capacitary_potential, green_normalize, singular_function, \
    verify_level_identity
from . import report as rp

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_SOLVER = 2
EXIT_CONSISTENCY = 3
EXIT_USAGE = 64

DEFAULT_LEVEL_PAIRS = ((0.0, 0.5), (0.25, 0.75), (0.5, 1.0))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", help="output directory (default: $%s or ./%s)"
                        % (rp.OUTPUT_ENV, rp.DEFAULT_OUTPUT))
    common.add_argument("--plot", action="store_true", help="also render PNG figures")
    common.add_argument("--quiet", action="store_true", help="do not echo the summary")

    with_config = argparse.ArgumentParser(add_help=False, parents=[common])
    with_config.add_argument("--config", required=True, help="TOML run configuration")

    parser = _Parser(prog="pcondenser",
                     description="Condenser capacities, potentials, Green functions and "
                                 "Perron solutions on weighted graphs.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    cap = sub.add_parser("capacity", parents=[with_config], help="condenser capacity")
    cap.add_argument("--naive", action="store_true",
                     help="also report the one-step capacity without the E cap B_j limit")
    sub.add_parser("potential", parents=[with_config], help="capacitary potential")
    sub.add_parser("green", parents=[with_config], help="singular and Green function")
    per = sub.add_parser("perron", parents=[with_config], help="Perron solution")
    per.add_argument("--bracket", action="store_true",
                     help="also run the (heuristic) lower/upper bracket")

    cl = sub.add_parser("classify", parents=[common], help="hyperbolicity test")
    cl.add_argument("--profile", choices=("rn", "power", "csv", "config"), required=True)
    cl.add_argument("--n", type=int, help="dimension for --profile rn")
    cl.add_argument("--c", type=float, help="prefactor for --profile power")
    cl.add_argument("--q", type=float, help="exponent for --profile power")
    cl.add_argument("--csv", help="two-column (rho, mu) file for --profile csv")
    cl.add_argument("--config", help="run configuration for --profile config")
    cl.add_argument("--p", type=float, required=True)

    wr = sub.add_parser("warnring", parents=[common], help="nested-annuli construction")
    wr.add_argument("--n", type=int, required=True)
    wr.add_argument("--p", type=float, required=True)
    wr.add_argument("--c0", type=float, required=True)
    wr.add_argument("--c", type=float, nargs="+", required=True,
                    help="targets c_1 c_2 ...; a single value is repeated --stages times")
    wr.add_argument("--stages", type=int, default=None)

    st = sub.add_parser("selftest", parents=[common], help="randomized property suite")
    st.add_argument("--samples", type=int, default=200)
    st.add_argument("--seed", type=int, default=0)
    return parser


# -- helpers ------------------------------------------------------------------

class Run:
    """Output bookkeeping shared by the subcommands."""

    def __init__(self, args, cfg=None):
        cfg_dir = cfg.output.directory if cfg is not None else None
        self.outdir = rp.ensure_dir(rp.resolve_output_dir(args.output, cfg_dir))
        formats = cfg.output.formats if cfg is not None else ["csv"]
        self.plot = args.plot or "png" in formats
        self.quiet = args.quiet
        self.files = {}
        self.overlays = {}

    def path(self, name):
        return os.path.join(self.outdir, name)

    def emit(self, kind, rows, overlay=None):
        self.files.update(rp.emit_plotdata(rows, kind, self.outdir))
        if overlay is not None:
            self.overlays[kind] = overlay

    def field(self, graph, u, name="field.csv", column="u"):
        rp.write_csv(self.path(name), rp.field_header(graph, column), rp.field_rows(graph, u))

    def finish(self, record, title):
        if self.plot:
            from .plotting import render_all
            render_all(self.files, title, self.overlays)
        text = rp.write_summary(self.path("summary.txt"), record)
        if not self.quiet:
            sys.stdout.write(text)
        return EXIT_OK


def _load(args):
    cfg = RunConfig.load(args.config)
    graph = cfg.build_graph()
    return cfg, graph, cfg.build_schedule(), cfg.build_solver()


def _base_record(command, cfg, graph):
    return {"command": command, "space": cfg.space.kind, "p": cfg.problem.p,
            "nodes": graph.node_count, "edges": graph.edge_count}


def _omega(cfg, graph):
    if cfg.problem.omega is None:
        return np.arange(graph.node_count)
    return cfg.nodes("omega", graph)


def _stage_rows(radii, values):
    return [[k, r, v] for k, (r, v) in enumerate(zip(radii, values))]


# -- subcommands --------------------------------------------------------------

def cmd_capacity(args):
    cfg, graph, schedule, solver = _load(args)
    E = cfg.nodes("E", graph)
    omega = _omega(cfg, graph)
    problem = CondenserProblem(graph, E, omega, cfg.problem.e_unbounded)
    res = condenser_capacity(problem, schedule, solver)
    run = Run(args, cfg)
    rec = _base_record("capacity", cfg, graph)
    rec.update(res.record())
    rec["E_nodes"] = E.size
    rec["omega_nodes"] = omega.size
    if args.naive:
        rec["cap_naive"] = condenser_capacity_naive(problem, schedule, solver)
    if cfg.problem.F is not None:
        rec["cap_Dp"] = cap_Dp(graph, E, cfg.nodes("F", graph), solver)
    run.emit("stages", _stage_rows(res.radii, res.stage_values))
    run.field(graph, res.potential)
    return run.finish(rec, "condenser capacity")


def cmd_potential(args):
    cfg, graph, schedule, solver = _load(args)
    problem = CondenserProblem(graph, cfg.nodes("E", graph), _omega(cfg, graph),
                               cfg.problem.e_unbounded)
    pot = capacitary_potential(problem, schedule, solver)
    run = Run(args, cfg)
    rec = _base_record("potential", cfg, graph)
    rec["energy"] = pot.energy
    rec["stages"] = len(pot.stage_energies)
    pairs = cfg.problem.level_pairs or DEFAULT_LEVEL_PAIRS
    rows = []
    for a, b in pairs:
        lv = verify_level_identity(pot, a, b, solver)
        rows.append([a, b, lv.ratio, lv.exact])
        rec[f"ratio_{a:g}_{b:g}"] = lv.ratio
    radii = schedule.radii if schedule is not None else [math.inf]
    run.emit("stages", _stage_rows(radii, pot.stage_energies))
    run.emit("level_pairs", rows)
    run.field(graph, pot.field)
    return run.finish(rec, "capacitary potential")


def _profile_center(cfg, graph, x0_node):
    if cfg.space.kind == "radial":
        return np.zeros(1)
    return graph.positions[x0_node]


def cmd_green(args):
    cfg, graph, schedule, solver = _load(args)
    if cfg.problem.x0 is None:
        raise RejectionError("problem.x0 is required for green")
    x0 = graph.nearest_node(cfg.problem.x0)
    omega = _omega(cfg, graph)
    run = Run(args, cfg)
    rec = _base_record("green", cfg, graph)
    sing = singular_function(graph, omega, x0, schedule, solver)
    radii = list(schedule.radii) if schedule is not None else [math.inf]
    if not sing.exists:
        rec.update(sing.record())
        rec["reason"] = sing.reason
        run.emit("stages", _stage_rows(radii, sing.stage_capacities))
        return run.finish(rec, "singular function (does not exist)")
    green = green_normalize(sing, solver)
    rec["exists"] = True
    rec.update(green.record())
    rec["level_ratio_max_dev"] = max(abs(r - 1) for _, _, r, _ in green.level_audit)
    run.emit("stages", _stage_rows(green.radii, green.stage_capacities))
    run.emit("levels", [list(row) for row in green.level_audit])
    d = graph.distances_from(_profile_center(cfg, graph, x0))
    inside = np.zeros(graph.node_count, dtype=bool)
    inside[omega] = True
    prof = rp.radial_profile_rows(d[inside], green.field[inside])
    overlay = None
    n = cfg.space.n if cfg.space.kind == "radial" else cfg.space.dimension
    if cfg.space.weight == "constant" and n is not None and 1 < graph.p < n:
        rho = np.array([r[0] for r in prof if r[0] > 0])
        overlay = (rho, oracles.rn_green(n, graph.p, rho), "R^n Green function")
    run.emit("profile", prof, overlay)
    run.field(graph, green.field)
    return run.finish(rec, "Green function")


def _boundary_data(cfg, graph, omega, mode):
    n = graph.node_count
    values = np.full(n, np.nan)
    outside = np.ones(n, dtype=bool)
    outside[omega] = False
    # first matching rule wins
    for rule in reversed(cfg.problem.boundary or []):
        values[predicate_mask(rule["region"], graph) & outside] = rule["value"]
    return BoundaryData(values, cfg.problem.value_at_infinity, mode)


def cmd_perron(args):
    cfg, graph, schedule, solver = _load(args)
    omega = _omega(cfg, graph)
    mode = cfg.problem.shell_mode
    data = _boundary_data(cfg, graph, omega, mode)
    run = Run(args, cfg)
    rec = _base_record("perron", cfg, graph)
    rec["mode"] = mode
    if mode == PINNED:
        res = perron_solution(graph, omega, data, schedule, solver)
    else:
        res = hf_solution(graph, omega, data, schedule, solver)
    inside = np.zeros(graph.node_count, dtype=bool)
    inside[omega] = True
    vals = res.field[inside & np.isfinite(res.field)]
    rec.update({"stages": len(res.stage_fields), "converged": res.converged,
                "extrapolated": res.extrapolated,
                "field_min": float(vals.min()) if vals.size else math.nan,
                "field_max": float(vals.max()) if vals.size else math.nan})
    if args.bracket and schedule is not None:
        br = bracket_upper_lower(graph, omega, data, schedule, solver)
        rec["bracket_width"] = br.width
        rec["bracket_note"] = br.label
    if cfg.problem.point is not None:
        point = "inf" if cfg.problem.point == "inf" else graph.nearest_node(cfg.problem.point)
        verdict = regularity_probe(graph, omega, point, schedule, solver)
        rec["regularity"] = verdict.verdict
        rec["regularity_limit"] = verdict.limit
    center = np.zeros(1) if cfg.space.kind == "radial" else (
        schedule.base if schedule is not None else graph.positions.mean(axis=0))
    d = graph.distances_from(np.asarray(center, dtype=float))
    run.emit("profile", rp.radial_profile_rows(d[inside], res.field[inside]))
    run.emit("changes", [[k + 1, r, c] for k, (r, c) in
                         enumerate(zip(res.radii[1:], res.stage_change))])
    run.field(graph, res.field)
    return run.finish(rec, f"Perron solution ({mode} shell)")


def _read_profile_csv(path):
    try:
        data = np.genfromtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise RejectionError(f"cannot read profile {path}: {exc}") from None
    data = data[np.all(np.isfinite(data), axis=1)]
    if data.shape[1] != 2:
        raise RejectionError("profile CSV must have two columns (rho, mu)")
    return oracles.VolumeGrowthProfile(rho=data[:, 0], mu=data[:, 1])


def cmd_classify(args):
    cfg = None
    if args.profile == "rn":
        if args.n is None:
            raise RejectionError("--profile rn needs --n")
        profile = oracles.VolumeGrowthProfile.euclidean(args.n)
    elif args.profile == "power":
        if args.c is None or args.q is None:
            raise RejectionError("--profile power needs --c and --q")
        profile = oracles.VolumeGrowthProfile(c=args.c, q=args.q)
    elif args.profile == "csv":
        if not args.csv:
            raise RejectionError("--profile csv needs --csv")
        profile = _read_profile_csv(args.csv)
    else:
        if not args.config:
            raise RejectionError("--profile config needs --config")
        cfg = RunConfig.load(args.config)
        graph = cfg.build_graph()
        if cfg.schedule is None:
            raise RejectionError("--profile config needs a [schedule] for the sample radii")
        profile = oracles.profile_from_graph(graph, np.asarray(cfg.schedule.base),
                                             cfg.schedule.radii)
    verdict = oracles.classify_hyperbolicity(profile, args.p)
    run = Run(args, cfg)
    rec = {"command": "classify", "profile": args.profile, "p": args.p,
           "verdict": verdict.verdict, "integral": verdict.integral,
           "decay_exponent": verdict.exponent, "branch": verdict.branch}
    rho = profile.rho if not profile.analytic else np.geomspace(1.0, 1e3, 31)
    run.emit("volume", [[r, float(profile(r))] for r in rho])
    return run.finish(rec, "volume growth")


def cmd_warnring(args):
    targets = list(args.c)
    if len(targets) == 1 and args.stages:
        targets = targets * args.stages
    ring = build_warning_ring(targets, args.c0, args.n, args.p)
    caps = ring.stage_capacities()
    err = max(abs(a - b) for a, b in zip(caps, ring.targets))
    nested = all(r < s for r, s in ring.rings) and all(
        s_next < r for (r, _), (_, s_next) in zip(ring.rings, ring.rings[1:]))
    below = all(r < 2.0 ** -(j + 1) for j, (r, _) in enumerate(ring.rings))
    run = Run(args)
    rec = {"command": "warnring", "n": args.n, "p": args.p, "c0": args.c0,
           "stages": len(ring.rings), "s1": ring.s1, "limit_capacity": ring.limit_capacity(),
           "max_target_error": err, "nested": nested, "r_below_2^-j": below}
    run.emit("rings", [[j + 1, r, s, t, c] for j, ((r, s), t, c) in
                       enumerate(zip(ring.rings, ring.targets, caps))])
    if err > 1e-10 or not nested:
        run.finish(rec, "warning ring")
        raise ConsistencyError(f"warning ring check failed: error {err:.3e}, nested={nested}")
    return run.finish(rec, "warning ring")


def cmd_selftest(args):
    from .selftest import run_oracle_checks, run_property_suite
    run = Run(args)
    rec = {"command": "selftest"}
    failures = []
    for name, ok, detail in run_oracle_checks():
        rec[f"oracle_{name}"] = "pass" if ok else f"FAIL ({detail})"
        if not ok:
            failures.append(name)
    suite = run_property_suite(args.samples, args.seed)
    rec.update(suite.summary())
    for name, detail in suite.violations[:20]:
        failures.append(name)
        sys.stderr.write(f"violation {name}: {detail}\n")
    rec["status"] = "pass" if not failures else "fail"
    run.finish(rec, "selftest")
    if failures:
        raise ConsistencyError(f"{len(failures)} selftest failure(s)")
    return EXIT_OK


COMMANDS = {"capacity": cmd_capacity, "potential": cmd_potential, "green": cmd_green,
            "perron": cmd_perron, "classify": cmd_classify, "warnring": cmd_warnring,
            "selftest": cmd_selftest}


def run(argv=None):
    """Parse argv, dispatch, and map errors onto exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except RejectionError as exc:
        sys.stderr.write(f"rejected: {exc}\n")
        return EXIT_REJECTED
    except SolverError as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    except ConsistencyError as exc:
        sys.stderr.write(f"consistency failure: {exc}\n")
        return EXIT_CONSISTENCY


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
