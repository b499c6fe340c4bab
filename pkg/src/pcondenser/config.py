"""
Run configuration
=================

A run is described by a TOML file with the sections ``[space]``,
``[problem]``, ``[schedule]`` (optional), ``[solver]`` (optional) and
``[output]`` (optional). Node sets are geometric predicates::

    E = { kind = "ball", center = [0.0], radius = 1.0, closed = true }
    omega = { kind = "ball", center = [0.0], radius = 3.0 }

Predicate kinds: ``all``, ``ball`` (center, radius, closed), ``annulus``
(center, inner, outer), ``halfspace`` (axis, threshold, side = "above" |
"below", strict), ``indices`` (nodes), ``complement`` (of), ``union`` and
``intersection`` (of = [...]).

Space kinds: ``grid`` (dimension, lo, hi, spacing), ``radial`` (n, r_min,
r_max, spacing) and ``weighted1d`` (lo, hi, spacing). The optional
``weight`` is ``"constant"``, ``"exp"`` (exp(rate * x_axis)),
``"halfline_exp"`` or ``"power"`` (|x|^rate), with ``weight_rate``.
"""

from dataclasses import asdict, dataclass, field, fields
import math
import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .errors import RejectionError
from .model_space import (ExhaustionSchedule, GridSpec, RadialSpace, build_grid,
                          constant_weight, exp_weight, halfline_exp_weight, mask_to_set,
                          power_weight, radial_graph)
from .solver import SolverConfig

SPACE_KINDS = ("grid", "radial", "weighted1d")
WEIGHTS = ("constant", "exp", "halfline_exp", "power")
PREDICATE_KINDS = ("all", "ball", "annulus", "halfspace", "indices", "complement",
                   "union", "intersection")
SHELL_MODES = ("pinned", "free")


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    if isinstance(d, list):
        return [_drop_none(v) for v in d]
    return d


def _floats(seq, name):
    try:
        return [float(x) for x in seq]
    except TypeError:
        raise RejectionError(f"{name} must be a list of numbers") from None


# -- predicates ---------------------------------------------------------------

def validate_predicate(pred, where="predicate"):
    """Normalize a predicate table; raises RejectionError when malformed."""
    if not isinstance(pred, dict) or "kind" not in pred:
        raise RejectionError(f"{where}: expected a table with a 'kind' key")
    kind = pred["kind"]
    if kind not in PREDICATE_KINDS:
        raise RejectionError(f"{where}: unknown predicate kind {kind!r}")
    out = {"kind": kind}
    if kind == "ball":
        out["center"] = _floats(pred.get("center", [0.0]), f"{where}.center")
        out["radius"] = float(pred["radius"]) if "radius" in pred else _missing(where, "radius")
        out["closed"] = bool(pred.get("closed", False))
        if not out["radius"] > 0:
            raise RejectionError(f"{where}: radius must be positive")
    elif kind == "annulus":
        out["center"] = _floats(pred.get("center", [0.0]), f"{where}.center")
        out["inner"] = float(pred.get("inner", 0.0))
        out["outer"] = float(pred["outer"]) if "outer" in pred else _missing(where, "outer")
        if not out["outer"] > out["inner"] >= 0:
            raise RejectionError(f"{where}: need 0 <= inner < outer")
    elif kind == "halfspace":
        out["axis"] = int(pred.get("axis", 0))
        out["threshold"] = float(pred.get("threshold", 0.0))
        out["side"] = pred.get("side", "above")
        out["strict"] = bool(pred.get("strict", True))
        if out["side"] not in ("above", "below"):
            raise RejectionError(f"{where}: side must be 'above' or 'below'")
    elif kind == "indices":
        nodes = pred.get("nodes")
        if nodes is None:
            _missing(where, "nodes")
        out["nodes"] = [int(i) for i in nodes]
    elif kind == "complement":
        if "of" not in pred:
            _missing(where, "of")
        out["of"] = validate_predicate(pred["of"], f"{where}.of")
    elif kind in ("union", "intersection"):
        parts = pred.get("of")
        if not isinstance(parts, list) or not parts:
            raise RejectionError(f"{where}: 'of' must be a nonempty list")
        out["of"] = [validate_predicate(q, f"{where}.of[{k}]") for k, q in enumerate(parts)]
    return out


def _missing(where, key):
    raise RejectionError(f"{where}: missing key {key!r}")


def predicate_mask(pred, graph):
    """Boolean node mask of a validated predicate."""
    n = graph.node_count
    kind = pred["kind"]
    if kind == "all":
        return np.ones(n, dtype=bool)
    if kind == "indices":
        mask = np.zeros(n, dtype=bool)
        idx = np.asarray(pred["nodes"], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise RejectionError("predicate node index out of range")
        mask[idx] = True
        return mask
    if kind == "complement":
        return ~predicate_mask(pred["of"], graph)
    if kind == "union":
        return np.logical_or.reduce([predicate_mask(q, graph) for q in pred["of"]])
    if kind == "intersection":
        return np.logical_and.reduce([predicate_mask(q, graph) for q in pred["of"]])
    if graph.positions is None:
        raise RejectionError("geometric predicates need node positions")
    if kind == "halfspace":
        axis = pred["axis"]
        if not 0 <= axis < graph.positions.shape[1]:
            raise RejectionError("halfspace axis out of range")
        x = graph.positions[:, axis]
        t = pred["threshold"]
        if pred["side"] == "above":
            return x > t if pred["strict"] else x >= t
        return x < t if pred["strict"] else x <= t
    d = graph.distances_from(np.asarray(pred["center"], dtype=float))
    # grid coordinates are exact multiples of h; a relative slack keeps
    # nodes on a sphere of radius r on the intended side
    tol = 1e-9 * max(1.0, float(np.max(np.abs(graph.positions))))
    if kind == "ball":
        return d <= pred["radius"] + tol if pred["closed"] else d < pred["radius"] - tol
    return (d >= pred["inner"] - tol) & (d < pred["outer"] - tol)


def predicate_nodes(pred, graph):
    return mask_to_set(predicate_mask(pred, graph))


# -- sections -----------------------------------------------------------------

@dataclass
class SpaceSection:
    kind: str
    spacing: float
    dimension: int = None
    lo: float = None
    hi: float = None
    n: int = None
    r_min: float = None
    r_max: float = None
    weight: str = "constant"
    weight_rate: float = None

    def validate(self):
        if self.kind not in SPACE_KINDS:
            raise RejectionError(f"space.kind must be one of {SPACE_KINDS}")
        if self.weight not in WEIGHTS:
            raise RejectionError(f"space.weight must be one of {WEIGHTS}")
        if self.weight != "constant" and self.weight_rate is None:
            raise RejectionError("space.weight_rate is required for a non-constant weight")
        if not self.spacing > 0:
            raise RejectionError("space.spacing must be positive")
        if self.kind == "grid":
            self.dimension = 1 if self.dimension is None else int(self.dimension)
            self._need("lo", "hi")
        elif self.kind == "weighted1d":
            if self.dimension not in (None, 1):
                raise RejectionError("weighted1d spaces are one-dimensional")
            self.dimension = 1
            self._need("lo", "hi")
        else:
            self._need("n", "r_min", "r_max")
            self.n = int(self.n)
        return self

    def _need(self, *keys):
        for k in keys:
            if getattr(self, k) is None:
                raise RejectionError(f"space.{k} is required for kind {self.kind!r}")

    def weight_function(self):
        rate = self.weight_rate
        if self.weight == "constant":
            return None
        if self.kind == "radial":
            # radial weights act on rho directly
            if self.weight == "exp":
                return lambda rho: np.exp(rate * np.asarray(rho))
            if self.weight == "halfline_exp":
                return lambda rho: np.exp(rate * np.maximum(np.asarray(rho), 0.0))
            return lambda rho: np.abs(np.asarray(rho)) ** rate
        return {"exp": exp_weight, "halfline_exp": halfline_exp_weight,
                "power": power_weight}[self.weight](rate)


@dataclass
class ProblemSection:
    p: float
    E: dict = None
    omega: dict = None
    F: dict = None
    e_unbounded: bool = False
    x0: list = None
    boundary: list = None
    value_at_infinity: float = None
    shell_mode: str = "pinned"
    point: object = None
    level_pairs: list = None

    def validate(self):
        self.p = float(self.p)
        if not self.p > 1:
            raise RejectionError("problem.p must exceed 1")
        for key in ("E", "omega", "F"):
            val = getattr(self, key)
            if val is not None:
                setattr(self, key, validate_predicate(val, f"problem.{key}"))
        if self.x0 is not None:
            self.x0 = _floats(self.x0, "problem.x0")
        if self.boundary is not None:
            rules = []
            for k, rule in enumerate(self.boundary):
                if not isinstance(rule, dict) or "region" not in rule or "value" not in rule:
                    raise RejectionError(f"problem.boundary[{k}] needs 'region' and 'value'")
                rules.append({"region": validate_predicate(rule["region"],
                                                           f"problem.boundary[{k}].region"),
                              "value": float(rule["value"])})
            self.boundary = rules
        if self.value_at_infinity is not None:
            self.value_at_infinity = float(self.value_at_infinity)
            if not math.isfinite(self.value_at_infinity):
                raise RejectionError("problem.value_at_infinity must be finite")
        if self.shell_mode not in SHELL_MODES:
            raise RejectionError(f"problem.shell_mode must be one of {SHELL_MODES}")
        if self.point is not None and not (self.point == "inf" or isinstance(self.point, list)):
            raise RejectionError("problem.point must be 'inf' or a coordinate list")
        if self.level_pairs is not None:
            self.level_pairs = [_floats(pair, "problem.level_pairs") for pair in self.level_pairs]
            if any(len(pair) != 2 for pair in self.level_pairs):
                raise RejectionError("problem.level_pairs entries must be [a, b]")
        self.e_unbounded = bool(self.e_unbounded)
        return self


@dataclass
class ScheduleSection:
    radii: list
    base: list = None
    stop_tolerance: float = 1e-6

    def validate(self):
        self.radii = _floats(self.radii, "schedule.radii")
        self.base = [0.0] if self.base is None else _floats(self.base, "schedule.base")
        self.stop_tolerance = float(self.stop_tolerance)
        self.build()
        return self

    def build(self):
        return ExhaustionSchedule(np.asarray(self.base), tuple(self.radii), self.stop_tolerance)


@dataclass
class SolverSection:
    eps_start: float = 1e-1
    eps_stop: float = 1e-13
    gradient_tolerance: float = 1e-9
    max_iterations: int = 500

    def validate(self):
        self.build()
        return self

    def build(self):
        lo, hi = math.log10(self.eps_stop), math.log10(self.eps_start)
        if not lo <= hi:
            raise RejectionError("solver.eps_stop must not exceed solver.eps_start")
        count = int(round(hi - lo)) + 1
        eps = tuple(float(10.0 ** e) for e in np.linspace(hi, lo, count))
        return SolverConfig(epsilons=eps, gradient_tolerance=float(self.gradient_tolerance),
                            max_iterations=int(self.max_iterations))


@dataclass
class OutputSection:
    directory: str = None
    formats: list = field(default_factory=lambda: ["csv"])

    def validate(self):
        bad = set(self.formats) - {"csv", "png"}
        if bad:
            raise RejectionError(f"output.formats: unknown format(s) {sorted(bad)}")
        return self


_SECTIONS = {"space": SpaceSection, "problem": ProblemSection, "schedule": ScheduleSection,
             "solver": SolverSection, "output": OutputSection}


def _build_section(cls, table, name):
    if not isinstance(table, dict):
        raise RejectionError(f"[{name}] must be a table")
    known = {f.name for f in fields(cls)}
    extra = set(table) - known
    if extra:
        raise RejectionError(f"[{name}]: unknown key(s) {sorted(extra)}")
    try:
        return cls(**table).validate()
    except TypeError as exc:
        raise RejectionError(f"[{name}]: {exc}") from None


@dataclass
class RunConfig:
    space: SpaceSection
    problem: ProblemSection
    schedule: ScheduleSection = None
    solver: SolverSection = field(default_factory=SolverSection)
    output: OutputSection = field(default_factory=OutputSection)

    @classmethod
    def from_dict(cls, data):
        extra = set(data) - set(_SECTIONS)
        if extra:
            raise RejectionError(f"unknown section(s) {sorted(extra)}")
        for required in ("space", "problem"):
            if required not in data:
                raise RejectionError(f"missing [{required}] section")
        kwargs = {name: _build_section(_SECTIONS[name], data[name], name)
                  for name in _SECTIONS if name in data}
        return cls(**kwargs)

    @classmethod
    def loads(cls, text):
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise RejectionError(f"config is not valid TOML: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        try:
            with open(path, "rb") as fh:
                text = fh.read().decode("utf-8")
        except OSError as exc:
            raise RejectionError(f"cannot read config {path}: {exc}") from None
        return cls.loads(text)

    def to_dict(self):
        out = {}
        for name in _SECTIONS:
            sec = getattr(self, name)
            if sec is not None:
                out[name] = _drop_none(asdict(sec))
        return out

    def dumps(self):
        return tomli_w.dumps(self.to_dict())

    # -- builders --------------------------------------------------------

    def build_graph(self):
        sp, p = self.space, self.problem.p
        w = sp.weight_function()
        if sp.kind == "radial":
            return radial_graph(RadialSpace(sp.n, p, w), sp.r_min, sp.r_max, sp.spacing)
        if w is None:
            w = constant_weight(1.0)
        return build_grid(GridSpec.interval(sp.lo, sp.hi, sp.spacing, p, w, sp.dimension))

    def build_schedule(self):
        return None if self.schedule is None else self.schedule.build()

    def build_solver(self):
        return self.solver.build()

    def nodes(self, key, graph):
        pred = getattr(self.problem, key)
        if pred is None:
            raise RejectionError(f"problem.{key} is required for this subcommand")
        return predicate_nodes(pred, graph)
