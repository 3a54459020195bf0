"""Problem-definition files: parsing, field builders, validation.

A problem file is an INI-style text file.  Sections:

    [grid]        nt, nx, ny, bc (periodic or neumann)
    [density]     rho0, rho1 as field expressions; optional rescale
    [constraint.<label>]   one section per constraint term
    [solver]      algorithm plus any SolverParams field
    [outputs]     frames (bool), images (snapshot count), history (bool)

A field expression is an arithmetic combination of builders and
literals evaluated on the grid nodes:

    gaussian(center=(0.4, 0.5), sigma=0.08, mass=1)
    disk(center=(0.5, 0.5), radius=0.2, value=3)
    constant(2.5)          or a bare number
    [[...], [...]]         inline array, shape (nx, ny)

Builders respect the grid's boundary mode: distances wrap on periodic
grids, so a translated copy of a builder field is an exact sample
shift.  The gaussian builder normalizes to the requested total mass
under the grid quadrature, which keeps endpoint masses consistent by
construction.

Loading validates everything it can: shapes, nonnegativity, endpoint
mass agreement to 1e-6 relative (an explicit rescale option brings
rho1 to rho0's mass instead), constraint-term overlap, and unknown
keys, which are rejected rather than ignored so typos surface early.
"""

from __future__ import annotations

import ast
import configparser
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .constraints import (
    ConstraintSpec,
    DensityUpperBound,
    FixedDensityRegion,
    MomentumQuadraticPenalty,
    Unconstrained,
)
from .grid import GridSpec, SpaceBC
from .solvers import ALGORITHMS, SolverParams, TransportProblem

__all__ = ["ProblemFileError", "OutputsSpec", "ProblemFile", "evaluate_field", "load_problem"]

_MASS_TOL = 1e-6


class ProblemFileError(ValueError):
    """A problem file failed to parse or validate."""


@dataclass
class OutputsSpec:
    """Which artifacts a solve emits."""

    frames: bool = True
    images: int = 5
    history: bool = True


@dataclass
class ProblemFile:
    """A fully validated problem plus run configuration."""

    problem: TransportProblem
    params: SolverParams
    algorithm: str
    outputs: OutputsSpec
    path: str = ""


def _node_positions(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    return grid.x_nodes[:, None], grid.y_nodes[None, :]


def _displacement(coord: np.ndarray, center: float, periodic: bool) -> np.ndarray:
    d = coord - center
    if periodic:
        d = d - np.round(d)
    return d


def _distance_sq(grid: GridSpec, center) -> np.ndarray:
    cx, cy = center
    periodic = grid.space_bc is SpaceBC.PERIODIC
    x, y = _node_positions(grid)
    dx = _displacement(x, float(cx), periodic)
    dy = _displacement(y, float(cy), periodic)
    return dx * dx + dy * dy


def _builder_gaussian(grid: GridSpec, center, sigma, mass) -> np.ndarray:
    sigma = float(sigma)
    mass = float(mass)
    if sigma <= 0:
        raise ValueError(f"gaussian sigma must be positive, got {sigma}")
    if mass < 0:
        raise ValueError(f"gaussian mass must be nonnegative, got {mass}")
    vals = np.exp(-_distance_sq(grid, center) / (2.0 * sigma * sigma))
    total = float(np.sum(vals)) * grid.cell_area
    if total <= 0:
        raise ValueError("gaussian has zero discrete mass on this grid")
    return vals * (mass / total)


def _builder_disk(grid: GridSpec, center, radius, value) -> np.ndarray:
    radius = float(radius)
    if radius < 0:
        raise ValueError(f"disk radius must be nonnegative, got {radius}")
    inside = _distance_sq(grid, center) <= radius * radius
    return np.where(inside, float(value), 0.0)


def _builder_constant(grid: GridSpec, value) -> np.ndarray:
    return np.full((grid.nx, grid.ny), float(value))


_BUILDERS = {
    "gaussian": (_builder_gaussian, ("center", "sigma", "mass")),
    "disk": (_builder_disk, ("center", "radius", "value")),
    "constant": (_builder_constant, ("value",)),
}


def _eval_node(node, grid: GridSpec):
    """Evaluate one expression node to a float, a tuple, or an array."""
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        raise ValueError(f"literal {node.value!r} is not a number")
    if isinstance(node, ast.Tuple):
        return tuple(_eval_node(el, grid) for el in node.elts)
    if isinstance(node, ast.List):
        rows = [_eval_node(el, grid) for el in node.elts]
        return np.asarray(rows, dtype=float)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_eval_node(node.operand, grid)
    if isinstance(node, ast.BinOp):
        left = _eval_node(node.left, grid)
        right = _eval_node(node.right, grid)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            return left / right
        raise ValueError(f"operator {type(node.op).__name__} is not allowed here")
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _BUILDERS:
            raise ValueError("only gaussian(...), disk(...), constant(...) calls are allowed")
        fn, arg_names = _BUILDERS[node.func.id]
        bound = {}
        for name, arg in zip(arg_names, node.args):
            bound[name] = _eval_node(arg, grid)
        if len(node.args) > len(arg_names):
            raise ValueError(f"{node.func.id} takes at most {len(arg_names)} arguments")
        for kw in node.keywords:
            if kw.arg not in arg_names:
                raise ValueError(f"{node.func.id} got unknown argument {kw.arg!r}")
            if kw.arg in bound:
                raise ValueError(f"{node.func.id} got duplicate argument {kw.arg!r}")
            bound[kw.arg] = _eval_node(kw.value, grid)
        missing = [a for a in arg_names if a not in bound]
        if missing:
            raise ValueError(f"{node.func.id} is missing arguments: {', '.join(missing)}")
        return fn(grid, **bound)
    raise ValueError(f"expression element {type(node).__name__} is not allowed")


def evaluate_field(expr: str, grid: GridSpec) -> np.ndarray:
    """Evaluate a field expression to a spatial array of shape (nx, ny)."""
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse field expression {expr!r}: {exc.msg}") from None
    value = _eval_node(tree.body, grid)
    if isinstance(value, float):
        value = _builder_constant(grid, value)
    value = np.asarray(value, dtype=float)
    if value.shape != (grid.nx, grid.ny):
        raise ValueError(
            f"field expression evaluates to shape {value.shape}, grid expects {(grid.nx, grid.ny)}"
        )
    return value


def _known_keys(section: str, present, allowed, path: str):
    unknown = sorted(set(present) - set(allowed))
    if unknown:
        raise ProblemFileError(
            f"{path}: unknown key(s) in [{section}]: {', '.join(unknown)}"
        )


def _constraint_term(section: str, cfg: configparser.SectionProxy, grid: GridSpec, path: str):
    kind = cfg.get("type", "").strip().lower()
    try:
        if kind == "unconstrained":
            _known_keys(section, cfg.keys(), {"type"}, path)
            return Unconstrained()
        if kind == "density_upper_bound":
            _known_keys(section, cfg.keys(), {"type", "rho_bar"}, path)
            if "rho_bar" not in cfg:
                raise ValueError("density_upper_bound requires rho_bar")
            return DensityUpperBound(evaluate_field(cfg["rho_bar"], grid))
        if kind == "momentum_penalty":
            _known_keys(section, cfg.keys(), {"type", "psi"}, path)
            if "psi" not in cfg:
                raise ValueError("momentum_penalty requires psi")
            return MomentumQuadraticPenalty(evaluate_field(cfg["psi"], grid))
        if kind == "fixed_density_region":
            _known_keys(section, cfg.keys(), {"type", "mask", "rho_fixed"}, path)
            if "mask" not in cfg or "rho_fixed" not in cfg:
                raise ValueError("fixed_density_region requires mask and rho_fixed")
            mask = evaluate_field(cfg["mask"], grid) > 0.5
            return FixedDensityRegion(mask, evaluate_field(cfg["rho_fixed"], grid))
    except ProblemFileError:
        raise
    except ValueError as exc:
        raise ProblemFileError(f"{path}: [{section}]: {exc}") from None
    raise ProblemFileError(
        f"{path}: [{section}] has unknown type {kind!r}; expected unconstrained, "
        "density_upper_bound, momentum_penalty, or fixed_density_region"
    )


_PARAM_FIELDS = {f.name: f.type for f in dataclass_fields(SolverParams)}
_INT_PARAMS = {"max_outer", "max_inner", "min_outer"}


def load_problem(path) -> ProblemFile:
    """Parse and validate a problem file.

    Raises ProblemFileError with the offending file, section, and key
    named; parse failures keep the line information the parser gives.
    """
    path = str(path)
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg.read_file(fh, source=path)
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror or exc}") from None
    except configparser.Error as exc:
        raise ProblemFileError(f"{path}: {exc}") from None

    known_fixed = {"grid", "density", "solver", "outputs"}
    for section in cfg.sections():
        if section not in known_fixed and not section.startswith("constraint"):
            raise ProblemFileError(f"{path}: unknown section [{section}]")

    if not cfg.has_section("grid"):
        raise ProblemFileError(f"{path}: missing required section [grid]")
    if not cfg.has_section("density"):
        raise ProblemFileError(f"{path}: missing required section [density]")

    gsec = cfg["grid"]
    _known_keys("grid", gsec.keys(), {"nt", "nx", "ny", "bc"}, path)
    try:
        grid = GridSpec(
            nt=gsec.getint("nt"),
            nx=gsec.getint("nx"),
            ny=gsec.getint("ny"),
            space_bc=SpaceBC.coerce(gsec.get("bc", "periodic")),
        )
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"{path}: [grid]: {exc}") from None

    dsec = cfg["density"]
    _known_keys("density", dsec.keys(), {"rho0", "rho1", "rescale"}, path)
    try:
        if "rho0" not in dsec or "rho1" not in dsec:
            raise ValueError("both rho0 and rho1 are required")
        rho0 = evaluate_field(dsec["rho0"], grid)
        rho1 = evaluate_field(dsec["rho1"], grid)
        rescale = dsec.getboolean("rescale", fallback=False)
    except ValueError as exc:
        raise ProblemFileError(f"{path}: [density]: {exc}") from None

    if np.any(rho0 < 0) or np.any(rho1 < 0):
        raise ProblemFileError(f"{path}: [density]: densities must be nonnegative")
    m0 = float(np.sum(rho0)) * grid.cell_area
    m1 = float(np.sum(rho1)) * grid.cell_area
    if abs(m0 - m1) > _MASS_TOL * max(abs(m0), abs(m1), 1e-300):
        if rescale:
            if m1 <= 0:
                raise ProblemFileError(f"{path}: [density]: cannot rescale zero-mass rho1")
            rho1 = rho1 * (m0 / m1)
        else:
            raise ProblemFileError(
                f"{path}: [density]: endpoint masses differ: rho0 integrates to {m0!r}, "
                f"rho1 to {m1!r} (set rescale = true to match them)"
            )

    terms = []
    for section in cfg.sections():
        if section.startswith("constraint"):
            terms.append(_constraint_term(section, cfg[section], grid, path))
    constraint = ConstraintSpec(terms) if terms else ConstraintSpec.unconstrained()

    algorithm = "alg2"
    kwargs = {}
    if cfg.has_section("solver"):
        ssec = cfg["solver"]
        _known_keys("solver", ssec.keys(), set(_PARAM_FIELDS) | {"algorithm"}, path)
        algorithm = ssec.get("algorithm", "alg2").strip().lower()
        if algorithm not in ALGORITHMS:
            raise ProblemFileError(
                f"{path}: [solver]: unknown algorithm {algorithm!r}; "
                f"expected one of {', '.join(sorted(ALGORITHMS))}"
            )
        for key in ssec:
            if key == "algorithm":
                continue
            try:
                kwargs[key] = ssec.getint(key) if key in _INT_PARAMS else ssec.getfloat(key)
            except ValueError:
                raise ProblemFileError(
                    f"{path}: [solver]: {key} = {ssec[key]!r} is not a number"
                ) from None
    try:
        params = SolverParams(**kwargs)
    except ValueError as exc:
        raise ProblemFileError(f"{path}: [solver]: {exc}") from None

    outputs = OutputsSpec()
    if cfg.has_section("outputs"):
        osec = cfg["outputs"]
        _known_keys("outputs", osec.keys(), {"frames", "images", "history"}, path)
        try:
            outputs = OutputsSpec(
                frames=osec.getboolean("frames", fallback=True),
                images=osec.getint("images", fallback=5),
                history=osec.getboolean("history", fallback=True),
            )
        except ValueError as exc:
            raise ProblemFileError(f"{path}: [outputs]: {exc}") from None
        if outputs.images < 0 or outputs.images == 1:
            raise ProblemFileError(
                f"{path}: [outputs]: images must be 0 (disabled) or at least 2, "
                f"got {outputs.images}"
            )

    try:
        problem = TransportProblem(grid, rho0, rho1, constraint)
    except ValueError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None
    return ProblemFile(problem, params, algorithm, outputs, path)
