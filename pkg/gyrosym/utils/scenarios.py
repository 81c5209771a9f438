"""
Scenario files: YAML descriptions of a gyroscopic system and its initial data.

Schema (see scenarios/schema.yaml):

    name: lagrange-top
    description: optional text
    inertia: [A1, A2, A3]
    potential: "a3"
    kappa:
      constant: [c1, c2, c3]            # or
      expressions: ["-a2", "a1", "0"]   # or
      random_gradient: {seed: 7, degree: 3}
    allow_open_kappa: false
    initial:
      omega: [w1, w2, w3]
      alpha: [a1, a2, a3]               # or attitude: [9 numbers] or random: true
    integrator: {dt: 0.001, t_end: 10, stride: 10, method: reduced-euler-poisson}
    seed: 0
    tolerances: {tau_orth: 1e-9, tau_closed: 1e-8}
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from gyrosym import config
from gyrosym.core import so3
from gyrosym.core.dynamics import METHODS, GyroSystem, InertiaTensor, IntegratorConfig
from gyrosym.core.fields import SphereScalarField
from gyrosym.core.forms import InvariantTwoForm
from gyrosym.core.symmetry import random_polynomial_kappa
from gyrosym.exceptions import Degenerate, OffSphere, ParseError, ScenarioNotFound, ValidationError
from gyrosym.utils.expressions import parse_expression

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = (
    "name", "description", "inertia", "potential", "kappa", "allow_open_kappa",
    "initial", "integrator", "seed", "tolerances",
)
KAPPA_KINDS = ("constant", "expressions", "random_gradient")
INITIAL_KEYS = ("omega", "attitude", "alpha", "random")
INTEGRATOR_KEYS = ("dt", "t_end", "stride", "method")
TOLERANCE_KEYS = ("tau_orth", "tau_closed")
SCHEMA_FILE = "schema.yaml"


@dataclass(frozen=True)
class KappaSpec:
    kind: str
    constant: Optional[Tuple[float, float, float]] = None
    expressions: Optional[Tuple[str, str, str]] = None
    seed: Optional[int] = None
    degree: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "constant":
            return {"constant": list(self.constant)}
        if self.kind == "expressions":
            return {"expressions": list(self.expressions)}
        return {"random_gradient": {"seed": self.seed, "degree": self.degree}}


@dataclass(frozen=True)
class InitialSpec:
    omega: Tuple[float, float, float]
    attitude: Optional[Tuple[float, ...]] = None
    alpha: Optional[Tuple[float, float, float]] = None
    random: bool = False

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"omega": list(self.omega)}
        if self.attitude is not None:
            out["attitude"] = list(self.attitude)
        elif self.alpha is not None:
            out["alpha"] = list(self.alpha)
        else:
            out["random"] = True
        return out


@dataclass(frozen=True)
class ScenarioSpec:
    """Parsed scenario; build_system and initial_state turn it into model objects."""

    name: str
    inertia: Tuple[float, float, float]
    kappa: KappaSpec
    initial: InitialSpec
    potential: str = "0"
    description: str = ""
    allow_open_kappa: bool = False
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    seed: int = 0
    tau_closed: float = config.TAU_CLOSED

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"name": self.name}
        if self.description:
            data["description"] = self.description
        data["inertia"] = list(self.inertia)
        data["potential"] = self.potential
        data["kappa"] = self.kappa.to_dict()
        if self.allow_open_kappa:
            data["allow_open_kappa"] = True
        data["initial"] = self.initial.to_dict()
        integrator = {"dt": self.integrator.dt, "t_end": self.integrator.t_end, "stride": self.integrator.stride}
        if self.integrator.method is not None:
            integrator["method"] = self.integrator.method
        data["integrator"] = integrator
        data["seed"] = self.seed
        data["tolerances"] = {"tau_orth": self.integrator.tau_orth, "tau_closed": self.tau_closed}
        return data

    def with_overrides(
        self,
        dt: Optional[float] = None,
        t_end: Optional[float] = None,
        method: Optional[str] = None,
        seed: Optional[int] = None,
        stride: Optional[int] = None,
    ) -> "ScenarioSpec":
        """Copy with command-line overrides applied."""
        integrator = self.integrator
        changes = {k: v for k, v in (("dt", dt), ("t_end", t_end), ("method", method), ("stride", stride)) if v is not None}
        if changes:
            integrator = replace(integrator, **changes)
        return replace(self, integrator=integrator, seed=self.seed if seed is None else int(seed))


class _Locator:
    """Maps key paths of a YAML document to 1-based (line, column)."""

    def __init__(self, text: str):
        try:
            self._root = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError:
            self._root = None

    def __call__(self, *path) -> Tuple[Optional[int], Optional[int]]:
        node = self._root
        mark = getattr(node, "start_mark", None)
        for key in path:
            if isinstance(node, yaml.MappingNode):
                match = [(k, v) for k, v in node.value if k.value == key]
                if not match:
                    break
                node = match[0][1]
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                node = node.value[key]
            else:
                break
            mark = node.start_mark
        if mark is None:
            return None, None
        return mark.line + 1, mark.column + 1


def _to_float(value, what: str, where) -> float:
    # YAML 1.1 reads 1e-9 (no dot) as a string
    if isinstance(value, bool):
        raise ParseError(f"{what} must be a number, got {value!r}", *where)
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"{what} must be a number, got {value!r}", *where) from None
    if not np.isfinite(result):
        raise ParseError(f"{what} must be finite, got {value!r}", *where)
    return result


def _numbers(value, count: int, what: str, where) -> Tuple[float, ...]:
    if not isinstance(value, list) or len(value) != count:
        raise ParseError(f"{what} must be a list of {count} numbers", *where)
    return tuple(_to_float(v, what, where) for v in value)


def _mapping(value, what: str, allowed, where) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise ParseError(f"{what} must be a mapping", *where)
    unknown = [k for k in value if k not in allowed]
    if unknown:
        raise ParseError(f"unknown key(s) {unknown} in {what}; expected {list(allowed)}", *where)
    return value


def _expression(value, where) -> str:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise ParseError(f"expected an expression, got {value!r}", *where)
    text = str(value)
    parse_expression(text, *where)
    return text


def _parse_kappa(raw, locate) -> KappaSpec:
    data = _mapping(raw, "kappa", KAPPA_KINDS, locate("kappa"))
    if len(data) != 1:
        raise ParseError(f"kappa needs exactly one of {list(KAPPA_KINDS)}", *locate("kappa"))
    kind, value = next(iter(data.items()))
    where = locate("kappa", kind)
    if kind == "constant":
        return KappaSpec(kind=kind, constant=_numbers(value, 3, "kappa.constant", where))
    if kind == "expressions":
        if not isinstance(value, list) or len(value) != 3:
            raise ParseError("kappa.expressions must be a list of 3 expressions", *where)
        return KappaSpec(
            kind=kind,
            expressions=tuple(_expression(v, locate("kappa", kind, i)) for i, v in enumerate(value)),
        )
    options = _mapping(value, "kappa.random_gradient", ("seed", "degree"), where)
    seed, degree = options.get("seed", 0), options.get("degree", 3)
    if not isinstance(seed, int) or not isinstance(degree, int) or degree < 0:
        raise ParseError("random_gradient needs an integer seed and a non-negative integer degree", *where)
    return KappaSpec(kind=kind, seed=seed, degree=degree)


def _parse_initial(raw, locate) -> InitialSpec:
    data = _mapping(raw, "initial", INITIAL_KEYS, locate("initial"))
    if "omega" not in data:
        raise ParseError("initial.omega is required", *locate("initial"))
    omega = _numbers(data["omega"], 3, "initial.omega", locate("initial", "omega"))
    given = [k for k in ("attitude", "alpha", "random") if k in data]
    if len(given) != 1:
        raise ParseError("initial needs exactly one of attitude, alpha, random", *locate("initial"))
    if "attitude" in data:
        return InitialSpec(omega=omega, attitude=_numbers(data["attitude"], 9, "initial.attitude", locate("initial", "attitude")))
    if "alpha" in data:
        return InitialSpec(omega=omega, alpha=_numbers(data["alpha"], 3, "initial.alpha", locate("initial", "alpha")))
    if data["random"] is not True:
        raise ParseError("initial.random must be true", *locate("initial", "random"))
    return InitialSpec(omega=omega, random=True)


def _parse_integrator(raw, tau_orth: float, locate) -> IntegratorConfig:
    data = _mapping(raw or {}, "integrator", INTEGRATOR_KEYS, locate("integrator"))
    defaults = IntegratorConfig()
    values = {}
    for key in ("dt", "t_end"):
        values[key] = _to_float(data.get(key, getattr(defaults, key)), f"integrator.{key}", locate("integrator", key))
    stride = data.get("stride", defaults.stride)
    if isinstance(stride, bool) or not isinstance(stride, int):
        raise ParseError("integrator.stride must be an integer", *locate("integrator", "stride"))
    method = data.get("method")
    if method is not None and method not in METHODS:
        raise ParseError(f"integrator.method must be one of {list(METHODS)}", *locate("integrator", "method"))
    return IntegratorConfig(dt=values["dt"], t_end=values["t_end"], stride=stride, method=method, tau_orth=tau_orth)


def parse_scenario(text: str, validate: bool = True) -> ScenarioSpec:
    """
    Parse scenario text.

    Args:
        text: YAML document
        validate: Also build the system to check its invariants

    Raises:
        ParseError: malformed document (with line and column)
        ValidationError: well-formed but violating a model invariant
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line, column = (mark.line + 1, mark.column + 1) if mark is not None else (None, None)
        raise ParseError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line, column) from exc
    locate = _Locator(text)
    data = _mapping(raw, "scenario", TOP_LEVEL_KEYS, locate())
    for key in ("name", "inertia", "kappa", "initial"):
        if key not in data:
            raise ParseError(f"missing required key {key!r}", *locate())

    name = data["name"]
    if not isinstance(name, str) or not name:
        raise ParseError("name must be a non-empty string", *locate("name"))
    tolerances = _mapping(data.get("tolerances") or {}, "tolerances", TOLERANCE_KEYS, locate("tolerances"))
    tolerances = {k: _to_float(v, f"tolerances.{k}", locate("tolerances", k)) for k, v in tolerances.items()}
    for key, value in tolerances.items():
        if value <= 0:
            raise ParseError(f"tolerances.{key} must be positive", *locate("tolerances", key))
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ParseError("seed must be an integer", *locate("seed"))
    allow_open = data.get("allow_open_kappa", False)
    if not isinstance(allow_open, bool):
        raise ParseError("allow_open_kappa must be true or false", *locate("allow_open_kappa"))

    spec = ScenarioSpec(
        name=name,
        description=str(data.get("description", "") or ""),
        inertia=_numbers(data["inertia"], 3, "inertia", locate("inertia")),
        potential=_expression(data.get("potential", "0"), locate("potential")),
        kappa=_parse_kappa(data["kappa"], locate),
        allow_open_kappa=allow_open,
        initial=_parse_initial(data["initial"], locate),
        integrator=_parse_integrator(
            data.get("integrator"), float(tolerances.get("tau_orth", config.TAU_ORTH)), locate
        ),
        seed=seed,
        tau_closed=float(tolerances.get("tau_closed", config.TAU_CLOSED)),
    )
    if validate:
        build_system(spec)
        initial_state(spec)
    return spec


def dump_scenario(spec: ScenarioSpec) -> str:
    """Serialise a spec back to scenario YAML."""
    return yaml.safe_dump(spec.to_dict(), sort_keys=False, default_flow_style=None)


def kappa_form(spec: ScenarioSpec) -> InvariantTwoForm:
    if spec.kappa.kind == "constant":
        return InvariantTwoForm.constant(spec.kappa.constant)
    if spec.kappa.kind == "expressions":
        return InvariantTwoForm.from_expressions(spec.kappa.expressions)
    rng = np.random.default_rng(spec.kappa.seed)
    return random_polynomial_kappa(rng, spec.kappa.degree).form()


def build_system(spec: ScenarioSpec) -> GyroSystem:
    """GyroSystem of a scenario; raises ValidationError when an invariant fails."""
    return GyroSystem(
        inertia=InertiaTensor.from_sequence(spec.inertia),
        potential=SphereScalarField.from_expression(spec.potential, name="Pi"),
        kappa=kappa_form(spec),
        label=spec.name,
        allow_open_kappa=spec.allow_open_kappa,
        tau_closed=spec.tau_closed,
    )


def initial_state(spec: ScenarioSpec) -> so3.BodyState:
    """Initial attitude and angular velocity; random attitudes are drawn from the scenario seed."""
    initial = spec.initial
    tol = spec.integrator.tau_orth
    try:
        if initial.attitude is not None:
            Q = so3.validate_rotation(np.array(initial.attitude).reshape(3, 3), tol=tol)
        elif initial.alpha is not None:
            Q = so3.complete_rotation(np.array(initial.alpha), tol=tol)
        else:
            Q = so3.random_rotation(np.random.default_rng(spec.seed))
    except (Degenerate, OffSphere) as exc:
        raise ValidationError("attitude", str(exc)) from exc
    return so3.BodyState(Q, np.array(initial.omega))


def resolve_scenario(ref: str, scenario_dir: Optional[Path] = None) -> Path:
    """A scenario path, or the file of a built-in scenario name in the scenario directory."""
    path = Path(ref)
    if path.is_file():
        return path
    scenario_dir = Path(scenario_dir or config.SCENARIO_DIR)
    for candidate in (scenario_dir / ref, scenario_dir / f"{ref}.yaml"):
        if candidate.is_file():
            return candidate
    raise ScenarioNotFound(f"no scenario file or built-in scenario named {ref!r} (looked in {scenario_dir})")


def load_scenario(ref: str, scenario_dir: Optional[Path] = None, validate: bool = True) -> ScenarioSpec:
    path = resolve_scenario(ref, scenario_dir)
    logger.info("loading scenario %s", path)
    return parse_scenario(path.read_text(encoding="utf-8"), validate=validate)


def list_scenarios(scenario_dir: Optional[Path] = None) -> List[Tuple[str, str]]:
    """(name, description) of every scenario file in the directory, sorted by name."""
    scenario_dir = Path(scenario_dir or config.SCENARIO_DIR)
    out = []
    for path in sorted(scenario_dir.glob("*.yaml")):
        if path.name == SCHEMA_FILE:
            continue
        spec = parse_scenario(path.read_text(encoding="utf-8"), validate=False)
        out.append((spec.name, spec.description))
    return sorted(out)
