"""Scenario files: loading, validation and serialization.

A scenario is a TOML document::

    name = "example"
    [constants]          # names usable in every expression, --set overridable
    [basis.<name>]       # dense Hermitian matrices, entries as [re, im] pairs
    [system]             # dimension, parameter_dim, hamiltonian = [terms]
    [[system.connection]]  # one table per sigma^m, terms = [terms]
    [paths.<name>]       # t0, t1, coords, closed, breakpoints
    [integrator]         # method, tol, max_steps, initial_step

A term is ``{ coeff = "<expression>", basis = "<basis name>" }``. Built-in
basis names: I(n), pauli_x, pauli_y, pauli_z, E(j,j,n), sym(j,k,n),
asym(j,k,n) with 1-based indices.
"""

import logging
import math
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np
import tomli_w
from pydantic import ValidationError

from holomech.config import TEMPLATE_DEFAULT_PATHS, get_settings, get_template_description
from holomech.data.expression import RESERVED, Expression, parse_expression
from holomech.errors import (
    DimensionMismatch,
    FormatError,
    HolomechError,
    NonHermitianBasis,
)
from holomech.models import IntegratorConfig
from holomech.services.bundle import FieldTerm, OperatorField, ParameterPath, PullbackSystem
from holomech.services.operators import HERMITIAN_TOL, check_hermitian

logger = logging.getLogger("holomech.scenario")

PAULI: dict[str, np.ndarray] = {
    "pauli_x": np.array([[0, 1], [1, 0]], dtype=complex),
    "pauli_y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "pauli_z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_IDENTITY_RE = re.compile(r"^I\(\s*(\d+)\s*\)$")
_INDEXED_RE = re.compile(r"^(E|sym|asym)\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)$")

SIGN_CONVENTIONS = {"paper": 1, "physics": -1}


@contextmanager
def _located(key_path: str):
    """Prefix any holomech error raised inside with the offending key path."""
    try:
        yield
    except HolomechError as exc:
        if exc.key_path is None:
            exc.key_path = key_path
            exc.args = (f"{key_path}: {exc}",)
        raise


def _require(table: Mapping[str, Any], key: str, key_path: str):
    if key not in table:
        raise FormatError(f"missing required key '{key}'", key_path)
    return table[key]


def _table(value: Any, key_path: str) -> dict:
    if not isinstance(value, dict):
        raise FormatError(f"expected a table, got {type(value).__name__}", key_path)
    return value


def _array(value: Any, key_path: str) -> list:
    if not isinstance(value, list):
        raise FormatError(f"expected an array, got {type(value).__name__}", key_path)
    return value


def _number(value: Any, key_path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"expected a number, got {value!r}", key_path)
    return float(value)


def _integer(value: Any, key_path: str) -> int:
    number = _number(value, key_path)
    if not number.is_integer():
        raise FormatError(f"expected an integer, got {value!r}", key_path)
    return int(number)


# =============================================================================
# Bases
# =============================================================================

def builtin_basis(name: str) -> Optional[np.ndarray]:
    """Resolve a built-in basis name, or None if `name` is not one."""
    if name in PAULI:
        return PAULI[name].copy()
    match = _IDENTITY_RE.match(name)
    if match:
        return np.eye(int(match.group(1)), dtype=complex)
    match = _INDEXED_RE.match(name)
    if not match:
        return None
    kind, j, k, n = match.group(1), int(match.group(2)), int(match.group(3)), int(match.group(4))
    if not (1 <= j <= n and 1 <= k <= n):
        raise FormatError(f"basis '{name}': indices must lie in 1..{n}")
    unit = np.zeros((n, n), dtype=complex)
    unit[j - 1, k - 1] = 1.0
    if kind == "E":
        if j != k:
            raise NonHermitianBasis(f"basis '{name}' is not Hermitian; use sym({j},{k},{n}) or asym({j},{k},{n})")
        return unit
    if j == k:
        raise FormatError(f"basis '{name}' needs two distinct indices")
    if kind == "sym":
        return unit + unit.T
    return 1j * (unit - unit.T)


def _parse_entry(value: Any, key_path: str) -> complex:
    if isinstance(value, list):
        if len(value) != 2:
            raise FormatError("complex entries are written as [re, im]", key_path)
        return complex(_number(value[0], key_path), _number(value[1], key_path))
    return complex(_number(value, key_path))


def _parse_dense_basis(table: Mapping[str, Any], key_path: str) -> np.ndarray:
    rows = _array(_require(table, "entries", key_path), f"{key_path}.entries")
    n = len(rows)
    matrix = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(rows):
        row = _array(row, f"{key_path}.entries[{i}]")
        if len(row) != n:
            raise DimensionMismatch(f"row {i} has {len(row)} entries, expected {n}", f"{key_path}.entries")
        for j, value in enumerate(row):
            matrix[i, j] = _parse_entry(value, f"{key_path}.entries[{i}][{j}]")
    if not check_hermitian(matrix, HERMITIAN_TOL):
        raise NonHermitianBasis("matrix is not Hermitian within 1e-10", key_path)
    return matrix


# =============================================================================
# Scenario
# =============================================================================

@dataclass(frozen=True)
class Scenario:
    """A fully validated scenario."""

    name: str
    system: PullbackSystem
    paths: dict[str, ParameterPath]
    defaults: IntegratorConfig
    constants: dict[str, float] = field(default_factory=dict)
    bases: dict[str, np.ndarray] = field(default_factory=dict)
    description: str = ""
    initial_state: Optional[np.ndarray] = None
    # raw t0/t1 sources per path, kept so serialization can write expressions back
    path_bounds: dict[str, tuple[str, str]] = field(default_factory=dict)

    @property
    def sign_convention(self) -> str:
        return "paper" if self.system.sign == 1 else "physics"

    def default_path(self) -> str:
        """First declared path (or the template's preferred one)."""
        preferred = TEMPLATE_DEFAULT_PATHS.get(self.name)
        if preferred in self.paths:
            return preferred
        if not self.paths:
            raise FormatError(f"scenario '{self.name}' declares no paths", "paths")
        return next(iter(self.paths))

    def get_path(self, name: Optional[str]) -> ParameterPath:
        name = name or self.default_path()
        if name not in self.paths:
            raise FormatError(f"unknown path '{name}' (declared: {', '.join(self.paths)})", "paths")
        return self.paths[name]


class _Builder:
    """Builds a Scenario from a parsed TOML document."""

    def __init__(self, doc: Mapping[str, Any], overrides: Mapping[str, float], sign_convention: Optional[str]):
        self.doc = doc
        self.overrides = dict(overrides)
        self.sign_convention = sign_convention
        self.settings = get_settings()
        self.constants: dict[str, float] = {}
        self.bases: dict[str, np.ndarray] = {}

    def expression(self, src: Any, key_path: str) -> Expression:
        with _located(key_path):
            return parse_expression(src, self.constants)

    def constant_value(self, src: Any, key_path: str) -> float:
        expr = self.expression(src, key_path)
        if not expr.is_constant:
            raise FormatError(f"'{expr.source}' must not depend on {sorted(expr.variables)}", key_path)
        with _located(key_path):
            return expr.evaluate({})

    def build(self, default_name: str) -> Scenario:
        doc = self.doc
        self._constants(_table(doc.get("constants", {}), "constants"))
        self._bases(_table(doc.get("basis", {}), "basis"))
        system, initial_state = self._system(_table(_require(doc, "system", "<root>"), "system"))
        paths, bounds = self._paths(_table(doc.get("paths", {}), "paths"), system)
        defaults = self._integrator(_table(doc.get("integrator", {}), "integrator"))
        name = doc.get("name", default_name)
        logger.info(f"[SCENARIO] loaded '{name}': n={system.n}, d={system.d}, paths={list(paths)}")
        return Scenario(
            name=str(name),
            description=str(doc.get("description", get_template_description(str(name)))),
            constants=dict(self.constants),
            bases=dict(self.bases),
            system=system,
            paths=paths,
            defaults=defaults,
            initial_state=initial_state,
            path_bounds=bounds,
        )

    def _constants(self, table: Mapping[str, Any]) -> None:
        for name, value in table.items():
            key_path = f"constants.{name}"
            if name in RESERVED:
                raise FormatError(f"'{name}' is reserved and cannot be a constant", key_path)
            self.constants[name] = _number(value, key_path)
        for name, value in self.overrides.items():
            if name not in self.constants:
                raise FormatError(f"--set {name}: not a declared constant "
                                  f"(declared: {', '.join(self.constants) or 'none'})", f"constants.{name}")
            if not math.isfinite(value):
                raise FormatError(f"--set {name}: value must be finite", f"constants.{name}")
            self.constants[name] = float(value)

    def _bases(self, table: Mapping[str, Any]) -> None:
        for name, spec in table.items():
            key_path = f"basis.{name}"
            if builtin_basis(name) is not None:
                raise FormatError(f"'{name}' shadows a built-in basis", key_path)
            self.bases[name] = _parse_dense_basis(_table(spec, key_path), key_path)

    def _basis(self, name: Any, n: int, key_path: str) -> np.ndarray:
        if not isinstance(name, str):
            raise FormatError(f"basis must be a name, got {name!r}", key_path)
        with _located(key_path):
            matrix = self.bases.get(name)
            if matrix is None:
                matrix = builtin_basis(name)
        if matrix is None:
            raise FormatError(f"unknown basis '{name}'", key_path)
        if matrix.shape[0] != n:
            raise DimensionMismatch(f"basis '{name}' is {matrix.shape[0]}x{matrix.shape[0]} "
                                    f"inside a dimension-{n} system", key_path)
        return matrix

    def _field(self, terms: Any, n: int, key_path: str) -> OperatorField:
        built = []
        for i, term in enumerate(_array(terms, key_path)):
            term_path = f"{key_path}[{i}]"
            term = _table(term, term_path)
            coeff = self.expression(_require(term, "coeff", term_path), f"{term_path}.coeff")
            label = _require(term, "basis", term_path)
            basis = self._basis(label, n, f"{term_path}.basis")
            built.append(FieldTerm(coeff, basis, label))
        with _located(key_path):
            return OperatorField(n, built)

    def _system(self, table: Mapping[str, Any]) -> tuple[PullbackSystem, Optional[np.ndarray]]:
        n = _integer(_require(table, "dimension", "system"), "system.dimension")
        d = _integer(table.get("parameter_dim", 0), "system.parameter_dim")
        if n < 1 or d < 0 or d > 16:
            raise FormatError(f"need dimension >= 1 and 0 <= parameter_dim <= 16, got {n}, {d}", "system")

        hamiltonian = self._field(table.get("hamiltonian", []), n, "system.hamiltonian")
        components = _array(table.get("connection", []), "system.connection")
        if len(components) != d:
            raise DimensionMismatch(f"{len(components)} connection components for parameter_dim {d}",
                                    "system.connection")
        connection = []
        for m, component in enumerate(components):
            key_path = f"system.connection[{m}]"
            connection.append(self._field(_table(component, key_path).get("terms", []), n, f"{key_path}.terms"))

        convention = self.sign_convention or table.get("sign_convention") or self.settings.sign_convention
        if convention not in SIGN_CONVENTIONS:
            raise FormatError(f"sign_convention must be 'paper' or 'physics', got {convention!r}",
                              "system.sign_convention")

        initial_state = None
        if "initial_state" in table:
            entries = _array(table["initial_state"], "system.initial_state")
            if len(entries) != n:
                raise DimensionMismatch(f"initial state has {len(entries)} entries, expected {n}",
                                        "system.initial_state")
            initial_state = np.array([_parse_entry(v, f"system.initial_state[{i}]") for i, v in enumerate(entries)])
            norm = np.linalg.norm(initial_state)
            if norm == 0.0:
                raise FormatError("initial state is zero", "system.initial_state")
            initial_state = initial_state / norm

        return PullbackSystem(hamiltonian, connection, SIGN_CONVENTIONS[convention]), initial_state

    def _paths(self, table: Mapping[str, Any], system: PullbackSystem):
        paths: dict[str, ParameterPath] = {}
        bounds: dict[str, tuple[str, str]] = {}
        for name, spec in table.items():
            key_path = f"paths.{name}"
            spec = _table(spec, key_path)
            t0_src = _require(spec, "t0", key_path)
            t1_src = _require(spec, "t1", key_path)
            t0 = self.constant_value(t0_src, f"{key_path}.t0")
            t1 = self.constant_value(t1_src, f"{key_path}.t1")
            coords = [
                self.expression(src, f"{key_path}.coords[{m}]")
                for m, src in enumerate(_array(spec.get("coords", []), f"{key_path}.coords"))
            ]
            if len(coords) != system.d:
                raise DimensionMismatch(f"{len(coords)} coordinates for parameter_dim {system.d}", f"{key_path}.coords")
            breakpoints = [
                self.constant_value(src, f"{key_path}.breakpoints[{i}]")
                for i, src in enumerate(_array(spec.get("breakpoints", []), f"{key_path}.breakpoints"))
            ]
            step = _number(spec.get("derivative_step", self.settings.derivative_step), f"{key_path}.derivative_step")
            with _located(key_path):
                paths[name] = ParameterPath(
                    t0, t1, coords,
                    closed=bool(spec.get("closed", False)),
                    derivative_step=step,
                    breakpoints=breakpoints,
                    name=name,
                )
            bounds[name] = (t0_src, t1_src)
        return paths, bounds

    def _integrator(self, table: Mapping[str, Any]) -> IntegratorConfig:
        values = {
            "method": self.settings.default_method,
            "tol": self.settings.default_tol,
            "max_steps": self.settings.max_steps,
        }
        values.update(table)
        try:
            return IntegratorConfig(**values)
        except ValidationError as exc:
            raise FormatError(f"invalid integrator settings: {exc.errors()[0]['msg']}", "integrator") from None


def resolve_source(source: Union[str, Path]) -> Path:
    """A scenario file path, or the template file of that name."""
    path = Path(source)
    if path.is_file():
        return path
    template = Path(get_settings().template_dir) / f"{source}.toml"
    if template.is_file():
        return template
    raise FormatError(f"no scenario file or template named '{source}'", "<scenario>")


def build_scenario(
    doc: Mapping[str, Any],
    name: str = "scenario",
    overrides: Optional[Mapping[str, float]] = None,
    sign_convention: Optional[str] = None,
) -> Scenario:
    """Validate a parsed document into a Scenario."""
    return _Builder(doc, overrides or {}, sign_convention).build(name)


def load_scenario(
    source: Union[str, Path],
    overrides: Optional[Mapping[str, float]] = None,
    sign_convention: Optional[str] = None,
) -> Scenario:
    """Load and validate a scenario file or built-in template.

    Args:
        source: File path or template name (looked up in Settings.template_dir)
        overrides: Constant overrides (--set name=value)
        sign_convention: "paper" or "physics"; overrides the file

    Returns:
        Validated Scenario
    """
    path = resolve_source(source)
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(f"invalid TOML: {exc}", str(path)) from None
    except UnicodeDecodeError as exc:
        raise FormatError(f"scenario file is not valid UTF-8: {exc.reason} at byte {exc.start}", str(path)) from None
    return build_scenario(doc, path.stem, overrides, sign_convention)


# =============================================================================
# Serialization
# =============================================================================

def _entry(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _terms_doc(field: OperatorField) -> list[dict[str, str]]:
    return [{"coeff": term.coefficient.source, "basis": term.label} for term in field.terms]


def scenario_document(scenario: Scenario) -> dict[str, Any]:
    """The TOML document describing `scenario`."""
    system = scenario.system
    doc: dict[str, Any] = {"name": scenario.name}
    if scenario.description:
        doc["description"] = scenario.description
    if scenario.constants:
        doc["constants"] = {k: float(v) for k, v in scenario.constants.items()}
    if scenario.bases:
        doc["basis"] = {
            name: {"entries": [[_entry(z) for z in row] for row in matrix]}
            for name, matrix in scenario.bases.items()
        }

    system_doc: dict[str, Any] = {
        "dimension": system.n,
        "parameter_dim": system.d,
        "sign_convention": scenario.sign_convention,
        "hamiltonian": _terms_doc(system.hamiltonian),
    }
    if scenario.initial_state is not None:
        system_doc["initial_state"] = [_entry(z) for z in scenario.initial_state]
    system_doc["connection"] = [{"terms": _terms_doc(field)} for field in system.connection]
    doc["system"] = system_doc

    paths_doc = {}
    for name, path in scenario.paths.items():
        t0, t1 = scenario.path_bounds.get(name, (path.t0, path.t1))
        entry: dict[str, Any] = {
            "t0": t0,
            "t1": t1,
            "coords": [coord.source for coord in path.coords],
            "closed": path.closed,
            "derivative_step": path.derivative_step,
        }
        if path.breakpoints:
            entry["breakpoints"] = list(path.breakpoints)
        paths_doc[name] = entry
    doc["paths"] = paths_doc
    doc["integrator"] = scenario.defaults.model_dump(exclude_none=True)
    return doc


def serialize_scenario(scenario: Scenario) -> str:
    """TOML text that reloads to an equivalent Scenario."""
    return tomli_w.dumps(scenario_document(scenario))


def loads_scenario(text: str, name: str = "scenario", sign_convention: Optional[str] = None) -> Scenario:
    """Parse scenario TOML text."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(f"invalid TOML: {exc}", "<text>") from None
    return build_scenario(doc, name, sign_convention=sign_convention)
