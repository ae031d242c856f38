"""Coefficient expression language.

Parsed by a lark LALR grammar (``GRAMMAR`` below); precedence low -> high is
``+ -``, ``* /``, unary ``-``, ``^`` (right-associative, so ``-2^2 = -4`` and
``2^-1 = 0.5``).

Variables are ``t`` and ``s1`` .. ``s16``; ``pi`` and ``e`` are built in and
scenario constants may add more names. Functions: sin cos tan exp log sqrt
abs atan2 step, plus ``piecewise(x, below, above)`` which evaluates only the
branch selected by the sign of x.
"""

import math
from contextvars import ContextVar
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Optional, Union

from lark import Lark, Token as LarkToken, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError

from holomech.errors import ExpressionDomainError, ExpressionSyntaxError, HolomechError, UnknownIdentifier

VARIABLES = frozenset(["t"] + [f"s{m}" for m in range(1, 17)])
BUILTIN_CONSTANTS: dict[str, float] = {"pi": math.pi, "e": math.e}


def _step(x: float) -> float:
    return 1.0 if x >= 0.0 else 0.0


FUNCTIONS: dict[str, tuple[int, Callable[..., float]]] = {
    "sin": (1, math.sin),
    "cos": (1, math.cos),
    "tan": (1, math.tan),
    "exp": (1, math.exp),
    "log": (1, math.log),
    "sqrt": (1, math.sqrt),
    "abs": (1, abs),
    "atan2": (2, math.atan2),
    "step": (1, _step),
}

PIECEWISE = "piecewise"

RESERVED = VARIABLES | frozenset(BUILTIN_CONSTANTS) | frozenset(FUNCTIONS) | {PIECEWISE}


# =============================================================================
# AST
# =============================================================================

class Node:
    """Base AST node."""

    def evaluate(self, env: Mapping[str, float]) -> float:
        raise NotImplementedError

    def render(self) -> str:
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        return frozenset()

    def substitute(self, mapping: Mapping[str, "Node"]) -> "Node":
        return self

    def derivative(self, var: str) -> "Node":
        return ZERO


@dataclass(frozen=True)
class Number(Node):
    value: float

    def evaluate(self, env):
        return self.value

    def render(self):
        return repr(self.value) if self.value >= 0 else f"(-{repr(-self.value)})"


ZERO = Number(0.0)
ONE = Number(1.0)


@dataclass(frozen=True)
class Constant(Node):
    name: str
    value: float

    def evaluate(self, env):
        return self.value

    def render(self):
        return self.name


@dataclass(frozen=True)
class Variable(Node):
    name: str

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnknownIdentifier(f"variable '{self.name}' is not bound") from None

    def render(self):
        return self.name

    def variables(self):
        return frozenset([self.name])

    def substitute(self, mapping):
        return mapping.get(self.name, self)

    def derivative(self, var):
        return ONE if self.name == var else ZERO


@dataclass(frozen=True)
class Neg(Node):
    operand: Node

    def evaluate(self, env):
        return -self.operand.evaluate(env)

    def render(self):
        return f"(-{self.operand.render()})"

    def variables(self):
        return self.operand.variables()

    def substitute(self, mapping):
        return neg(self.operand.substitute(mapping))

    def derivative(self, var):
        return neg(self.operand.derivative(var))


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if b == 0.0:
                raise ExpressionDomainError(f"division by zero in '{self.render()}'")
            return a / b
        try:
            return math.pow(a, b)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise ExpressionDomainError(f"{a!r} ^ {b!r}: {exc}") from None

    def render(self):
        return f"({self.left.render()} {self.op} {self.right.render()})"

    def variables(self):
        return self.left.variables() | self.right.variables()

    def substitute(self, mapping):
        return binary(self.op, self.left.substitute(mapping), self.right.substitute(mapping))

    def derivative(self, var):
        a, b = self.left, self.right
        da, db = a.derivative(var), b.derivative(var)
        if self.op in "+-":
            return binary(self.op, da, db)
        if self.op == "*":
            return add(mul(da, b), mul(a, db))
        if self.op == "/":
            return div(sub(mul(da, b), mul(a, db)), power(b, Number(2.0)))
        # a ^ b
        if var not in b.variables():
            return mul(mul(b, power(a, sub(b, ONE))), da)
        return mul(self, add(mul(db, call("log", a)), div(mul(b, da), a)))


@dataclass(frozen=True)
class Call(Node):
    func: str
    args: tuple[Node, ...]

    def evaluate(self, env):
        values = [arg.evaluate(env) for arg in self.args]
        try:
            return FUNCTIONS[self.func][1](*values)
        except (ValueError, OverflowError) as exc:
            raise ExpressionDomainError(f"{self.func}{tuple(values)}: {exc}") from None

    def render(self):
        return f"{self.func}({', '.join(arg.render() for arg in self.args)})"

    def variables(self):
        out = frozenset()
        for arg in self.args:
            out |= arg.variables()
        return out

    def substitute(self, mapping):
        return call(self.func, *(arg.substitute(mapping) for arg in self.args))

    def derivative(self, var):
        if self.func == "atan2":
            y, x = self.args
            num = sub(mul(x, y.derivative(var)), mul(y, x.derivative(var)))
            return div(num, add(power(x, Number(2.0)), power(y, Number(2.0))))
        (a,) = self.args
        da = a.derivative(var)
        if da == ZERO or self.func == "step":
            return ZERO
        outer = {
            "sin": lambda: call("cos", a),
            "cos": lambda: neg(call("sin", a)),
            "tan": lambda: div(ONE, power(call("cos", a), Number(2.0))),
            "exp": lambda: self,
            "log": lambda: div(ONE, a),
            "sqrt": lambda: div(ONE, mul(Number(2.0), self)),
            "abs": lambda: sub(mul(Number(2.0), call("step", a)), ONE),
        }[self.func]()
        return mul(outer, da)


@dataclass(frozen=True)
class Piecewise(Node):
    """``below`` where at < 0, else ``above``; the other branch is never evaluated."""

    at: Node
    below: Node
    above: Node

    def evaluate(self, env):
        branch = self.above if self.at.evaluate(env) >= 0.0 else self.below
        return branch.evaluate(env)

    def render(self):
        return f"{PIECEWISE}({self.at.render()}, {self.below.render()}, {self.above.render()})"

    def variables(self):
        return self.at.variables() | self.below.variables() | self.above.variables()

    def substitute(self, mapping):
        return Piecewise(self.at.substitute(mapping), self.below.substitute(mapping),
                         self.above.substitute(mapping))

    def derivative(self, var):
        below, above = self.below.derivative(var), self.above.derivative(var)
        if below == ZERO and above == ZERO:
            return ZERO
        return Piecewise(self.at, below, above)


# smart constructors fold the zeros and ones symbolic derivatives produce

def neg(a: Node) -> Node:
    if isinstance(a, Number):
        return Number(-a.value)
    return Neg(a)


def binary(op: str, a: Node, b: Node) -> Node:
    return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[op](a, b)


def add(a: Node, b: Node) -> Node:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Binary("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return Binary("-", a, b)


def mul(a: Node, b: Node) -> Node:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Binary("*", a, b)


def div(a: Node, b: Node) -> Node:
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return Binary("/", a, b)


def power(a: Node, b: Node) -> Node:
    if b == ONE:
        return a
    return Binary("^", a, b)


def call(func: str, *args: Node) -> Node:
    return Call(func, tuple(args))


# =============================================================================
# Expression wrapper
# =============================================================================

class Expression:
    """Parsed coefficient expression with its source text."""

    def __init__(self, root: Node, source: Optional[str] = None):
        self.root = root
        self.source = source if source is not None else root.render()
        self.variables = root.variables()

    def evaluate(self, env: Mapping[str, float]) -> float:
        value = float(self.root.evaluate(env))
        if not math.isfinite(value):
            raise ExpressionDomainError(f"'{self.source}' evaluated to {value}")
        return value

    __call__ = evaluate

    @property
    def is_constant(self) -> bool:
        return not self.variables

    def substitute(self, mapping: Mapping[str, Union["Expression", Node]]) -> "Expression":
        nodes = {k: (v.root if isinstance(v, Expression) else v) for k, v in mapping.items()}
        return Expression(self.root.substitute(nodes))

    def derivative(self, var: str) -> "Expression":
        return Expression(self.root.derivative(var))

    def __str__(self) -> str:
        return self.root.render()

    def __repr__(self) -> str:
        return f"Expression({self.source!r})"


# =============================================================================
# Parser
# =============================================================================

GRAMMAR = r"""
    ?start: sum

    ?sum: product
        | sum "+" product       -> add
        | sum "-" product       -> sub

    ?product: unary
        | product "*" unary     -> mul
        | product "/" unary     -> div

    ?unary: power
        | "-" unary             -> neg

    ?power: atom
        | atom "^" unary        -> pow

    ?atom: NUMBER               -> number
        | NAME                  -> name
        | NAME "(" sum ("," sum)* ")" -> call
        | "(" sum ")"

    NUMBER: /(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?/
    NAME: /[A-Za-z_][A-Za-z0-9_]*/

    %import common.WS
    %ignore WS
"""

# lark terminal names -> what the user typed
_TERMINALS: dict[str, str] = {
    "PLUS": "+",
    "MINUS": "-",
    "STAR": "*",
    "SLASH": "/",
    "CIRCUMFLEX": "^",
    "LPAR": "(",
    "RPAR": ")",
    "COMMA": ",",
    "NUMBER": "number",
    "NAME": "identifier",
    "$END": "end of input",
}

# scenario constants visible to the parse running in this thread
_constants: ContextVar[Mapping[str, float]] = ContextVar("expression_constants", default={})


def _syntax_error(message: str, token: LarkToken, expected) -> ExpressionSyntaxError:
    return ExpressionSyntaxError(message, token.line, token.column, frozenset(expected))


@v_args(inline=True)
class _AstBuilder(Transformer):
    """Builds AST nodes while the LALR parser reduces."""

    def number(self, token):
        return Number(float(token))

    def add(self, a, b):
        return Binary("+", a, b)

    def sub(self, a, b):
        return Binary("-", a, b)

    def mul(self, a, b):
        return Binary("*", a, b)

    def div(self, a, b):
        return Binary("/", a, b)

    def pow(self, a, b):
        return Binary("^", a, b)

    def neg(self, a):
        return Neg(a)

    def name(self, token):
        ident = str(token)
        if ident in VARIABLES:
            return Variable(ident)
        if ident in BUILTIN_CONSTANTS:
            return Constant(ident, BUILTIN_CONSTANTS[ident])
        constants = _constants.get()
        if ident in constants:
            return Constant(ident, float(constants[ident]))
        if ident in FUNCTIONS or ident == PIECEWISE:
            raise _syntax_error(f"function '{ident}' needs an argument list", token, {"("})
        raise UnknownIdentifier(f"unknown identifier '{ident}' at line {token.line}, column {token.column}")

    def call(self, token, *args):
        ident = str(token)
        if ident == PIECEWISE:
            arity = 3
        elif ident in FUNCTIONS:
            arity = FUNCTIONS[ident][0]
        else:
            raise UnknownIdentifier(f"unknown function '{ident}' at line {token.line}, column {token.column}")
        if len(args) != arity:
            raise _syntax_error(f"{ident} takes {arity} argument(s), got {len(args)}", token,
                                {f"{arity} argument(s)"})
        if ident == PIECEWISE:
            return Piecewise(*args)
        return Call(ident, tuple(args))


@lru_cache
def _parser() -> Lark:
    """LALR parser; the transformer runs during parsing, so nesting depth costs no recursion."""
    return Lark(GRAMMAR, parser="lalr", transformer=_AstBuilder())


def _end_position(src: str) -> tuple[int, int]:
    return src.count("\n") + 1, len(src) - (src.rfind("\n") + 1) + 1


def _translate(exc: UnexpectedInput, src: str) -> ExpressionSyntaxError:
    """lark's UnexpectedToken / UnexpectedCharacters / UnexpectedEOF as ExpressionSyntaxError."""
    expected = getattr(exc, "expected", None) or getattr(exc, "allowed", None) or set()
    expected = {_TERMINALS.get(name, name) for name in expected}
    token = getattr(exc, "token", None)
    if token is None and hasattr(exc, "char"):
        found = repr(exc.char)
    elif token is None or token.type in ("$END", "<EOF>"):
        found = "end of input"
    else:
        found = repr(str(token))
    line, column = getattr(exc, "line", -1), getattr(exc, "column", -1)
    if found == "end of input" or line < 1 or column < 1:
        line, column = _end_position(src)
    return ExpressionSyntaxError(f"unexpected {found}", line, column, frozenset(expected))


def parse_expression(src: str, constants: Optional[Mapping[str, float]] = None) -> Expression:
    """Parse an expression string.

    Args:
        src: Expression source, e.g. "cos(t)^2 + s1"
        constants: Extra named constants (scenario constants)

    Returns:
        Parsed Expression
    """
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        return Expression(Number(float(src)), repr(float(src)))
    if not isinstance(src, str):
        raise ExpressionSyntaxError(f"expected a string, got {type(src).__name__}", 1, 1,
                                    frozenset(["string"]))

    scope = _constants.set(dict(constants or {}))
    try:
        return Expression(_parser().parse(src), src)
    except UnexpectedInput as exc:
        raise _translate(exc, src) from None
    except VisitError as exc:
        if isinstance(exc.orig_exc, HolomechError):
            raise exc.orig_exc from None
        raise
    except RecursionError:
        line, column = _end_position(src)
        raise ExpressionSyntaxError("expression is nested too deeply", line, column,
                                    frozenset(["a flatter expression"])) from None
    finally:
        _constants.reset(scope)
