"""
Scalar expressions over the Poisson-sphere coordinates a1, a2, a3.

The grammar is numbers, the variables a1, a2, a3, the operators + - * / ^
(and **), parentheses and the functions sin, cos, exp. Anything else, e.g. a
reference to another row of the attitude matrix, is rejected as out of schema.
"""
import re
from typing import Optional

import sympy
from sympy.parsing import sympy_parser

from gyrosym.exceptions import ParseError, ValidationError

VARIABLES = sympy.symbols("a1 a2 a3")
FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}

_TOKEN = re.compile(
    r"(?P<space>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
)

_TRANSFORMATIONS = sympy_parser.standard_transformations + (sympy_parser.convert_xor,)


def _check_tokens(text: str, line: Optional[int], column: Optional[int]) -> None:
    allowed = {str(s) for s in VARIABLES} | set(FUNCTIONS)
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        col = None if column is None else column + pos
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r} in expression {text!r}", line, col or pos + 1)
        name = match.group("name")
        if name is not None and name not in allowed:
            raise ValidationError(
                "schema",
                f"{name!r} is out of schema in {text!r}: expressions may use a1, a2, a3, sin, cos, exp",
                {"expression": text, "name": name, "line": line, "column": col},
            )
        pos = match.end()


def parse_expression(text, line: Optional[int] = None, column: Optional[int] = None) -> sympy.Expr:
    """
    Parse an expression string into a sympy expression in a1, a2, a3.

    Args:
        text: Expression text (numbers are accepted too)
        line: Line of the expression in its source file, for diagnostics
        column: Column of the expression in its source file

    Raises:
        ParseError: malformed expression
        ValidationError: name outside the expression schema
    """
    if isinstance(text, bool) or text is None:
        raise ParseError(f"expected an expression, got {text!r}", line, column)
    if isinstance(text, (int, float)):
        return sympy.sympify(text)
    text = str(text)
    if not text.strip():
        raise ParseError("empty expression", line, column)
    _check_tokens(text, line, column)

    local_dict = {str(s): s for s in VARIABLES}
    local_dict.update(FUNCTIONS)
    try:
        expr = sympy_parser.parse_expr(text, local_dict=local_dict, transformations=_TRANSFORMATIONS)
    except Exception as exc:  # SyntaxError, TypeError, tokenize.TokenError
        raise ParseError(f"cannot parse expression {text!r}: {exc}", line, column) from exc

    if not isinstance(expr, sympy.Expr) or not expr.free_symbols <= set(VARIABLES):
        raise ValidationError("schema", f"expression {text!r} is out of schema", {"expression": text})
    if expr.has(sympy.zoo, sympy.nan, sympy.oo, -sympy.oo):
        raise ValidationError("schema", f"expression {text!r} is not finite", {"expression": text})
    return expr


def format_expression(expr: sympy.Expr) -> str:
    """Render an expression back to the scenario syntax."""
    return str(expr).replace("**", "^")
