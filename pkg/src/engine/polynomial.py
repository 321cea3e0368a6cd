"""
Polynomial helpers: polished roots, exact evaluation, and the small expression
grammar accepted by ``--f``/``--g`` on the command line.

Coefficient lists are ascending: [a0, a1, ..., ad] means a0 + a1 x + ... + ad x^d.
"""
import re
from fractions import Fraction
from typing import List, Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from src.engine.errors import SchemaError

Coeff = Union[complex, float, Fraction]

_TERM = re.compile(
    r"^(?P<coef>\d+(?:\.\d*)?(?:/\d+)?|\.\d+)?"
    r"\*?"
    r"(?P<var>[a-z](?:\^(?P<pow>\d+))?)?"
    r"(?:/(?P<div>\d+))?$"
)


def trim(coeffs: Sequence[Coeff]) -> List[Coeff]:
    out = list(coeffs)
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


def degree(coeffs: Sequence[Coeff]) -> int:
    return len(trim(coeffs)) - 1


def evaluate(coeffs: Sequence[Coeff], x):
    """Horner evaluation; exact when both sides are rational, vectorised for arrays."""
    acc = 0 * x
    for c in reversed(list(coeffs)):
        acc = acc * x + c
    return acc


def derivative(coeffs: Sequence[Coeff], order: int = 1) -> List[Coeff]:
    out = list(coeffs)
    for _ in range(order):
        out = [k * out[k] for k in range(1, len(out))] or [0]
    return out


def reflect(coeffs: Sequence[Coeff]) -> List[Coeff]:
    """Coefficients of x ↦ P(-x)."""
    return [c if k % 2 == 0 else -c for k, c in enumerate(coeffs)]


def as_complex(coeffs: Sequence[Coeff]) -> np.ndarray:
    return np.array([complex(c) for c in coeffs], dtype=complex)


def roots_polished(coeffs: Sequence[Coeff], newton_steps: int = 2) -> np.ndarray:
    """Companion-matrix roots followed by Newton polishing, sorted by (Re, Im)."""
    c = as_complex(trim(coeffs))
    if len(c) < 2:
        return np.zeros(0, dtype=complex)
    roots = npoly.polyroots(c).astype(complex)
    dc = npoly.polyder(c)
    for _ in range(newton_steps):
        fx = npoly.polyval(roots, c)
        dfx = npoly.polyval(roots, dc)
        safe = np.abs(dfx) > 0
        roots[safe] = roots[safe] - fx[safe] / dfx[safe]
    order = np.lexsort((np.round(roots.imag, 12), np.round(roots.real, 12)))
    return roots[order]


def scale_of(coeffs: Sequence[Coeff]) -> float:
    return float(max(1.0, max(abs(complex(c)) for c in coeffs)))


# ==================== expression grammar ====================

def parse_polynomial(expr: str, var: str = "u") -> List[Fraction]:
    """
    Parse sums of monomials such as ``4u^3-3u``, ``u^2/2`` or ``1/3*u + 2``.

    Coefficients may be integers, decimals or p/q; anything richer raises SchemaError.
    """
    text = expr.replace(" ", "")
    if not text:
        raise SchemaError("empty polynomial expression")
    if text[0] not in "+-":
        text = "+" + text
    pieces = re.findall(r"([+-])([^+-]*)", text)
    if "".join(sign + body for sign, body in pieces) != text:
        raise SchemaError(f"cannot parse polynomial {expr!r}")

    coeffs: dict = {}
    for sign, body in pieces:
        match = _TERM.match(body)
        if not body or match is None:
            raise SchemaError(f"bad monomial {body!r} in {expr!r}", {"expression": expr})
        name = match.group("var")
        if name is not None and name[0] != var:
            raise SchemaError(f"unknown variable {name[0]!r}; expected {var!r}", {"expression": expr})
        if match.group("coef") is None and name is None:
            raise SchemaError(f"bad monomial {body!r} in {expr!r}", {"expression": expr})
        value = Fraction(match.group("coef")) if match.group("coef") else Fraction(1)
        if match.group("div"):
            value /= int(match.group("div"))
        power = 0
        if name is not None:
            power = int(match.group("pow")) if match.group("pow") else 1
        coeffs[power] = coeffs.get(power, Fraction(0)) + (value if sign == "+" else -value)

    top = max(coeffs)
    return trim([coeffs.get(k, Fraction(0)) for k in range(top + 1)])


def polynomial_to_str(coeffs: Sequence[Coeff], var: str = "u") -> str:
    parts = []
    for k in range(len(coeffs) - 1, -1, -1):
        c = coeffs[k]
        if c == 0:
            continue
        text = _format_coeff(c)
        mono = "" if k == 0 else (var if k == 1 else f"{var}^{k}")
        if mono and text in ("1", "-1"):
            text = text[:-1]
        parts.append(f"{text}{mono}")
    if not parts:
        return "0"
    out = parts[0]
    for p in parts[1:]:
        out += p if p.startswith("-") else "+" + p
    return out


def _format_coeff(c: Coeff) -> str:
    if isinstance(c, (Fraction, int)):
        return str(c)
    c = complex(c)
    if c.imag == 0:
        return f"{c.real:g}"
    return f"({c.real:g}{c.imag:+g}j)"
