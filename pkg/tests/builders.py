"""Small constructors shared by the test modules."""

from typing import Sequence

import numpy as np

from holomech.data.expression import parse_expression
from holomech.services.bundle import FieldTerm, OperatorField, ParameterPath, PullbackSystem

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def field(n: int, *terms) -> OperatorField:
    """field(2, ("cos(t)", SIGMA_X), ("0.5", SIGMA_Z))"""
    return OperatorField(n, [FieldTerm(parse_expression(c), np.asarray(B, dtype=complex), f"b{i}")
                             for i, (c, B) in enumerate(terms)])


def path(coords: Sequence[str], t0: float = 0.0, t1: float = 1.0, closed: bool = False,
         breakpoints: Sequence[float] = (), name: str = "h") -> ParameterPath:
    return ParameterPath(t0, t1, [parse_expression(c) for c in coords], closed=closed,
                         breakpoints=breakpoints, name=name)


def circle(radius: float = 1.0, center=(0.0, 0.0), t1: float = 1.0, name: str = "circle") -> ParameterPath:
    cx, cy = center
    return path([f"{cx} + {radius}*cos(2*pi*t/{t1})", f"{cy} + {radius}*sin(2*pi*t/{t1})"],
                0.0, t1, closed=True, name=name)


def random_hermitian(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (X + X.conj().T)


def random_system(rng: np.random.Generator, n: int, d: int, terms: int = 2) -> PullbackSystem:
    """Smooth random system: H(t) and A_m(t, sigma) built from trigonometric coefficients."""
    h_terms = []
    for _ in range(terms):
        a, w, p = rng.uniform(0.2, 1.0), rng.uniform(0.5, 2.0), rng.uniform(0.0, 3.0)
        h_terms.append((f"{a:.6f}*cos({w:.6f}*t + {p:.6f})", random_hermitian(rng, n, 0.5)))
    connection = []
    for m in range(1, d + 1):
        c0, c1 = rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6)
        connection.append(field(
            n,
            (f"{c0:.6f}", random_hermitian(rng, n, 0.5)),
            (f"{c1:.6f}*sin(s{m})", random_hermitian(rng, n, 0.5)),
        ))
    return PullbackSystem(field(n, *h_terms), connection)


def random_loop(rng: np.random.Generator, d: int, name: str = "loop") -> ParameterPath:
    """Closed smooth loop in R^d over t in [0, 1]."""
    coords = []
    for _ in range(d):
        c, a, b = rng.uniform(-0.5, 0.5), rng.uniform(0.2, 1.0), rng.uniform(0.0, 0.5)
        k = int(rng.integers(1, 3))
        coords.append(f"{c:.6f} + {a:.6f}*cos(2*pi*{k}*t) + {b:.6f}*sin(2*pi*t)")
    return path(coords, 0.0, 1.0, closed=True, name=name)
