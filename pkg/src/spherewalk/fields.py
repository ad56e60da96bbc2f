"""Closed-form scalar coefficient fields.

Every field exposes value, gradient, and Laplacian evaluated pointwise,
all in closed form; estimators never differentiate numerically.  The
catalog is deliberately small: constants, affine functions,
exponentials of a linear form, an isotropic Gaussian bump, a plane-wave
sinusoid, and sums/products of those.  Composite fields assemble their
derivatives by the sum and product rules, so any nesting keeps the
closed-form guarantee.

Arrays passed in are never mutated; fields are immutable after
construction.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Constant",
    "Exponential",
    "GaussianBump",
    "Linear",
    "ProductField",
    "ScalarField",
    "Sinusoid",
    "SumField",
]


def _dot(a, b) -> float:
    """Inner product spelled out term by term.

    Field evaluations sit inside walk loops whose results must be
    reproducible bit for bit against the compiled backend; a spelled-out
    left-to-right accumulation pins the rounding order, which a
    BLAS-backed reduction (or a fused multiply-add) would not.
    """
    s = 0.0
    for i in range(len(a)):
        s += float(a[i]) * float(b[i])
    return s


class ScalarField:
    """Base class: a smooth scalar function with analytic derivatives."""

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return SumField((self, other))

    def __mul__(self, other: "ScalarField") -> "ScalarField":
        return ProductField(self, other)


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Constant(ScalarField):
    c: float

    def value(self, x: np.ndarray) -> float:
        return self.c

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x, dtype=np.float64)

    def laplacian(self, x: np.ndarray) -> float:
        return 0.0


@dataclass(frozen=True)
class Linear(ScalarField):
    """a + b . x"""

    a: float
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", _as_vector(self.b, "b"))

    def value(self, x: np.ndarray) -> float:
        return self.a + _dot(self.b, x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.b.copy()

    def laplacian(self, x: np.ndarray) -> float:
        return 0.0


@dataclass(frozen=True)
class Exponential(ScalarField):
    """exp(c . x)"""

    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", _as_vector(self.c, "c"))

    def value(self, x: np.ndarray) -> float:
        return math.exp(_dot(self.c, x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.c * self.value(x)

    def laplacian(self, x: np.ndarray) -> float:
        return _dot(self.c, self.c) * self.value(x)


@dataclass(frozen=True)
class GaussianBump(ScalarField):
    """baseline + amplitude * exp(-|x - center|^2 / (2 width^2))"""

    center: np.ndarray
    amplitude: float
    width: float
    baseline: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vector(self.center, "center"))
        if self.width <= 0.0:
            raise ValueError("width must be positive")

    def _peak(self, x: np.ndarray) -> float:
        r = x - self.center
        return self.amplitude * math.exp(-_dot(r, r) / (2.0 * self.width**2))

    def value(self, x: np.ndarray) -> float:
        return self.baseline + self._peak(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self._peak(x) * (self.center - x) / self.width**2

    def laplacian(self, x: np.ndarray) -> float:
        r = x - self.center
        w2 = self.width**2
        return self._peak(x) * (_dot(r, r) / w2 - x.size) / w2


@dataclass(frozen=True)
class Sinusoid(ScalarField):
    """offset + amplitude * sin(k . x + phase)"""

    amplitude: float
    frequency: np.ndarray
    phase: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "frequency", _as_vector(self.frequency, "frequency"))

    def value(self, x: np.ndarray) -> float:
        return self.offset + self.amplitude * math.sin(_dot(self.frequency, x) + self.phase)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.amplitude * math.cos(_dot(self.frequency, x) + self.phase) * self.frequency

    def laplacian(self, x: np.ndarray) -> float:
        k2 = _dot(self.frequency, self.frequency)
        return -k2 * self.amplitude * math.sin(_dot(self.frequency, x) + self.phase)


@dataclass(frozen=True)
class SumField(ScalarField):
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if len(terms) < 2:
            raise ValueError("a sum needs at least two terms")
        object.__setattr__(self, "terms", terms)

    def value(self, x: np.ndarray) -> float:
        return sum(t.value(x) for t in self.terms)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = self.terms[0].gradient(x).copy()
        for t in self.terms[1:]:
            g += t.gradient(x)
        return g

    def laplacian(self, x: np.ndarray) -> float:
        return sum(t.laplacian(x) for t in self.terms)


@dataclass(frozen=True)
class ProductField(ScalarField):
    left: ScalarField
    right: ScalarField

    def value(self, x: np.ndarray) -> float:
        return self.left.value(x) * self.right.value(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return (
            self.left.value(x) * self.right.gradient(x)
            + self.right.value(x) * self.left.gradient(x)
        )

    def laplacian(self, x: np.ndarray) -> float:
        # product rule: lap(ab) = a lap b + 2 grad a . grad b + b lap a
        return (
            self.left.value(x) * self.right.laplacian(x)
            + 2.0 * _dot(self.left.gradient(x), self.right.gradient(x))
            + self.right.value(x) * self.left.laplacian(x)
        )


def field_fingerprint(field: ScalarField) -> str:
    """Stable textual identity used in study reports and CSV headers."""
    if dataclasses.is_dataclass(field):
        parts = []
        for f in dataclasses.fields(field):
            v = getattr(field, f.name)
            if isinstance(v, np.ndarray):
                parts.append(f"{f.name}={v.tolist()}")
            elif isinstance(v, tuple):
                parts.append(f"{f.name}=({','.join(field_fingerprint(t) for t in v)})")
            elif isinstance(v, ScalarField):
                parts.append(f"{f.name}={field_fingerprint(v)}")
            else:
                parts.append(f"{f.name}={v!r}")
        return f"{type(field).__name__}({'; '.join(parts)})"
    return type(field).__name__
