"""Exact-rational helpers shared by the combinatorial modules."""
from __future__ import annotations

from fractions import Fraction
from typing import Any, Iterable

import numpy as np

ZERO = Fraction(0)
ONE = Fraction(1)


def frac(value: Any) -> Fraction:
    """Coerce ints, Fractions, "num/den" strings and exact floats to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        # only dyadic floats that were typed in by hand (0.5, 0.25, ...)
        return Fraction(float(value)).limit_denominator(10**12)
    raise TypeError(f"cannot convert {value!r} to a rational")


def frac_str(value: Fraction) -> str:
    value = frac(value)
    return f"{value.numerator}/{value.denominator}"


def frac_array(values: Any, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Object array of Fractions from nested lists / arrays."""
    arr = np.array(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = frac(arr[idx])
    if shape is not None and out.shape != tuple(shape):
        raise ValueError(f"expected shape {shape}, got {out.shape}")
    return out


def zeros(shape: tuple[int, ...]) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(ZERO)
    return out


def full(shape: tuple[int, ...], value: Fraction) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(frac(value))
    return out


def is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def to_float(arr: np.ndarray) -> np.ndarray:
    return np.asarray(arr, dtype=float)


def snap(value: float, max_den: int = 72, tol: float = 1e-6) -> Fraction | None:
    """Nearest rational with denominator <= max_den, if within tol."""
    cand = Fraction(value).limit_denominator(max_den)
    if abs(float(cand) - value) <= tol:
        return cand
    return None


def random_fraction(rng: np.random.Generator, max_den: int = 6) -> Fraction:
    den = int(rng.integers(1, max_den + 1))
    return Fraction(int(rng.integers(0, den + 1)), den)


def random_stochastic(rng: np.random.Generator, rows: int, cols: int,
                      max_den: int = 6) -> np.ndarray:
    """Row-stochastic Fraction matrix with small denominators."""
    out = zeros((rows, cols))
    for r in range(rows):
        den = int(rng.integers(1, max_den + 1))
        cuts = np.sort(rng.integers(0, den + 1, size=cols - 1))
        parts = np.diff(np.concatenate(([0], cuts, [den])))
        for c in range(cols):
            out[r, c] = Fraction(int(parts[c]), den)
    return out


def lcm_denominator(values: Iterable[Fraction]) -> int:
    den = 1
    for v in values:
        den = np.lcm(den, frac(v).denominator)
    return int(den)
