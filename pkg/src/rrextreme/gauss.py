"""Dense matrix inversion by Gauss-Jordan elimination with partial pivoting.

Works on lists of lists over any field-like number type that supports
``+ - * /``, ``abs`` and comparison (float, ``fractions.Fraction``, mpmath
``mpf``).  Matrices here are at most a few dozen rows, so a textbook
kernel is enough; the point of staying generic is that the caller picks
the arithmetic, including extended precision for ill-conditioned input.
"""

from __future__ import annotations

from typing import Callable, Sequence, TypeVar

__all__ = ["SingularMatrixError", "invert", "matmul", "max_abs_residual"]

T = TypeVar("T")


class SingularMatrixError(ArithmeticError):
    pass


def invert(a: Sequence[Sequence[T]], zero: T, one: T) -> list[list[T]]:
    n = len(a)
    if any(len(row) != n for row in a):
        raise ValueError("matrix must be square")
    # augmented [A | I]
    work = [list(row) + [one if i == j else zero for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(work[r][col]))
        if work[pivot][col] == zero:
            raise SingularMatrixError(f"zero pivot in column {col}")
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
        prow = work[col]
        inv_p = one / prow[col]
        for j in range(col, 2 * n):
            prow[j] *= inv_p
        for r in range(n):
            if r == col:
                continue
            row = work[r]
            factor = row[col]
            if factor == zero:
                continue
            for j in range(col, 2 * n):
                row[j] -= factor * prow[j]
    return [row[n:] for row in work]


def matmul(a: Sequence[Sequence[T]], b: Sequence[Sequence[T]], zero: T) -> list[list[T]]:
    inner = len(b)
    cols = len(b[0])
    out = []
    for row in a:
        if len(row) != inner:
            raise ValueError("dimension mismatch")
        acc_row = []
        for j in range(cols):
            s = zero
            for k in range(inner):
                s += row[k] * b[k][j]
            acc_row.append(s)
        out.append(acc_row)
    return out


def max_abs_residual(
    a: Sequence[Sequence[T]],
    a_inv: Sequence[Sequence[T]],
    zero: T,
    one: T,
    to_float: Callable[[T], float] = float,
) -> float:
    """``max |A @ A_inv - I|`` evaluated in the matrices' own arithmetic."""
    prod = matmul(a, a_inv, zero)
    worst = 0.0
    for i, row in enumerate(prod):
        for j, v in enumerate(row):
            d = to_float(abs(v - (one if i == j else zero)))
            if d > worst:
                worst = d
    return worst
