"""Numeric helpers and file output shared by the services."""
import json
import logging
import os

import pandas as pd

logger = logging.getLogger(__name__)

BISECTION_TOL = 1e-12
BISECTION_MAX_ITER = 200


# Power sums by iterated multiplication; all of them work elementwise on numpy
# arrays as well as on floats.
def int_power(z, n: int):
    """z**n for a non-negative integer n."""
    result = 1.0
    for _ in range(n):
        result = result * z
    return result


def geometric_sum(z, n: int):
    """Sum of z**k for k = 0..n, i.e. (1 - z**(n+1)) / (1 - z) without the quotient."""
    total = 1.0
    for _ in range(n):
        total = total * z + 1.0
    return total


def geometric_sum_derivative(z, n: int):
    """d/dz of geometric_sum(z, n): sum of k * z**(k-1) for k = 1..n."""
    total = 0.0
    for k in range(n, 0, -1):
        total = total * z + k
    return total


def divided_difference_sum(a, x, n: int):
    """Sum of a**(n-k) * x**k for k = 0..n, i.e. (a**(n+1) - x**(n+1)) / (a - x)."""
    total = 1.0
    x_power = 1.0
    for _ in range(n):
        x_power = x_power * x
        total = total * a + x_power
    return total


def divided_difference_sum_dx(a, x, n: int):
    """d/dx of divided_difference_sum(a, x, n): sum of k * a**(n-k) * x**(k-1)."""
    total = 0.0
    x_power = 1.0
    for k in range(1, n + 1):
        total = total * a + k * x_power
        x_power = x_power * x
    return total


def bisect_increasing(func, lo: float, hi: float, tol: float = BISECTION_TOL,
                      max_iter: int = BISECTION_MAX_ITER) -> float:
    """Root of a function that is negative at lo and positive at hi.

    Stops once the bracket is narrower than tol or after max_iter halvings.
    """
    f_lo = func(lo)
    f_hi = func(hi)
    if not (f_lo < 0.0 < f_hi):
        raise ValueError(f"root not bracketed: f({lo})={f_lo}, f({hi})={f_hi}")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            break
        f_mid = func(mid)
        if f_mid == 0.0:
            return mid
        if f_mid < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# Output
def ensure_parent_dir(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_csv(path, rows: list, columns: list) -> int:
    """Write rows (dicts) as a header + comma-separated table with \\n line endings."""
    ensure_parent_dir(path)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return len(rows)


def write_json(path, document: dict) -> None:
    ensure_parent_dir(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(document, indent=2))
        f.write("\n")
    logger.info(f"Wrote JSON document to {path}")


def complex_parts(values) -> dict:
    """Flatten a pair of eigenvalues into eig1_re, eig1_im, eig2_re, eig2_im."""
    parts = {}
    for index, value in enumerate(values, start=1):
        parts[f"eig{index}_re"] = float(value.real)
        parts[f"eig{index}_im"] = float(value.imag)
    return parts
