"""Adaptive Simpson quadrature with an absolute error target."""

from __future__ import annotations

import math

from .errors import SolverError


def adaptive_simpson(func, a: float, b: float, tol: float = 1e-9, max_depth: int = 60) -> float:
    """Integrate ``func`` over [a, b] to absolute accuracy ``tol``.

    Uses the classic recursive refinement with Richardson correction, run on an
    explicit stack. Endpoints are evaluated, so ``func`` must be finite there.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fm, fb = func(a), func(0.5 * (a + b)), func(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    comp = 0.0  # Kahan compensation; thousands of panels are summed
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = func(lm), func(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - est
        # the relative floor stops refinement once a panel is at roundoff level
        if abs(delta) <= max(15.0 * eps, 1e-15 * abs(left + right)) or depth >= max_depth or mid in (lo, hi):
            if depth >= max_depth and abs(delta) > 15.0 * eps:
                raise SolverError(f"adaptive_simpson: no convergence on [{lo}, {hi}]", (lo, hi))
            y = left + right + delta / 15.0 - comp
            t = total + y
            comp = (t - total) - y
            total = t
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    if not math.isfinite(total):
        raise SolverError("adaptive_simpson: non-finite integral", (a, b))
    return sign * total
