"""Scalar numerical kernels: complete elliptic integrals and bracketed bisection."""

import math

from .errors import FlipchipError, RootNotFoundError

AGM_TOL = 1e-15
AGM_MAXITER = 64


def agm(a, b):
    """Arithmetic-geometric mean of two positive numbers."""
    if a <= 0 or b <= 0:
        raise FlipchipError(f"agm requires positive arguments, got {a}, {b}")
    for _ in range(AGM_MAXITER):
        if abs(a - b) <= AGM_TOL * a:
            return 0.5 * (a + b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    raise FlipchipError("arithmetic-geometric mean did not converge")


def ellipk(k, kp=None):
    """Complete elliptic integral of the first kind K(k) for modulus ``k``.

    Note the argument is the modulus k, not the parameter m = k**2 used by
    scipy.  ``kp`` may pass the complementary modulus sqrt(1 - k**2) when it
    is known more accurately than it can be recomputed from ``k``.
    """
    if not 0 <= k < 1:
        raise FlipchipError(f"elliptic modulus must lie in [0, 1), got {k}")
    if kp is None:
        kp = math.sqrt((1.0 - k) * (1.0 + k))
    return math.pi / (2.0 * agm(1.0, kp))


def ellipk_ratio(k, kp=None):
    """K(k) / K(k'), the modulus ratio that appears in every conformal map.

    With ``kp`` supplied, k may round to 1.0 while k' stays accurate.
    """
    if kp is None:
        kp = math.sqrt((1.0 - k) * (1.0 + k))
    if not (0 < k <= 1 and 0 < kp <= 1):
        raise FlipchipError(f"elliptic modulus out of range: k={k}, k'={kp}")
    return agm(1.0, k) / agm(1.0, kp)


def bisect(func, lo, hi, xtol, maxiter=200):
    """Root of ``func`` in [lo, hi] by bisection, returned once the bracket is narrower than ``xtol``."""
    f_lo = func(lo)
    f_hi = func(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if math.isnan(f_lo) or math.isnan(f_hi) or (f_lo > 0) == (f_hi > 0):
        raise RootNotFoundError(
            f"no sign change in bracket [{lo!r}, {hi!r}]: f={f_lo!r}, {f_hi!r}"
        )
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid in (lo, hi):
            return mid
        f_mid = func(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
