"""Scalar functions of marked-point configurations on the circle.

Arm exponents, SLE constants, the radial master function, pure partition
functions for one and two chords (the two-chord case is obtained by
reducing the null-vector PDE system to a second-order ODE in the
cross-ratio and solving it numerically), the Pfaffian total partition
function, the one-free-segment function, the annulus function, invariant
and quasi-invariant densities, and the log-gradients used as SDE drifts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .special_fn import (
    AngleTuple,
    DegenerateConfiguration,
    EllipticParams,
    PairPartition,
    PoleError,
    canonical_pairs,
    enumerate_pair_partitions,
    integrate_chamber,
    is_noncrossing,
    jacobi_cs,
    partition_sign,
    pfaffian,
)

__all__ = [
    "SleConstants",
    "LinkPattern",
    "AnnulusSpec",
    "UnsupportedLinkPattern",
    "enumerate_link_patterns",
    "arm_exponent",
    "g_star",
    "total_z_line",
    "total_z_disk",
    "pure_Z",
    "green_function",
    "pde_residual",
    "r_function",
    "r_disk",
    "h_function",
    "densities",
    "log_gradient",
    "mobius_points",
]


@dataclass(frozen=True)
class SleConstants:
    """The parameter kappa and its derived constants."""

    kappa: float

    def __post_init__(self):
        if not (0.0 < self.kappa <= 4.0):
            raise ValueError(f"kappa must lie in (0, 4], got {self.kappa}")

    @property
    def a(self) -> float:
        return 2.0 / self.kappa

    @property
    def b(self) -> float:
        return (6.0 - self.kappa) / (2.0 * self.kappa)

    @property
    def b_tilde(self) -> float:
        k = self.kappa
        return (k - 2.0) * (6.0 - k) / (8.0 * k)

    @property
    def central_charge(self) -> float:
        k = self.kappa
        return (6.0 - k) * (3.0 * k - 8.0) / (2.0 * k)


class UnsupportedLinkPattern(NotImplementedError):
    """Pure partition functions are only available for N <= 2."""


class LinkPattern(PairPartition):
    """A planar (non-crossing) pairing of {1, ..., 2N}."""

    def __post_init__(self):
        super().__post_init__()
        if not is_noncrossing(self.pairs):
            raise ValueError(f"link pattern must be non-crossing: {self.pairs}")

    @property
    def N(self) -> int:
        return len(self.pairs)


def enumerate_link_patterns(N: int) -> list[LinkPattern]:
    """All C_N non-crossing pairings of {1, ..., 2N}."""
    return [
        LinkPattern(pp.pairs)
        for pp in enumerate_pair_partitions(2 * N)
        if is_noncrossing(pp.pairs)
    ]


def arm_exponent(kappa: float, N: int) -> float:
    """The 2N-arm exponent (16 N^2 - (4 - kappa)^2) / (8 kappa)."""
    if not (0.0 < kappa <= 4.0):
        raise ValueError(f"kappa must lie in (0, 4], got {kappa}")
    if N < 1:
        raise ValueError("N must be >= 1")
    return (16.0 * N * N - (4.0 - kappa) ** 2) / (8.0 * kappa)


def _as_angles(theta) -> np.ndarray:
    if isinstance(theta, AngleTuple):
        return theta.angles
    return AngleTuple(theta).angles


def g_star(theta, kappa: float) -> float:
    """prod_{j<k} |sin(theta^k - theta^j)|^a, the radial master function.

    Returns 0.0 on a coincident configuration (continuous extension).
    """
    a = SleConstants(kappa).a
    try:
        th = _as_angles(theta)
    except DegenerateConfiguration:
        return 0.0
    diff = th[None, :] - th[:, None]
    s = np.abs(np.sin(diff[np.triu_indices(th.size, k=1)]))
    if np.any(s == 0.0):
        return 0.0
    return float(np.exp(a * np.log(s).sum()))


# ---------------------------------------------------------------------------
# total partition function (Pfaffian)


def total_z_line(points) -> float:
    """Pf(1/(x_k - x_j)) for strictly increasing real points."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 1 or x.size % 2 or x.size == 0:
        raise ValueError("need an even number of points")
    if np.any(np.diff(x) <= 0):
        raise ValueError("points must be strictly increasing")
    n = x.size
    m = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            if j != k:
                m[j, k] = 1.0 / (x[k] - x[j])
    return float(pfaffian(m))


def _halfplane_coords(th: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Boundary coordinates under the disk-to-half-plane map.

    With x_j = exp(2i theta^j) and the Moebius map sending the disk to the
    upper half plane, the boundary point at angle theta maps to
    w = tan(theta - c) with derivative weight (1 + w^2)/2; the rotation c
    centers the configuration so all images are finite.
    """
    c = 0.5 * (th[0] + th[-1])
    w = np.tan(th - c)
    dw = 0.5 * (1.0 + w * w)  # |phi'(x_j)|
    return w, dw


def total_z_disk(theta) -> float:
    """Total partition function on the disk with marked angles theta.

    Pulled back from the line through a Moebius map with boundary weight
    b = 1/2 per marked point; the result does not depend on the chosen map.
    """
    th = _as_angles(theta)
    w, dw = _halfplane_coords(th)
    return float(np.prod(dw**0.5)) * total_z_line(w)


def mobius_points(points, lam: float = 1.0, mu: float = 0.0, inv_shift: float | None = None):
    """Apply an order-preserving Moebius map to real points.

    Returns (mapped points, per-point |phi'|).  With ``inv_shift`` = s the
    map is x -> -1/(x - s) (requires s < x_1), composed after the affine
    part; otherwise the map is affine x -> lam x + mu.
    """
    x = np.asarray(points, dtype=float) * lam + mu
    d = np.full(x.shape, abs(lam))
    if inv_shift is not None:
        if inv_shift >= x.min():
            raise ValueError("inversion point must lie left of all points")
        d = d / (x - inv_shift) ** 2
        x = -1.0 / (x - inv_shift)
    return x, d


# ---------------------------------------------------------------------------
# pure partition functions, N <= 2


def _series_coeffs(a: float, b: float, rho: float, terms: int) -> np.ndarray:
    """Frobenius coefficients for the cross-ratio ODE at a regular singular
    point with exponent rho.

    The ODE in polynomial form is
        z^2 (z-1)^2 G'' + 2 a z (2z-1)(z-1) G' - 2 a b G = 0,
    which is invariant under z -> 1-z, so the same recursion serves both
    endpoints.
    """

    def P(r):
        return r * (r - 1.0) + 2.0 * a * r - 2.0 * a * b

    g = np.zeros(terms)
    g[0] = 1.0
    for m in range(1, terms):
        r1 = rho + m - 1
        r2 = rho + m - 2
        rhs = g[m - 1] * (2.0 * r1 * r2 + 6.0 * a * r1)
        if m >= 2:
            rhs -= g[m - 2] * (r2 * (r2 - 1.0) + 4.0 * a * r2)
        denom = P(rho + m)
        if abs(denom) < 1e-9:
            # resonance (integer exponent difference); truncate safely
            return g[:m]
        g[m] = rhs / denom
    return g


class PurePartitionCache:
    """Numerical solution of the two-chord null-vector ODE for one kappa.

    Solves the second-order ODE in the cross-ratio z in (0, 1) with the
    boundary data dictated by the collision asymptotics: the solution
    behaves like z^(-2b) with unit coefficient as z -> 0 (linked pair
    fusing) and like the recessive power (1-z)^a as z -> 1 (unlinked pair
    fusing).  The function for the rotated link pattern is G(1-z).
    """

    Z_EDGE = 1e-6
    GRID = 3001

    def __init__(self, kappa: float):
        self.const = SleConstants(kappa)
        a, b = self.const.a, self.const.b
        self._dom = _series_coeffs(a, b, -2.0 * b, 8)
        self._rec = _series_coeffs(a, b, a, 8)

        def rhs(z, y):
            G, Gp = y
            zz1 = z * (z - 1.0)
            Gpp = -(2.0 * a * (2.0 * z - 1.0) / zz1) * Gp + (2.0 * a * b / zz1**2) * G
            return (Gp, Gpp)

        u0 = self.Z_EDGE
        G0, Gp0 = self._eval_series(self._rec, a, u0)
        sol = solve_ivp(
            rhs,
            (1.0 - u0, u0),
            (G0, -Gp0),  # d/dz = -d/du at z = 1-u
            method="DOP853",
            rtol=1e-12,
            atol=1e-14,
            dense_output=True,
        )
        if not sol.success:
            raise RuntimeError(f"cross-ratio ODE solve failed: {sol.message}")
        # normalize the dominant coefficient at z -> 0 to exactly 1
        zf = np.array([1e-6, 2e-6, 4e-6])
        basis = np.vstack([zf ** (-2 * b), zf ** (2 - 2 * b), zf**a]).T
        coef, *_ = np.linalg.lstsq(basis, sol.sol(zf)[0], rcond=None)
        self._scale = 1.0 / coef[0]
        self.recessive_amplitude = self._scale  # G(z) ~ A (1-z)^a at z -> 1

        # smooth core S(z) = log G + 2b log z - a log(1-z), S(0) = 0
        v = np.linspace(0.0, 1.0, self.GRID)
        zg = u0 + (1.0 - 2.0 * u0) * np.sin(0.5 * math.pi * v) ** 2
        Gv = sol.sol(zg)[0] * self._scale
        if np.any(Gv <= 0):
            raise RuntimeError("pure partition solution lost positivity")
        S = np.log(Gv) + 2 * b * np.log(zg) - a * np.log1p(-zg)
        self._S = CubicSpline(zg, S)
        self._Sp = self._S.derivative()
        self._z_lo = zg[0]
        self._z_hi = zg[-1]
        self._grid_z = zg
        self._grid_G = Gv

    @staticmethod
    def _eval_series(coeffs: np.ndarray, rho: float, u: float) -> tuple[float, float]:
        """(G, dG/du) of u^rho * sum c_m u^m."""
        s = 0.0
        sp = 0.0
        for m, c in enumerate(coeffs):
            s += c * u**m
            sp += c * (rho + m) * u**m
        return u**rho * s, u ** (rho - 1.0) * sp

    def _S_at(self, z: float) -> tuple[float, float]:
        z = min(max(z, self._z_lo), self._z_hi)
        return float(self._S(z)), float(self._Sp(z))

    def log_G(self, z: float) -> float:
        a, b = self.const.a, self.const.b
        S, _ = self._S_at(z)
        return -2 * b * math.log(z) + a * math.log1p(-z) + S

    def G(self, z: float) -> float:
        return math.exp(self.log_G(z))

    def dlog_G(self, z: float) -> float:
        a, b = self.const.a, self.const.b
        _, Sp = self._S_at(z)
        return -2 * b / z - a / (1.0 - z) + Sp

    def uniform_dlog_core(self, n: int = 4097) -> tuple[np.ndarray, np.ndarray]:
        """S'(z) on a uniform grid, for the compiled SDE kernel."""
        z = np.linspace(self._z_lo, self._z_hi, n)
        return z, self._Sp(z)

    def dump_grid(self, path) -> None:
        """Write the cached (cross-ratio, value) grid as CSV."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["cross_ratio", "value"])
            for z, g in zip(self._grid_z, self._grid_G):
                wr.writerow([f"{z:.16e}", f"{g:.16e}"])


@lru_cache(maxsize=8)
def _pure_cache(kappa: float) -> PurePartitionCache:
    return PurePartitionCache(kappa)


def _cross_ratio(w: np.ndarray) -> float:
    return float(
        (w[1] - w[0]) * (w[3] - w[2]) / ((w[2] - w[0]) * (w[3] - w[1]))
    )


def _pattern_kind(alpha: LinkPattern) -> str:
    """'near' for {{1,2},{3,4}}, 'far' for {{1,4},{2,3}}."""
    pairs = alpha.pairs
    if pairs == ((1, 2), (3, 4)):
        return "near"
    if pairs == ((1, 4), (2, 3)):
        return "far"
    raise ValueError(f"not an N=2 link pattern: {pairs}")


def pure_Z(alpha: LinkPattern, theta, kappa: float) -> float:
    """Pure partition function on the disk for N <= 2 chords.

    N = 1 is the closed form (2 sin(theta^2 - theta^1))^(-2b); N = 2 is
    evaluated from the cached cross-ratio ODE solution.
    """
    if not isinstance(alpha, LinkPattern):
        alpha = LinkPattern(canonical_pairs(alpha))
    th = _as_angles(theta)
    const = SleConstants(kappa)
    b = const.b
    if alpha.N * 2 != th.size:
        raise ValueError("link pattern size does not match angle count")
    if alpha.N == 1:
        return float((2.0 * math.sin(th[1] - th[0])) ** (-2 * b))
    if alpha.N == 2:
        cache = _pure_cache(kappa)
        w, dw = _halfplane_coords(th)
        z = _cross_ratio(w)
        pref = float(np.prod(dw**b)) * ((w[2] - w[0]) * (w[3] - w[1])) ** (-2 * b)
        if _pattern_kind(alpha) == "near":
            return pref * cache.G(z)
        return pref * cache.G(1.0 - z)
    raise UnsupportedLinkPattern(
        f"pure partition functions are implemented for N <= 2, got N = {alpha.N}"
    )


def green_function(alpha: LinkPattern, theta, kappa: float) -> float:
    """Green's function: the ratio of the radial master function to the
    pure partition function of the link pattern."""
    gs = g_star(theta, kappa)
    if gs == 0.0:
        return 0.0
    return gs / pure_Z(alpha, theta, kappa)


def pde_residual(alpha, theta, kappa: float, h: float = 1e-3, fn=None) -> np.ndarray:
    """Finite-difference residual of the circle null-vector PDE, per index.

    For each j the operator
        (1/2) d_j^2 + sum_{k != j} (a cot(theta^k-theta^j) d_k
                                    - a b csc^2(theta^k-theta^j)) - 2 a b~
    is applied to the pure partition function (or ``fn`` if given) and the
    result is normalized by the function value.
    """
    th = _as_angles(theta)
    const = SleConstants(kappa)
    a, b, bt = const.a, const.b, const.b_tilde
    n = th.size
    gaps = np.diff(np.concatenate([th, [th[0] + math.pi]]))
    if h > gaps.min() / 10.0:
        raise ValueError(f"step h={h} too large for minimal gap {gaps.min():.3g}")

    if fn is None:
        fn = lambda t: pure_Z(alpha, AngleTuple(t), kappa)  # noqa: E731

    def at(shift_j=None, shift_k=None):
        t = th.copy()
        if shift_j is not None:
            j, s = shift_j
            t[j] += s
        if shift_k is not None:
            k, s = shift_k
            t[k] += s
        return fn(t)

    f0 = at()
    res = np.empty(n)
    for j in range(n):
        val = 0.5 * (at(shift_j=(j, h)) - 2.0 * f0 + at(shift_j=(j, -h))) / h**2
        for k in range(n):
            if k == j:
                continue
            dk = (at(shift_k=(k, h)) - at(shift_k=(k, -h))) / (2.0 * h)
            diff = th[k] - th[j]
            val += a / math.tan(diff) * dk - a * b / math.sin(diff) ** 2 * f0
        val -= 2.0 * a * bt * f0
        res[j] = val / f0
    return res


# ---------------------------------------------------------------------------
# one free segment


def r_function(points, n: int) -> float:
    """Partition function for n interfaces and one free boundary segment,
    on the line.

    ``points`` are the n + 2 ordered marked points; the free segment is
    (x_{n+1}, x_{n+2}).  Parity of n selects the closed form: exponent
    -1/8 on the free gap for even n, +3/8 for odd n.
    """
    x = np.asarray(points, dtype=float)
    if x.size != n + 2:
        raise ValueError(f"expected {n + 2} points for n = {n}")
    if np.any(np.diff(x) <= 0):
        raise ValueError("points must be strictly increasing")
    if n % 2 == 0:
        m = n // 2
        y1, y2 = x[2 * m], x[2 * m + 1]  # x_{2m+1}, x_{2m+2}
        pref = (y2 - y1) ** (-0.125)
        for k in range(2 * m):
            pref /= math.sqrt((y2 - x[k]) * (y1 - x[k]))
        total = 0.0
        for pp in enumerate_pair_partitions(2 * m):
            term = float(partition_sign(pp))
            for a_, b_ in pp:
                xa, xb = x[a_ - 1], x[b_ - 1]
                term *= ((y1 - xa) * (y2 - xb) + (y1 - xb) * (y2 - xa)) / (xb - xa)
            total += term
        return pref * total
    m = (n - 1) // 2
    y1, y2 = x[2 * m + 1], x[2 * m + 2]  # x_{2m+2}, x_{2m+3}
    pref = (y2 - y1) ** 0.375
    for k in range(2 * m + 1):
        pref /= math.sqrt((y1 - x[k]) * (y2 - x[k]))
    total = 0.0
    for pp in enumerate_pair_partitions(2 * m + 2):
        term = float(partition_sign(pp))
        for a_, b_ in pp:
            if b_ == 2 * m + 2:
                continue  # the pair absorbed by the free endpoint
            xa, xb = x[a_ - 1], x[b_ - 1]
            term *= ((y1 - xa) * (y2 - xb) + (y1 - xb) * (y2 - xa)) / (xb - xa)
        total += term
    return pref * total


def r_disk(theta, n: int | None = None) -> float:
    """Disk form of the one-free-segment function.

    Boundary weights 1/2 at the n interface points and 1/16 at the two
    endpoints of the free arc.
    """
    th = _as_angles(theta) if not isinstance(theta, np.ndarray) else theta
    th = np.asarray(th, dtype=float)
    if n is None:
        n = th.size - 2
    if th.size != n + 2:
        raise ValueError(f"expected {n + 2} angles")
    w, dw = _halfplane_coords(th)
    pref = float(np.prod(dw[:n] ** 0.5)) * float(np.prod(dw[n:] ** (1.0 / 16.0)))
    return pref * r_function(w, n)


# ---------------------------------------------------------------------------
# annulus


@dataclass(frozen=True)
class AnnulusSpec:
    """Standard annulus e^{-p} < |z| < 1 with marks on the outer circle."""

    p: float
    marks: AngleTuple

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("annulus modulus p must be positive")


class BranchConventionError(ArithmeticError):
    """The phase-corrected annulus Pfaffian failed its realness check."""


def h_function(spec: AnnulusSpec, imag_tol: float = 1e-8) -> float:
    """Annulus partition function: Pfaffian of the cs kernel.

    Matrix entries are (2/sqrt(x_j x_k)) cs(log(x_j/x_k)) with the
    principal branches sqrt(x_j x_k) = exp(i(theta^j + theta^k)) and
    log(x_j/x_k) = 2i(theta^j - theta^k).  Every pairing then carries the
    common phase exp(-i sum theta) (-2i)^N, which is removed analytically;
    the residual imaginary part is validated against ``imag_tol`` and the
    real, positive value is returned.
    """
    th = spec.marks.angles
    n = th.size
    N = n // 2
    params = EllipticParams(spec.p)
    m = np.zeros((n, n), dtype=complex)
    try:
        for j in range(n):
            for k in range(j + 1, n):
                entry = 2.0 * np.exp(-1j * (th[j] + th[k])) * jacobi_cs(
                    2j * (th[j] - th[k]), params
                )
                m[j, k] = entry
                m[k, j] = -entry
    except PoleError as exc:
        raise DegenerateConfiguration(str(exc)) from exc
    pf = pfaffian(m)
    corrected = (1j) ** N * np.exp(1j * th.sum()) * pf * (-1.0) ** N
    if abs(corrected.imag) > imag_tol * abs(corrected):
        raise BranchConventionError(
            f"imaginary residue {corrected.imag:.3e} exceeds {imag_tol} of |value|"
        )
    value = float(corrected.real)
    if value <= 0.0:
        raise BranchConventionError(f"annulus Pfaffian not positive: {value}")
    return value


# ---------------------------------------------------------------------------
# densities and normalization constants


def F_v(theta, v: float) -> float:
    """prod_{j<k} |sin(theta^k - theta^j)|^v, in (0, 1] on the chamber."""
    th = _as_angles(theta)
    diff = th[None, :] - th[:, None]
    s = np.abs(np.sin(diff[np.triu_indices(th.size, k=1)]))
    if np.any(s == 0.0):
        return 0.0
    return float(np.exp(v * np.log(s).sum()))


@lru_cache(maxsize=32)
def I_v(n: int, v: float) -> tuple[float, float]:
    """Normalization of F_v over the ordered chamber, with error estimate."""
    val, err = integrate_chamber(lambda t: F_v(t, v), n, samples=400_000, seed=7)
    return val, err


@lru_cache(maxsize=16)
def J_alpha(pairs: tuple, kappa: float) -> tuple[float, float]:
    """Quasi-invariant normalization: integral of f_{4a} / G_alpha."""
    alpha = LinkPattern(pairs)
    n = 2 * alpha.N
    a = SleConstants(kappa).a
    i4a, _ = I_v(n, 4.0 * a)

    def integrand(t):
        gs = g_star(t, kappa)
        if gs == 0.0:
            return 0.0
        return F_v(t, 4.0 * a) / i4a / (gs / pure_Z(alpha, AngleTuple(t), kappa))

    return integrate_chamber(integrand, n, samples=400_000, seed=11)


def densities(theta, kappa: float, alpha: LinkPattern | None = None) -> dict:
    """Invariant and quasi-invariant densities at theta, plus constants.

    Returns f_{4a} (the invariant density of the interacting angle flow,
    equal to the stationary density p_star) and, when a link pattern is
    given, the quasi-invariant density p_alpha with its normalization.
    """
    th = _as_angles(theta)
    n = th.size
    a = SleConstants(kappa).a
    i4a, i4a_err = I_v(n, 4.0 * a)
    f4a = F_v(th, 4.0 * a) / i4a
    out = {
        "F_4a": F_v(th, 4.0 * a),
        "I_4a": i4a,
        "I_4a_err": i4a_err,
        "f_4a": f4a,
        "p_star": f4a,
    }
    if alpha is not None:
        j, jerr = J_alpha(alpha.pairs, kappa)
        G = green_function(alpha, th, kappa)
        out.update(
            {
                "J_alpha": j,
                "J_alpha_err": jerr,
                "p_alpha": f4a / (j * G) if G > 0 else 0.0,
            }
        )
    return out


# ---------------------------------------------------------------------------
# log-gradients (SDE drifts)


def log_gradient(which: str, theta, j: int, kappa: float | None = None,
                 alpha: LinkPattern | None = None, p: float | None = None,
                 n_interfaces: int | None = None) -> float:
    """d/d theta^j of log of the named partition function.

    ``which`` is one of 'g_star', 'pure', 'r', 'h'.  Closed forms are used
    for g_star and the one-chord pure function; the two-chord pure
    function differentiates the cached ODE solution through the chain
    rule; 'r' and 'h' use Richardson-extrapolated central differences.
    Relative accuracy is about 1e-6 away from degenerate configurations.
    """
    th = _as_angles(theta)
    n = th.size
    gaps = np.diff(np.concatenate([th, [th[0] + math.pi]]))
    if gaps.min() < 1e-6:
        raise DegenerateConfiguration("gaps below 1e-6; gradient unavailable")

    if which == "g_star":
        a = SleConstants(kappa).a
        return float(
            a * sum(1.0 / math.tan(th[j] - th[k]) for k in range(n) if k != j)
        )

    if which == "pure":
        const = SleConstants(kappa)
        b = const.b
        if alpha is None:
            raise ValueError("'pure' gradient needs a link pattern")
        if alpha.N == 1:
            sgn = 1.0 if j == 1 else -1.0
            return float(-2.0 * b * sgn / math.tan(th[1] - th[0]))
        if alpha.N == 2:
            cache = _pure_cache(kappa)
            w, _ = _halfplane_coords(th)
            s = 1.0 + w * w  # dw/dtheta with the rotation frozen
            z = _cross_ratio(w)
            dlogPi = 2.0 * b * w[j]
            for (u, v) in ((0, 2), (1, 3)):
                if j == u:
                    dlogPi += 2.0 * b * s[j] / (w[v] - w[u])
                if j == v:
                    dlogPi -= 2.0 * b * s[j] / (w[v] - w[u])
            dz = 0.0
            for (u, v, sign) in ((0, 1, +1), (2, 3, +1), (0, 2, -1), (1, 3, -1)):
                if j == u:
                    dz -= sign / (w[v] - w[u])
                if j == v:
                    dz += sign / (w[v] - w[u])
            dz *= s[j] * z
            if _pattern_kind(alpha) == "near":
                return float(dlogPi + cache.dlog_G(z) * dz)
            return float(dlogPi - cache.dlog_G(1.0 - z) * dz)
        raise UnsupportedLinkPattern("pure gradients exist for N <= 2 only")

    if which == "r":
        if n_interfaces is None:
            n_interfaces = n - 2
        f = lambda t: math.log(r_disk(t, n_interfaces))  # noqa: E731
    elif which == "h":
        if p is None:
            raise ValueError("'h' gradient needs the annulus modulus p")
        f = lambda t: math.log(h_function(AnnulusSpec(p, AngleTuple(t))))  # noqa: E731
    else:
        raise ValueError(f"unknown partition function {which!r}")

    h0 = min(1e-3, gaps.min() / 16.0)
    out = []
    for h in (h0, h0 / 2.0):
        tp = th.copy(); tp[j] += h
        tm = th.copy(); tm[j] -= h
        out.append((f(tp) - f(tm)) / (2.0 * h))
    return float((4.0 * out[1] - out[0]) / 3.0)  # Richardson, O(h^4)
