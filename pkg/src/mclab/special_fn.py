"""Exact combinatorial and special-function kernels.

Pair partitions with signs, Pfaffians of antisymmetric matrices, the
Jacobi cs function on the rectangular lattice with periods (2p, 2*pi*i),
and Monte Carlo / quadrature integration over the ordered angle chamber.
All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "PairPartition",
    "AntisymmetricMatrix",
    "EllipticParams",
    "AngleTuple",
    "enumerate_pair_partitions",
    "partition_sign",
    "pfaffian",
    "pfaffian_bruteforce",
    "jacobi_cs",
    "jacobi_cs_agm",
    "theta_constants",
    "chamber_volume",
    "integrate_chamber",
]


# ---------------------------------------------------------------------------
# pair partitions


@dataclass(frozen=True)
class PairPartition:
    """A partition of {1, ..., 2N} into N unordered pairs.

    Stored in the canonical convention a_1 < a_2 < ... < a_N and
    a_j < b_j for every pair.
    """

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        flat = sorted(i for p in self.pairs for i in p)
        n = 2 * len(self.pairs)
        if flat != list(range(1, n + 1)):
            raise ValueError(f"pairs must partition 1..{n}, got {self.pairs}")
        canon = canonical_pairs(self.pairs)
        if tuple(self.pairs) != canon:
            object.__setattr__(self, "pairs", canon)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def canonical_pairs(pairs: Sequence[Sequence[int]]) -> tuple[tuple[int, int], ...]:
    ordered = [(min(p), max(p)) for p in pairs]
    ordered.sort()
    return tuple(ordered)


def enumerate_pair_partitions(n: int) -> list[PairPartition]:
    """All (n-1)!! pair partitions of {1, ..., n}, in lexicographic order.

    n must be even and small (desk scale caps at n = 16, i.e. 2 027 025
    partitions).
    """
    if n <= 0 or n % 2 != 0:
        raise ValueError(f"n must be even and positive, got {n}")
    if n > 16:
        raise ValueError(f"n = {n} exceeds the supported desk scale (16)")

    def rec(items: tuple[int, ...]):
        if not items:
            yield ()
            return
        a = items[0]
        for i in range(1, len(items)):
            b = items[i]
            rest = items[1:i] + items[i + 1 :]
            for tail in rec(rest):
                yield ((a, b),) + tail

    return [PairPartition(p) for p in rec(tuple(range(1, n + 1)))]


def partition_sign(pp: PairPartition | Sequence[Sequence[int]]) -> int:
    """Sign of a pair partition.

    Defined as the sign of the product (a-c)(a-d)(b-c)(b-d) over all
    unordered pairs of distinct links {a,b}, {c,d}.  Equivalently the
    crossing parity: +1 for planar patterns.
    """
    pairs = pp.pairs if isinstance(pp, PairPartition) else canonical_pairs(pp)
    sign = 1
    for i in range(len(pairs)):
        a, b = pairs[i]
        for j in range(i + 1, len(pairs)):
            c, d = pairs[j]
            prod = (a - c) * (a - d) * (b - c) * (b - d)
            if prod < 0:
                sign = -sign
    return sign


def is_noncrossing(pairs: Sequence[tuple[int, int]]) -> bool:
    for i in range(len(pairs)):
        a, b = min(pairs[i]), max(pairs[i])
        for j in range(i + 1, len(pairs)):
            c, d = min(pairs[j]), max(pairs[j])
            if (a < c < b < d) or (c < a < d < b):
                return False
    return True


# ---------------------------------------------------------------------------
# Pfaffian


class AntisymmetricMatrix:
    """Real or complex antisymmetric matrix of even dimension."""

    def __init__(self, m, tol: float = 1e-12):
        m = np.asarray(m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        if m.shape[0] % 2 != 0:
            raise ValueError("dimension must be even")
        scale = np.max(np.abs(m)) or 1.0
        if np.max(np.abs(m + m.T)) > tol * scale:
            raise ValueError("matrix is not antisymmetric")
        self.m = m.astype(complex if np.iscomplexobj(m) else float)

    @property
    def dim(self) -> int:
        return self.m.shape[0]


def pfaffian_bruteforce(m: np.ndarray) -> float | complex:
    """Pfaffian by the defining sum over pair partitions (oracle, 2n <= 8)."""
    m = np.asarray(m)
    n = m.shape[0]
    total = 0.0 * m[0, 0]
    for pp in enumerate_pair_partitions(n):
        term = partition_sign(pp)
        for a, b in pp:
            term = term * m[a - 1, b - 1]
        total += term
    return total


def pfaffian(m: AntisymmetricMatrix | np.ndarray) -> float | complex:
    """Pfaffian of an antisymmetric matrix.

    Direct pair-partition sum for dimension <= 8, Parlett-Reid
    tridiagonalization with partial pivoting above that.
    """
    a = m.m if isinstance(m, AntisymmetricMatrix) else AntisymmetricMatrix(m).m
    n = a.shape[0]
    if n < 2:
        raise ValueError("dimension must be at least 2")
    if n <= 8:
        return pfaffian_bruteforce(a)
    a = a.copy()
    pf = 1.0 + 0.0j if np.iscomplexobj(a) else 1.0
    for k in range(0, n - 2, 2):
        # pivot: largest |a[k+1:, k]|
        piv = k + 1 + np.argmax(np.abs(a[k + 1 :, k]))
        if piv != k + 1:
            a[[k + 1, piv], :] = a[[piv, k + 1], :]
            a[:, [k + 1, piv]] = a[:, [piv, k + 1]]
            pf = -pf
        if a[k + 1, k] == 0:
            return 0.0 * pf
        pf *= a[k, k + 1]
        # eliminate column k below row k+1 (Gauss transform, congruence)
        tau = a[k + 2 :, k] / a[k + 1, k]
        a[k + 2 :, :] -= np.outer(tau, a[k + 1, :])
        a[:, k + 2 :] -= np.outer(a[:, k + 1], tau)
    pf *= a[n - 2, n - 1]
    if not np.iscomplexobj(m.m if isinstance(m, AntisymmetricMatrix) else m):
        return float(np.real(pf))
    return pf


# ---------------------------------------------------------------------------
# Jacobi cs on the lattice with half-periods 2K = 2p, 2K' = 2*pi*i


@dataclass(frozen=True)
class EllipticParams:
    """Annulus modulus p > 0 with the derived elliptic data.

    The associated cs function lives on the period lattice with real
    half-period 2K = 2p and imaginary half-period 2K' = 2*pi*i; its
    theta-series nome is q = exp(-pi^2 / p).
    """

    p: float

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"modulus p must be positive, got {self.p}")

    @property
    def K(self) -> float:
        return self.p

    @property
    def K_imag(self) -> float:
        return math.pi

    @property
    def nome(self) -> float:
        return math.exp(-math.pi**2 / self.p)


class PoleError(ValueError):
    """Argument too close to a pole of cs."""


@lru_cache(maxsize=256)
def theta_constants(q: float) -> tuple[float, float, float]:
    """theta_2(0,q), theta_3(0,q), theta_4(0,q)."""
    t2 = 0.0
    n = 0
    while True:
        term = 2.0 * q ** ((n + 0.5) ** 2)
        t2 += term
        n += 1
        if term < 1e-17 * (abs(t2) + 1.0):
            break
    t3, t4 = 1.0, 1.0
    n = 1
    while True:
        qn = q ** (n * n)
        t3 += 2.0 * qn
        t4 += 2.0 * (-1) ** n * qn
        n += 1
        if 2.0 * qn < 1e-17 * (abs(t3) + 1.0):
            break
    return t2, t3, t4


def _theta12(v: complex, q: float) -> tuple[complex, complex]:
    """theta_1(v,q) and theta_2(v,q), truncated at 1e-16 relative."""
    t1 = 0.0j
    t2 = 0.0j
    n = 0
    while True:
        w = q ** ((n + 0.5) ** 2)
        term1 = 2.0 * w * (-1) ** n * np.sin((2 * n + 1) * v)
        term2 = 2.0 * w * np.cos((2 * n + 1) * v)
        t1 += term1
        t2 += term2
        n += 1
        if abs(term1) + abs(term2) < 1e-16 * (abs(t1) + abs(t2) + 1e-300) and n > 2:
            break
        if n > 200:
            break
    return t1, t2


def jacobi_cs(z: complex | float, params: EllipticParams) -> complex:
    """Jacobi cs with half-periods 2K = 2p and 2K' = 2*pi*i.

    Evaluated through the theta quotient

        cs(z) = (pi / 2p) * theta_3(0) * theta_4(0) * theta_2(v) / theta_1(v),

    v = pi z / (2p), nome q = exp(-pi^2/p).  The normalization gives a
    simple pole of residue exactly 1 at the origin.  Raises PoleError
    within 1e-8 of a lattice pole z = 2mp + n*pi*i.
    """
    p = params.p
    q = params.nome
    z = complex(z)
    # pole lattice: z = 2 m p + n pi i
    xr = z.real - 2 * p * round(z.real / (2 * p))
    xi = z.imag - math.pi * round(z.imag / math.pi)
    if math.hypot(xr, xi) < 1e-8:
        raise PoleError(f"argument {z} within 1e-8 of a pole of cs")
    v = math.pi * z / (2.0 * p)
    t1, t2 = _theta12(v, q)
    _, t3c, t4c = theta_constants(q)
    return (math.pi / (2.0 * p)) * t3c * t4c * t2 / t1


def _agm_K(m: float) -> float:
    """Complete elliptic integral K(m) by the arithmetic-geometric mean."""
    a, b = 1.0, math.sqrt(1.0 - m)
    while abs(a - b) > 1e-16 * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def _sn_cn_dn(u: float, m: float) -> tuple[float, float, float]:
    """Real-argument Jacobi sn, cn, dn via the descending Landen (AGM) scale."""
    if m == 0.0:
        return math.sin(u), math.cos(u), 1.0
    a = [1.0]
    b = [math.sqrt(1.0 - m)]
    c = [math.sqrt(m)]
    while abs(c[-1]) > 1e-16 and len(a) < 60:
        an = 0.5 * (a[-1] + b[-1])
        bn = math.sqrt(a[-1] * b[-1])
        cn_ = 0.5 * (a[-1] - b[-1])
        a.append(an)
        b.append(bn)
        c.append(cn_)
    n = len(a) - 1
    phi = (2.0**n) * a[n] * u
    for k in range(n, 0, -1):
        phi = 0.5 * (phi + math.asin(max(-1.0, min(1.0, c[k] / a[k] * math.sin(phi)))))
    sn = math.sin(phi)
    cn = math.cos(phi)
    dn = math.sqrt(max(0.0, 1.0 - m * sn * sn))
    return sn, cn, dn


def jacobi_cs_agm(x: float, params: EllipticParams) -> float:
    """Independent AGM/Landen evaluation of cs for real arguments.

    Recovers the modulus m from the theta constants, checks the period
    normalization K(m) = s*p through the AGM, and evaluates cn/sn on the
    standard lattice.  Used as an oracle against the theta-series path.
    """
    q = params.nome
    t2, t3, _ = theta_constants(q)
    m = (t2 / t3) ** 4
    K = _agm_K(m)
    s = K / params.p  # lattice rescaling: standard half-period K -> p
    sn, cn, _ = _sn_cn_dn(s * x, m)
    if sn == 0.0:
        raise PoleError(f"argument {x} is a pole of cs")
    return s * cn / sn


# ---------------------------------------------------------------------------
# ordered angle chamber


class DegenerateConfiguration(ValueError):
    """Marked angles too close for the requested operation."""


class AngleTuple:
    """An ordered configuration of 2N angles on the pi-periodic torus.

    The constructor normalizes to the representative with
    theta^1 < ... < theta^{2N} < theta^1 + pi and theta^1 in [0, pi).
    """

    __slots__ = ("angles",)

    def __init__(self, angles: Sequence[float]):
        th = np.asarray(angles, dtype=float)
        if th.ndim != 1 or th.size % 2 != 0 or th.size == 0:
            raise ValueError("need an even, positive number of angles")
        th = np.sort(np.mod(th, math.pi))
        # rotate so consecutive (cyclic) gaps are all positive; any
        # distinct tuple on the pi-torus admits such a representative.
        gaps = np.diff(np.concatenate([th, [th[0] + math.pi]]))
        if np.any(gaps <= 0):
            k = int(np.argmin(gaps))
            raise DegenerateConfiguration(
                f"coincident angles at positions {k}, {k + 1}: {angles}"
            )
        self.angles = th

    @property
    def n(self) -> int:
        """Number of marked points 2N."""
        return self.angles.size

    @property
    def gaps(self) -> np.ndarray:
        """The 2N cyclic gaps, summing to pi."""
        th = self.angles
        return np.diff(np.concatenate([th, [th[0] + math.pi]]))

    def boundary_points(self) -> np.ndarray:
        """Positions exp(2i theta^j) on the unit circle."""
        return np.exp(2j * self.angles)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.angles, dtype=dtype)

    def __iter__(self):
        return iter(self.angles)

    def __len__(self):
        return self.angles.size

    def __getitem__(self, i):
        return self.angles[i]

    def __repr__(self):
        return f"AngleTuple({np.array2string(self.angles, precision=6)})"


def chamber_volume(n: int) -> float:
    """Volume of the representative set {0 <= th^1 < ... < th^n < pi}."""
    return math.pi**n / math.factorial(n)


def integrate_chamber(
    f: Callable[[np.ndarray], float],
    n: int,
    samples: int = 200_000,
    seed: int = 0,
    quadrature_nodes: int = 48,
) -> tuple[float, float]:
    """Integral of f over the ordered chamber with an error estimate.

    Uses a tensor-product Gauss-Legendre rule on the ordered simplex for
    n <= 4 (mapped from the unit cube; error estimated by comparing with
    a coarser rule), plain Monte Carlo above that.  ``f`` receives one
    ordered angle tuple as a numpy array.
    """
    if n <= 0 or n % 2:
        raise ValueError("n must be even and positive")

    def _eval(theta: np.ndarray) -> float:
        val = float(f(theta))
        if not math.isfinite(val):
            raise ValueError(f"integrand returned non-finite value at theta={theta}")
        return val

    if n <= 4:
        nodes = quadrature_nodes if n == 2 else min(quadrature_nodes, 16)

        def nested_rule(k: int) -> float:
            x, w = np.polynomial.legendre.leggauss(k)

            def layer(lo: float, depth: int, prefix: list[float]) -> float:
                # integrate over lo < theta^depth < ... < theta^n < pi
                half = 0.5 * (math.pi - lo)
                mid = 0.5 * (math.pi + lo)
                acc = 0.0
                for xi, wi in zip(x, w):
                    t = mid + half * xi
                    if depth == n:
                        acc += wi * _eval(np.array(prefix + [t]))
                    else:
                        acc += wi * layer(t, depth + 1, prefix + [t])
                return acc * half

            return layer(0.0, 1, [])

        hi = nested_rule(nodes)
        lo = nested_rule(max(6, nodes - 4))
        return hi, abs(hi - lo)

    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, math.pi, size=(samples, n))
    u.sort(axis=1)
    vals = np.empty(samples)
    for i in range(samples):
        vals[i] = _eval(u[i])
    vol = chamber_volume(n)
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples))
    return vol * mean, vol * stderr
