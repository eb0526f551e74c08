"""Exact ERM over k-fold iterates of finite endomorphisms on a cycle.

The target is the canonical cycle z(i) = i+1 (mod n) with one held-out
point q.  Training loss is the 0-1 loss on the n-1 remaining points; the
hypothesis class is { f^(k) : f any map on {0..n-1} }, where f^(k) is the
k-fold self-composition.  `brute_force_erm` enumerates the class exactly
(the independent oracle); `predict_interpolants` gives the gcd-based
structural prediction; the number-theoretic helpers quantify how common
the uniqueness-forcing exponents are and construct domain sizes that make
them arbitrarily dense.

Arbitrary cyclic targets reduce to the canonical z by relabeling, so only
the canonical form is handled here (callers conjugate first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import CapacityError, DimensionMismatch, InvariantViolation, SearchExhausted

ENUMERATION_CAP = 8  # n^n base functions; 8^8 ~ 1.7e7 is the interactive limit
TOTIENT_CAP = 10**12  # trial division up to 1e6
INT64_MAX = 2**63 - 1


@dataclass(frozen=True, order=True)
class Endomorphism:
    """A total function on {0..n-1} stored as a lookup table (entry i = f(i))."""

    table: tuple[int, ...]

    def __post_init__(self):
        n = len(self.table)
        if n == 0:
            raise ValueError("empty table")
        if any(not (0 <= v < n) for v in self.table):
            raise ValueError(f"table entries must lie in [0, {n})")

    @property
    def n(self) -> int:
        return len(self.table)

    def __call__(self, x: int) -> int:
        return self.table[x]


def identity(n: int) -> Endomorphism:
    return Endomorphism(tuple(range(n)))


def canonical_cycle(n: int) -> Endomorphism:
    """The single n-cycle z(i) = i+1 mod n."""
    return Endomorphism(tuple((i + 1) % n for i in range(n)))


@dataclass(frozen=True)
class CycleInstance:
    """Domain {0..n-1}, held-out point q, canonical cycle target."""

    n: int
    q: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need n >= 3")
        if not 0 <= self.q < self.n:
            raise ValueError("held-out point must lie in [0, n)")

    @property
    def z(self) -> Endomorphism:
        return canonical_cycle(self.n)

    @property
    def train_points(self) -> tuple[int, ...]:
        return tuple(x for x in range(self.n) if x != self.q)


def compose(f: Endomorphism, g: Endomorphism) -> Endomorphism:
    """(f o g)(i) = f(g(i))."""
    if f.n != g.n:
        raise DimensionMismatch(f"compose: {f.n} != {g.n}")
    return Endomorphism(tuple(f.table[g.table[i]] for i in range(f.n)))


def iterate_pow(f: Endomorphism, k: int) -> Endomorphism:
    """k-fold self-composition f^(k), by binary exponentiation (k up to ~1e18).

    k = 0 is rejected: the iterate class is defined for k >= 1 only.
    """
    if k < 1:
        raise ValueError("iterate_pow requires k >= 1")
    result = identity(f.n)
    base = f
    while k:
        if k & 1:
            result = compose(base, result)
        k >>= 1
        if k:
            base = compose(base, base)
    return result


def periodic_points(f: Endomorphism) -> frozenset[int]:
    """Points lying on a cycle of f (the eventual image of the whole domain)."""
    current = frozenset(range(f.n))
    while True:
        nxt = frozenset(f.table[x] for x in current)
        if nxt == current:
            return current
        current = nxt


def height(f: Endomorphism) -> int:
    """Max over x of the distance from x to the periodic set; ht <= 1 iff f(x) is periodic for every x."""
    per = periodic_points(f)
    worst = 0
    for x in range(f.n):
        steps = 0
        while x not in per:
            x = f.table[x]
            steps += 1
        worst = max(worst, steps)
    return worst


def skip_one_map(instance: CycleInstance) -> Endomorphism:
    """The map agreeing with z off q but sending q two steps forward.

    This is the only other interpolant of the training set that a large
    iterate can realize (its height is <= 1).
    """
    n, q = instance.n, instance.q
    table = [(i + 1) % n for i in range(n)]
    table[q] = (q + 2) % n
    return Endomorphism(tuple(table))


def id_loss_01(g: Endomorphism, instance: CycleInstance) -> Fraction:
    """0-1 loss of g against z, uniform on the n-1 training points. Exact."""
    z = instance.z
    bad = sum(1 for x in instance.train_points if g.table[x] != z.table[x])
    return Fraction(bad, instance.n - 1)


def ood_loss_01(g: Endomorphism, instance: CycleInstance) -> int:
    """0-1 loss at the held-out point (point mass): 0 or 1."""
    return 0 if g.table[instance.q] == instance.z.table[instance.q] else 1


@dataclass
class InterpolantReport:
    """Full argmin set of the iterate class under the training 0-1 loss."""

    min_id_loss: Fraction
    minimizers: tuple[Endomorphism, ...]
    ood_loss_per_minimizer: dict[Endomorphism, int]


def _batched_pow(tables: np.ndarray, k: int) -> np.ndarray:
    """Row-wise k-th functional power of a batch of lookup tables."""
    rows, n = tables.shape
    result = np.broadcast_to(np.arange(n, dtype=tables.dtype), (rows, n)).copy()
    base = tables
    while k:
        if k & 1:
            result = np.take_along_axis(base, result, axis=1)
        k >>= 1
        if k:
            base = np.take_along_axis(base, base, axis=1)
    return result


def brute_force_erm(
    instance: CycleInstance,
    k: int,
    *,
    cap: int = ENUMERATION_CAP,
    chunk: int = 1 << 18,
) -> InterpolantReport:
    """Enumerate all n^n base functions, iterate each k times, return the exact argmin set.

    This is the independent oracle the structural predictions are checked
    against.  Candidates are processed in fixed-size chunks whose partial
    results combine by (min, set-union), so the reduction is deterministic
    and order-independent (chunks could run on separate workers).
    """
    if k < 1:
        raise ValueError("k >= 1 required")
    n = instance.n
    if n > cap:
        raise CapacityError(f"n={n} exceeds enumeration cap {cap}")
    z_arr = np.array(instance.z.table, dtype=np.int64)
    p_idx = np.array(instance.train_points, dtype=np.int64)
    z_on_p = z_arr[p_idx]
    powers = n ** np.arange(n, dtype=np.int64)

    total = n**n
    best = n  # strictly more than the n-1 possible mismatches
    best_rows: set[tuple[int, ...]] = set()
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        tables = (idx[:, None] // powers) % n
        iterates = _batched_pow(tables, k)
        mism = (iterates[:, p_idx] != z_on_p).sum(axis=1)
        m = int(mism.min())
        if m < best:
            best = m
            best_rows = set()
        if m == best:
            best_rows.update(map(tuple, iterates[mism == best].tolist()))

    minimizers = tuple(Endomorphism(t) for t in sorted(best_rows))
    ood = {g: ood_loss_01(g, instance) for g in minimizers}
    return InterpolantReport(Fraction(best, n - 1), minimizers, ood)


class Prediction(Enum):
    """Structural prediction for the argmin set at a given (n, k)."""

    TARGET_ONLY = "TargetOnly"
    TARGET_AND_SKIP_ONE = "TargetAndSkipOne"
    SKIP_ONE_ONLY = "SkipOneOnly"
    NO_ZERO_LOSS = "NoZeroLossCharacterized"
    NOT_PREDICTED = "NotPredicted"


def predict_interpolants(instance: CycleInstance, k: int) -> Prediction:
    """gcd-based prediction of the zero-loss minimizer set, valid for k >= n-1.

    For k >= n-1 every iterate has height <= 1, so the only possible
    interpolants are z (realizable iff gcd(k,n)=1) and the skip-one map
    (realizable iff gcd(k,n-1)=1).  When neither gcd is 1 no zero-loss
    hypothesis exists and the positive-loss argmin set is not characterized.
    Below k = n-1 no structural claim is made.
    """
    n = instance.n
    if k < n - 1:
        return Prediction.NOT_PREDICTED
    z_in = math.gcd(k, n) == 1
    skip_in = math.gcd(k, n - 1) == 1
    if z_in and not skip_in:
        return Prediction.TARGET_ONLY
    if z_in and skip_in:
        return Prediction.TARGET_AND_SKIP_ONE
    if skip_in:
        return Prediction.SKIP_ONE_ONLY
    return Prediction.NO_ZERO_LOSS


def predicted_minimizers(instance: CycleInstance, k: int) -> tuple[Endomorphism, ...] | None:
    """The predicted argmin set as explicit tables, or None when uncharacterized."""
    pred = predict_interpolants(instance, k)
    if pred is Prediction.TARGET_ONLY:
        return (instance.z,)
    if pred is Prediction.TARGET_AND_SKIP_ONE:
        return tuple(sorted((instance.z, skip_one_map(instance))))
    if pred is Prediction.SKIP_ONE_ONLY:
        return (skip_one_map(instance),)
    return None


def target_root_witness(n: int, k: int) -> Endomorphism | None:
    """An f with f^(k) = z, namely z^(a) with a*k = 1 mod n; None when gcd(k,n) > 1."""
    if math.gcd(k, n) != 1:
        return None
    a = pow(k, -1, n)  # a >= 1 since a*k = 1 mod n and n >= 2
    return iterate_pow(canonical_cycle(n), a)


def skip_one_root_witness(instance: CycleInstance, k: int) -> Endomorphism | None:
    """An f with f^(k) = skip_one_map(instance); None when gcd(k, n-1) > 1.

    Construction: order the length-(n-1) cycle of the skip-one map as
    e_0 = q, e_i = q+i+1 mod n, set f(e_i) = e_(i+a) with a*k = 1 mod (n-1),
    and send the remaining point r = q+1 to the unique e_j reaching e_1
    after k-1 steps.
    """
    n, q = instance.n, instance.q
    L = n - 1
    if math.gcd(k, L) != 1:
        return None
    e = [q] + [(q + i + 1) % n for i in range(1, L)]
    a = pow(k, -1, L) if L > 1 else 0
    table = [0] * n
    for i, x in enumerate(e):
        table[x] = e[(i + a) % L]
    r = (q + 1) % n
    j = (1 - a * (k - 1)) % L
    table[r] = e[j]
    return Endomorphism(tuple(table))


# ---------------------------------------------------------------------------
# number theory: totients, primorials, prime search, exponent density
# ---------------------------------------------------------------------------


def totient(m: int) -> int:
    """Euler totient by trial-division factorization (m <= 1e12)."""
    if m < 1:
        raise ValueError("totient requires m >= 1")
    if m > TOTIENT_CAP:
        raise CapacityError(f"m={m} exceeds totient cap {TOTIENT_CAP}")
    result = m
    rem = m
    p = 2
    while p * p <= rem:
        if rem % p == 0:
            while rem % p == 0:
                rem //= p
            result -= result // p
        p += 1 if p == 2 else 2
    if rem > 1:
        result -= result // rem
    return result


_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin; the witness set covers all n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _primes():
    found = []
    cand = 2
    while True:
        if all(cand % p for p in found):
            found.append(cand)
            yield cand
        cand += 1 if cand == 2 else 2


def primorial_below_ratio(delta: float) -> int:
    """Smallest primorial 2*3*5*...*p_t whose coprime density falls below delta.

    The ratio phi(M)/M = prod(1 - 1/p) is compared exactly as a rational.
    Raises CapacityError once M would leave 64-bit range (keeps downstream
    primality tests in their proven-deterministic regime).
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    M, num, den = 1, 1, 1
    for p in _primes():
        M *= p
        if M > INT64_MAX:
            raise CapacityError("primorial exceeds 64-bit range before reaching the ratio target")
        num *= p - 1
        den *= p
        if Fraction(num, den) < delta:
            return M


def choose_prime_n(epsilon: float, search_cap: int = 10**6) -> int:
    """Smallest-found prime n = 1 mod M with 1/n + phi(n-1)/(n-1) < epsilon.

    M is the smallest primorial with phi(M)/M < 0.9*epsilon; the 10% headroom
    leaves room for the 1/n term while keeping M (hence n) desk-sized.  Since
    M divides n-1, phi(n-1)/(n-1) <= phi(M)/M, and each candidate is accepted
    against the exact bound, computed with rational arithmetic.  Existence of
    a prime in the progression is guaranteed (arithmetic-progression prime
    theorem) but with no effective bound, hence the scan cap.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    M = primorial_below_ratio(0.9 * epsilon)
    half = epsilon / 2
    for j in range(1, search_cap + 1):
        n = 1 + j * M
        if n > INT64_MAX:
            raise CapacityError("prime scan left 64-bit range")
        if not is_prime(n):
            continue
        if not Fraction(1, n) < half:
            continue
        if Fraction(1, n) + Fraction(totient(n - 1), n - 1) < Fraction(epsilon):
            return n
    raise SearchExhausted(f"no qualifying prime within {search_cap} steps of the progression 1 + j*{M}")


@dataclass
class GoodKReport:
    """Exponents in [n-1, scan_max] whose gcd pattern forces the unique minimizer."""

    n: int
    scan_max: int
    members: tuple[int, ...]
    empirical_density: Fraction
    predicted_lower_bound: Fraction


def good_k_density(n: int, scan_max: int) -> GoodKReport:
    """Scan k in [n-1, scan_max] for gcd(k,n)=1 and gcd(k,n-1)>1; exact density bookkeeping.

    The predicted lower bound 1 - 1/n - phi(n-1)/(n-1) is asymptotic; a
    truncated window may fall short by at most (n-2)/scan_max, and that
    slack-adjusted inequality is asserted before returning.
    """
    if not is_prime(n):
        raise ValueError(f"n={n} must be prime")
    if scan_max < n - 1:
        raise ValueError("scan_max must be at least n-1")
    members = tuple(
        k for k in range(n - 1, scan_max + 1) if math.gcd(k, n) == 1 and math.gcd(k, n - 1) > 1
    )
    window = scan_max - (n - 1) + 1
    density = Fraction(len(members), window)
    bound = 1 - Fraction(1, n) - Fraction(totient(n - 1), n - 1)
    slack = Fraction(n - 2, scan_max)
    if density < bound - slack:
        raise InvariantViolation(
            f"empirical density {density} fell below {bound} - {slack}", lhs=density, rhs=bound - slack
        )
    return GoodKReport(n, scan_max, members, density, bound)
