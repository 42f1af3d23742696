"""Independent high-precision oracle for the parameter formulas.

Generates random valid parameter sets and evaluates every derived integer
with 80-digit mpmath arithmetic on the exact binary64 inputs. A value that
lands within 1e-40 of an integer is resolved exactly (q) or the sample is
discarded (everything else), so every recorded ceiling or floor is
unambiguous.

A float `k` that is the nearest double to a rational with denominator at
most 16 is read as that rational, matching how callers write `k = 7/3`.

Usage: python3 derive_oracle.py [count] [seed] > ../fixtures/derive_oracle.json
"""

import json
import random
import sys
from fractions import Fraction

import mpmath as mp

mp.mp.dps = 80
EPS = mp.mpf("1e-40")


class Boundary(Exception):
    pass


def intended_k(k):
    for b in range(1, 17):
        a = k * b
        if a == int(a) and a / b == k:
            return Fraction(int(a), b)
    return Fraction(k)


def ceil_power(n, k):
    """ceil(n^(2 - 2/k)) exactly."""
    e = 2 - 2 / k
    if n == 1:
        return 1
    x = mp.power(n, mp.mpf(e.numerator) / e.denominator)
    r = mp.nint(x)
    if abs(x - r) < EPS:
        m = int(r)
        # Exact: m = n^(p/r) iff m^r = n^p.
        if e.denominator <= 4096 and m ** e.denominator == n ** e.numerator:
            return m
        raise Boundary("q")
    return int(mp.ceil(x))


def safe_ceil(x, what):
    r = mp.nint(x)
    if abs(x - r) < EPS:
        raise Boundary(what)
    return int(mp.ceil(x))


def safe_floor(x, what):
    r = mp.nint(x)
    if abs(x - r) < EPS:
        raise Boundary(what)
    return int(mp.floor(x))


def derive(n, z, k, eps, alpha):
    zf, ef, af = mp.mpf(z), mp.mpf(eps), mp.mpf(alpha)
    q = 2 * ceil_power(n, intended_k(k)) + 1
    sq = mp.sqrt(q)
    zp = max(zf / 3, zf - mp.mpf(16) / 10 / sq)
    c = safe_ceil(zp * sq / 3, "c")
    size = (2 * af - ef) / (zp * ef * ef) * (n * mp.log(2) / c + mp.log(q))
    s = n if size >= n else safe_ceil(size, "s")
    d = safe_ceil(zp * n * (1 - 3 * af + 3 * ef) / (36 * sq), "d")
    dense = -(-2 * s // 3)
    sparse = 30 * (s * mp.log(2) / d + mp.log(n))
    delta_cap = dense if sparse >= dense else safe_ceil(sparse, "delta_cap")
    live = q - safe_floor(5 * zp * sq / 12, "live")
    out = 2 * n // 3 + 1
    return {
        "q": q,
        "z_prime": float(zp),
        "c": c,
        "s": s,
        "d": d,
        "delta_cap": delta_cap,
        "live_threshold": live,
        "output_threshold": out,
    }


def sample(rng):
    kind = rng.random()
    if kind < 0.15:
        k = 2.0
    elif kind < 0.3:
        k = 3.0
    elif kind < 0.45:
        k = 4.0
    elif kind < 0.55:
        k = 2.5
    elif kind < 0.6:
        k = 7 / 3
    else:
        k = rng.uniform(2.0, 8.0)
    if rng.random() < 0.2:
        # Perfect powers put n^(2 - 2/k) on an integer for rational k.
        n = rng.randint(1, 40) ** rng.choice([2, 3, 4, 6])
        n = min(n, 10**6)
    else:
        n = int(10 ** rng.uniform(0, 6))
    z = rng.uniform(0.001, 2.0)
    pick = rng.random()
    alpha = 1 / 3 if pick < 0.3 else 0.25 if pick < 0.5 else rng.uniform(0.01, 1 / 3)
    eps = rng.uniform(0.0005, 1.0) * alpha
    if eps >= alpha:
        eps = alpha / 2
    return n, z, k, eps, alpha


def main():
    count = int(sys.argv[1]) if len(sys.argv) > 1 else 1500
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 20240611
    rng = random.Random(seed)
    cases, skipped = [], 0
    while len(cases) < count:
        n, z, k, eps, alpha = sample(rng)
        try:
            expected = derive(n, z, k, eps, alpha)
        except Boundary:
            skipped += 1
            continue
        cases.append(
            {
                "params": {"n": n, "z": z, "k": k, "epsilon": eps, "alpha": alpha},
                "expected": expected,
            }
        )
    json.dump({"seed": seed, "skipped": skipped, "cases": cases}, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
