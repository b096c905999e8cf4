"""Reference values for the bound evaluators at 50 significant digits.

Run from this directory: python3 bounds_reference.py > bounds_reference.csv
"""
import random

import mpmath as mp

mp.mp.dps = 50
rng = random.Random(20240601)
PER_EVALUATOR = 100

HEADER = "evaluator,variant,alpha,m,n,c_dev,delta,cardinality,d,c,disc,norm,expected"


def F(x):
    return mp.mpf(x)


def gap(alpha, m, n):
    return F(alpha) * F(m) / (F(n) * (1 - F(alpha)))


def hoeffding(alpha, m, n, c):
    q = 1 - F(alpha)
    t = F(n) * F(c) - 2 * F(m) / q
    return 2 * mp.exp(-(q * q) / (F(m) ** 2) * t * t / (8 * F(n)))


def existence(variant, alpha, m, n, delta, card, d, c):
    lead = 8 * F(m) / (1 - F(alpha))
    g = gap(alpha, m, n)
    if variant in ("chain", "pushback"):
        base = lead * mp.sqrt(mp.log(F(card)) / F(n)) + F(delta)
        return base + (g if variant == "pushback" else 0)
    base = lead * mp.sqrt(F(d) * mp.log(3 + 4 * F(c) ** 2 * F(n)) / F(n)) + mp.sqrt(F(d) / F(n))
    return base + (2 if variant == "chain-coro45" else 1) * g


def cardinality(d, delta, c):
    return (3 + 4 * F(c) ** 2 * F(d) / F(delta) ** 2) ** d


def kh_budget(disc, alpha, m, n, norm):
    return (F(disc) + gap(alpha, m, n)) * F(norm)


def sphere_upper(n, d, c):
    return F(c) * (mp.sqrt(F(d)) + mp.sqrt((F(d) + 1) * mp.log(F(n)))) / mp.sqrt(F(n))


def beck(n, d):
    return F(n) ** (-mp.mpf(1) / 2 - 1 / (2 * F(d)))


rows = []


def emit(ev, variant="", alpha=0.0, m=1.0, n=1, c_dev=0.0, delta=1.0, card=1.0, d=1, c=1.0, disc=0.0, norm=0.0, value=None):
    rows.append(
        ",".join(
            [ev, variant, repr(alpha), repr(m), str(n), repr(c_dev), repr(delta), repr(card), str(d), repr(c), repr(disc), repr(norm), mp.nstr(value, 30)]
        )
    )


# worked values
emit("hoeffding", alpha=0.0, m=1.0, n=100, c_dev=0.5, value=hoeffding(0.0, 1.0, 100, 0.5))
emit("hoeffding", alpha=0.0, m=1.0, n=8, c_dev=0.5, value=hoeffding(0.0, 1.0, 8, 0.5))
emit("existence", "chain", n=256, delta=0.0625, card=16.0, value=existence("chain", 0.0, 1.0, 256, 0.0625, 16.0, 1, 1.0))
emit("existence", "chain-coro45", n=100, value=existence("chain-coro45", 0.0, 1.0, 100, 1.0, 1.0, 1, 1.0))

for _ in range(PER_EVALUATOR):
    alpha, m, n = rng.uniform(0.0, 0.95), rng.uniform(0.1, 5.0), rng.randint(1, 100000)
    emit("gap", alpha=alpha, m=m, n=n, value=gap(alpha, m, n))

for _ in range(PER_EVALUATOR):
    alpha, m, c = rng.uniform(0.0, 0.9), rng.uniform(0.5, 3.0), rng.uniform(0.05, 0.5)
    lo = 4 * m / ((1 - alpha) * c)
    n = rng.randint(int(lo) + 1, int(lo) + 2000)
    emit("hoeffding", alpha=alpha, m=m, n=n, c_dev=c, value=hoeffding(alpha, m, n, c))

for variant in ("chain", "pushback", "chain-coro45", "pushback-coro45"):
    for _ in range(PER_EVALUATOR):
        alpha, m, n = rng.uniform(0.0, 0.9), rng.uniform(0.5, 3.0), rng.randint(1, 100000)
        delta, card = rng.uniform(1e-3, 1.0), rng.uniform(1.0, 1e12)
        d, c = rng.randint(1, 10), rng.uniform(0.1, 5.0)
        emit("existence", variant, alpha, m, n, 0.0, delta, card, d, c, value=existence(variant, alpha, m, n, delta, card, d, c))

for _ in range(PER_EVALUATOR):
    d, delta, c = rng.randint(1, 20), rng.uniform(1e-3, 1.0), rng.uniform(0.1, 5.0)
    emit("cardinality", delta=delta, d=d, c=c, value=cardinality(d, delta, c))

for _ in range(PER_EVALUATOR):
    alpha, m, n = rng.uniform(0.0, 0.9), rng.uniform(0.5, 3.0), rng.randint(1, 100000)
    disc, norm = rng.uniform(0.0, 1.0), rng.uniform(0.01, 10.0)
    emit("kh-budget", alpha=alpha, m=m, n=n, disc=disc, norm=norm, value=kh_budget(disc, alpha, m, n, norm))

for _ in range(PER_EVALUATOR):
    n, d, c = rng.randint(2, 10**7), rng.randint(1, 10), rng.uniform(0.1, 5.0)
    emit("sphere", n=n, d=d, c=c, value=sphere_upper(n, d, c))

for _ in range(PER_EVALUATOR):
    n, d = rng.randint(2, 10**7), rng.randint(1, 10)
    emit("beck", n=n, d=d, value=beck(n, d))

print(HEADER)
print("\n".join(rows))
