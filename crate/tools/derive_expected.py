"""Independent derivation of hand-checked expected values used in unit tests.

Run with `python3 tools/derive_expected.py`; every value printed here is
frozen into a Rust test. Nothing in this file shares code with the crate.
"""
import itertools
import math
from fractions import Fraction


def entropy(p):
    return -sum(x * math.log(x) for x in p if x > 0)


def lac_threshold_bruteforce(scores, alpha):
    n = len(scores)
    qhat = (n + 1) / n * (1 - alpha)
    best = None
    for t in sorted(set(scores) | {0.0}):
        if sum(s >= t for s in scores) / n >= qhat - 1e-9:
            best = t if best is None else max(best, t)
    return qhat, best


def spearman_naive(x, y):
    def ranks(v):
        return [1 + sum(b < a for b in v) + 0.5 * (sum(b == a for b in v) - 1) for a in v]
    rx, ry = ranks(x), ranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


def pearson(x, y):
    mx, my = sum(x) / len(x), sum(y) / len(y)
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return cov / math.sqrt(sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y))


def u_pairs(a, b):
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)


def main():
    print("entropy(0.6,0.2,0.2) =", repr(entropy([0.6, 0.2, 0.2])))
    print("ln3 =", repr(math.log(3)), " ln3/2 =", repr(math.log(3) / 2))
    print("avg_model_entropy =", repr((entropy([1, 0, 0]) + entropy([1 / 3] * 3)) / 2))
    print("H_dis(0.6,0.2,0.2) =", repr(1 - 0.6))
    votes = "AABCA"
    dist = [votes.count(c) / 5 for c in "ABC"]
    print("pool vote AABCA =", dist, " dissensus =", 1 - max(dist))
    for alpha in (0.2, 0.5, 0.05):
        print("LAC", alpha, lac_threshold_bruteforce([0.9, 0.8, 0.7, 0.6], alpha))
    probs = [0.5, 0.3, 0.2]
    for t in (0.25, 0.6):
        print("set t=", t, [i for i, p in enumerate(probs) if p >= t])

    # 4-item, m=1 LOO fixture: true-label scores 0.9,0.8,0.7,0.6 (y* = class 0),
    # remaining mass on classes 1,2.
    items = [[0.9, 0.06, 0.04], [0.8, 0.15, 0.05], [0.7, 0.2, 0.1], [0.6, 0.25, 0.15]]
    for alpha in (0.05, 0.1, 0.2, 0.5):
        sizes = []
        for x in range(4):
            cal = [items[j][0] for j in range(4) if j != x]
            _, t = lac_threshold_bruteforce(cal, alpha)
            if t is None:
                sizes.append(3)
            else:
                sizes.append(sum(p >= t for p in items[x]))
        print("LOO sizes alpha", alpha, sizes)

    print("pool_failure_rate =", Fraction(1, 4))
    print("first layer (B,A,A,A) =", 2 / 5)
    print("first ckpt (w,y,y) =", 2 / 4)
    # mixed pool: model0 l=2 argmaxes (A,A) -> 1/3; model1 l=4 (B,A,B,A) -> 4/5
    print("mixed pool first layer =", repr((1 / 3 + 4 / 5) / 2))
    print("ckpt failure [[1,0,0],[1,1,0]] =", (1 / 3 + 2 / 3) / 2)
    print("avg prob mass {0.5,1.0} =", 1 - (0.5 + 1.0) / 2)
    print("spearman (1,2,3,4)/(1,1,2,2) =", repr(spearman_naive([1, 2, 3, 4], [1, 1, 2, 2])), repr(4 / math.sqrt(20)))
    print("U a={1,3} b={2,4} =", u_pairs([1, 3], [2, 4]), u_pairs([1, 3], [2, 4]) / 4)
    r = pearson([1, 2, 3], [1, 2, 2])
    print("ols r2 =", repr(r * r))
    rates = [0.6, 0.4, 0.5]
    print("partition fail =", [i for i, r in enumerate(rates) if r > 0.5])

    # exact two-sided MW p for a={1,3}, b={2,4}: enumerate all splits
    pooled = [1, 3, 2, 4]
    obs = u_pairs([1, 3], [2, 4])
    mu = 2.0
    hits = total = 0
    for idx in itertools.combinations(range(4), 2):
        a = [pooled[i] for i in idx]
        b = [pooled[i] for i in range(4) if i not in idx]
        total += 1
        hits += abs(u_pairs(a, b) - mu) >= abs(obs - mu) - 1e-12
    print("MW exact p a={1,3} b={2,4} =", Fraction(hits, total))

    # m=1, k=3, three items predicted with p(y*) = 1: each item calibrates on the other two.
    for alpha in (0.1, 0.4):
        qhat, t = lac_threshold_bruteforce([1.0, 1.0], alpha)
        size = 3 if qhat > 1 else sum(p >= t for p in [1.0, 0.0, 0.0])
        print("deterministic 3-item alpha", alpha, "qhat", qhat, "size", size)

    # Planted match rates: same-group pairs match w.p. 0.6, cross-group w.p. 0.5.
    # f = P(A > B) + P(A = B) / 2 for independent Bernoulli(0.6), Bernoulli(0.5).
    pa, pb = Fraction(3, 5), Fraction(1, 2)
    f = pa * (1 - pb) + (pa * pb + (1 - pa) * (1 - pb)) / 2
    print("planted match-rate f =", f, float(f))


if __name__ == "__main__":
    main()
