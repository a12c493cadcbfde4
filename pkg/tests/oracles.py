"""Independent reference implementations used to check the package.

Everything here is written in the most literal way possible (plain loops,
no shared code with the package internals) so a bug in the package cannot
hide in its own oracle.
"""
import math
from collections import Counter


def oracle_throttling(bins, c, eta):
    """bins: list of per-dim lists; c, eta: per-dim lists."""
    hits = 0
    for w in bins:
        if any(w[r] > eta[r] * c[r] for r in range(len(c))):
            hits += 1
    return hits / len(bins)


def oracle_slack(bins, c):
    out = []
    for r in range(len(c)):
        out.append(sum((c[r] - w[r]) / c[r] for w in bins) / len(bins))
    return out


def oracle_rightsize(bins, c0, cand_dims, eta, s_star, tau, K):
    """Exhaustive enumeration of the complete per-dimension optimizer.

    Returns (capacity list, censored flag, per-dim infeasible flags).
    """
    n_dims = len(c0)
    censored = oracle_throttling(bins, c0, eta) > 0
    caps, infeasible = [], []
    for r in range(n_dims):
        best = None
        best_key = None
        for cand in cand_dims[r]:
            vec = list(c0)
            vec[r] = cand
            if censored:
                ok = cand >= (2 ** K) * c0[r]
            else:
                ok = oracle_throttling(bins, vec, eta) <= tau
            if not ok:
                continue
            s = oracle_slack(bins, vec)[r]
            key = (abs(s - s_star[r]), cand)
            if best_key is None or key < best_key:
                best_key = key
                best = cand
        if best is None:
            caps.append(cand_dims[r][-1])
            infeasible.append(True)
        else:
            caps.append(best)
            infeasible.append(False)
    return caps, censored, infeasible


def oracle_entropy(col):
    n = len(col)
    counts = Counter(col)
    return -sum((k / n) * math.log2(k / n) for k in counts.values())


def oracle_joint_entropy(col1, col2):
    return oracle_entropy(list(zip(col1, col2)))


def oracle_conditional_entropy(col1, col2):
    """H(m1|m2) via the chain rule H(m1,m2) - H(m2)."""
    return oracle_joint_entropy(col1, col2) - oracle_entropy(col2)


def oracle_percentile(values, p):
    """Nearest-rank percentile via explicit sort and 1-based indexing."""
    s = sorted(values)
    idx = math.ceil(p / 100.0 * len(s))
    return s[max(idx, 1) - 1]
