"""Independent reference implementations used to cross-check the library.

Everything here is deliberately naive (enumeration, dense quadrature,
from-scratch recomputation) and shares no code with the implementations it
checks.
"""

from __future__ import annotations

import itertools

import numpy as np


def dense_morlet_coefficient(sample_fn, n_samples: int, scale: float, position: float,
                             fb: float, fc: float, oversample: int = 32) -> complex:
    """Wavelet coefficient by dense trapezoidal quadrature.

    sample_fn(t) evaluates the analysed signal at arbitrary (possibly
    fractional) times inside [0, n_samples - 1]; the signal is zero
    outside, matching the zero-padding of the discrete transform. The
    integration grid puts `oversample` points per oscillation period of the
    analysing wavelet and truncates where the envelope falls below 1e-12.
    """
    halfwidth = np.sqrt(fb * np.log(1e12)) * scale
    lo = max(0.0, position - halfwidth)
    hi = min(float(n_samples - 1), position + halfwidth)
    h = min(0.25, scale / (fc * oversample))
    steps = max(int(np.ceil((hi - lo) / h)), 8)
    t = np.linspace(lo, hi, steps + 1)
    x = (t - position) / scale
    psi = (np.pi * fb) ** -0.5 * np.exp(2j * np.pi * fc * x) * np.exp(-(x ** 2) / fb)
    integrand = sample_fn(t) * np.conj(psi)
    return complex(np.trapz(integrand, t) / np.sqrt(scale))


def best_two_partition_sse(x: np.ndarray) -> float:
    """Exhaustive minimum SSE over all 2-partitions of the rows."""
    n = x.shape[0]
    best = np.inf
    for bits in range(1, 2 ** (n - 1)):  # row 0 stays in group 0: halves the space
        mask = np.array([(bits >> i) & 1 for i in range(n)], dtype=bool)
        if not mask.any() or mask.all():
            continue
        sse = 0.0
        for group in (x[mask], x[~mask]):
            sse += float(np.sum((group - group.mean(axis=0)) ** 2))
        best = min(best, sse)
    return best


def ward_agglomerate_naive(x: np.ndarray):
    """Agglomeration recomputing every cluster-pair distance from cluster
    means at each step:

        d(A, B)^2 = 2 |A| |B| / (|A| + |B|) * ||mean(A) - mean(B)||^2

    Node ids and tie-breaking mirror the production convention (leaves
    first, then one id per merge; smallest (a, b) pair wins ties).
    Returns [(node_a, node_b, height, size)].
    """
    n = x.shape[0]
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    merges = []
    next_id = n
    for _ in range(n - 1):
        best = None
        for a, b in itertools.combinations(sorted(members), 2):
            ma = x[members[a]].mean(axis=0)
            mb = x[members[b]].mean(axis=0)
            na, nb = len(members[a]), len(members[b])
            d2 = 2.0 * na * nb / (na + nb) * float(np.sum((ma - mb) ** 2))
            key = (a, b) if a < b else (b, a)
            if best is None or d2 < best[0] or (d2 == best[0] and key < best[1]):
                best = (d2, key)
        d2, (a, b) = best
        members[next_id] = members.pop(a) + members.pop(b)
        merges.append((a, b, float(np.sqrt(d2)), len(members[next_id])))
        next_id += 1
    return merges


def cophenetic_steps(merges, n: int) -> np.ndarray:
    """Matrix of the merge step at which each leaf pair first joins."""
    out = np.full((n, n), -1, dtype=int)
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    for step, (a, b, _, _) in enumerate(merges):
        ga, gb = members.pop(a), members.pop(b)
        for i in ga:
            for j in gb:
                out[i, j] = out[j, i] = step
        members[n + step] = ga + gb
    return out


def pearson_r2_two_pass(obs, sim) -> float:
    """Squared Pearson correlation via explicit two-pass sums."""
    obs = [float(v) for v in obs]
    sim = [float(v) for v in sim]
    n = len(obs)
    mo = sum(obs) / n
    ms = sum(sim) / n
    cov = sum((o - mo) * (s - ms) for o, s in zip(obs, sim))
    vo = sum((o - mo) ** 2 for o in obs)
    vs = sum((s - ms) ** 2 for s in sim)
    return cov * cov / (vo * vs)


def rand_index_adjusted_naive(a, b) -> float:
    """ARI from explicit pair counting over all row pairs."""
    a = list(a)
    b = list(b)
    n = len(a)
    same_both = same_a = same_b = 0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            pairs += 1
            in_a = a[i] == a[j]
            in_b = b[i] == b[j]
            same_a += in_a
            same_b += in_b
            same_both += in_a and in_b
    expected = same_a * same_b / pairs
    max_index = 0.5 * (same_a + same_b)
    if max_index == expected:
        return 1.0 if same_both == expected else 0.0
    return (same_both - expected) / (max_index - expected)
