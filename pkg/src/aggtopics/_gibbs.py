"""Numba kernels for the collapsed Gibbs sampler.

The RNG is a self-contained xorshift128+ whose two-word state is passed in
explicitly, so concurrent fits never share state and a fit is bit-identical
for a given seed. Counts use int64; probabilities are accumulated in
float64 with no fastmath, keeping results deterministic.
"""

import numpy as np
from numba import njit

_U23 = np.uint64(23)
_U17 = np.uint64(17)
_U26 = np.uint64(26)
_U11 = np.uint64(11)
_DNORM = 2.0 ** -53


@njit(inline="always")
def _next_double(state):
    """Uniform double in [0, 1) from xorshift128+ state (2 x uint64)."""
    s1 = state[0]
    s0 = state[1]
    state[0] = s0
    s1 ^= s1 << _U23
    s1 ^= s1 >> _U17
    s1 ^= s0
    s1 ^= s0 >> _U26
    state[1] = s1
    return float((state[0] + state[1]) >> _U11) * _DNORM


@njit(cache=True, nogil=True)
def init_assignments(n_tokens, n_topics, state):
    z = np.empty(n_tokens, dtype=np.int64)
    for t in range(n_tokens):
        k = int(_next_double(state) * n_topics)
        if k >= n_topics:
            k = n_topics - 1
        z[t] = k
    return z


@njit(cache=True, nogil=True)
def run_sweeps(
    doc_of,
    term_of,
    z,
    n_dk,
    n_kv,
    n_k,
    n_d,
    alpha,
    eta,
    n_sweeps,
    state,
    check_counts,
    n_average,
    thin,
    theta_acc,
    phi_acc,
):
    """Run `n_sweeps` full Gibbs sweeps in place.

    Each token draw uses p(z=k) proportional to
    (n_dk + alpha) * (n_kv + eta) / (n_k + V*eta), with the token's own
    assignment removed from the counts first. When `n_average` > 0 the
    per-state theta/phi estimates of the last `n_average` states (spaced
    `thin` sweeps apart) are accumulated into the *_acc buffers.

    Returns -1, or the sweep index at which count conservation failed when
    `check_counts` is set (which would indicate a bookkeeping bug).
    """
    n_tokens = doc_of.shape[0]
    n_docs, n_topics = n_dk.shape
    n_terms = n_kv.shape[1]
    veta = n_terms * eta
    cum = np.empty(n_topics, dtype=np.float64)

    for sweep in range(n_sweeps):
        for t in range(n_tokens):
            d = doc_of[t]
            v = term_of[t]
            k_old = z[t]
            n_dk[d, k_old] -= 1
            n_kv[k_old, v] -= 1
            n_k[k_old] -= 1

            total = 0.0
            for k in range(n_topics):
                total += (n_dk[d, k] + alpha) * (n_kv[k, v] + eta) / (n_k[k] + veta)
                cum[k] = total

            u = _next_double(state) * total
            k_new = 0
            while k_new < n_topics - 1 and cum[k_new] < u:
                k_new += 1

            z[t] = k_new
            n_dk[d, k_new] += 1
            n_kv[k_new, v] += 1
            n_k[k_new] += 1

        if check_counts:
            for d in range(n_docs):
                s = 0
                for k in range(n_topics):
                    s += n_dk[d, k]
                if s != n_d[d]:
                    return sweep
            tot = 0
            for k in range(n_topics):
                s = 0
                for v2 in range(n_terms):
                    s += n_kv[k, v2]
                if s != n_k[k]:
                    return sweep
                tot += s
            if tot != n_tokens:
                return sweep

        if n_average > 0:
            remaining = n_sweeps - 1 - sweep
            if remaining < n_average * thin and remaining % thin == 0:
                for d in range(n_docs):
                    denom = n_d[d] + n_topics * alpha
                    for k in range(n_topics):
                        theta_acc[d, k] += (n_dk[d, k] + alpha) / denom
                for k in range(n_topics):
                    denom = n_k[k] + veta
                    for v2 in range(n_terms):
                        phi_acc[k, v2] += (n_kv[k, v2] + eta) / denom
    return -1
