"""Independent reference computations used by the tests.

Nothing here imports from ``qtp``; each oracle re-derives its quantity the
slow, explicit way.
"""

from __future__ import annotations

import itertools

import numpy as np


def weyl(d, z, x):
    m = np.zeros((d, d), dtype=complex)
    for k in range(d):
        m[(k + x) % d, k] = np.exp(2j * np.pi * ((k + x) % d) * z / d)
    return m


def bell_vectors(d):
    """Columns |Phi_zx> for (z, x) in row-major order, built from explicit kets."""
    ket = np.eye(d)
    phi00 = sum(np.kron(ket[k], ket[k]) for k in range(d)) / np.sqrt(d)
    cols = []
    for z in range(d):
        for x in range(d):
            cols.append(np.kron(weyl(d, z, x), np.eye(d)) @ phi00)
    return np.array(cols).T


def sdc_distribution(kraus, d, z, x):
    """Density-matrix route: rho -> sum_i (K_i x I) rho (K_i x I)^dag, then Bell projections."""
    basis = bell_vectors(d)
    psi = basis[:, z * d + x]
    rho = np.outer(psi, psi.conj())
    out = np.zeros((d * d, d * d), dtype=complex)
    for k in kraus:
        big = np.kron(k, np.eye(d))
        out += big @ rho @ big.conj().T
    probs = np.array([np.real(basis[:, j].conj() @ out @ basis[:, j]) for j in range(d * d)])
    return probs.reshape(d, d)


def random_channel(d, n_ops, rng):
    """Random Kraus set normalized so that sum K^dag K = I."""
    ops = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(n_ops)]
    s = sum(k.conj().T @ k for k in ops)
    w, v = np.linalg.eigh(s)
    inv_sqrt = v @ np.diag(w**-0.5) @ v.conj().T
    return [k @ inv_sqrt for k in ops]


def hamming_words(a, b):
    return sum(bin(ord(x) ^ ord(y)).count("1") for x, y in zip(a, b))


def brute_force_repair(word, dictionary_words, rank=None):
    """Exhaustive argmin with (distance, rank-present-first, rank, lexicographic) ordering."""
    rank = rank or {}
    best = None
    for w in dictionary_words:
        if len(w) != len(word):
            continue
        key = (hamming_words(w, word), w not in rank, rank.get(w, 0), w)
        if best is None or key < best[0]:
            best = (key, w)
    return None if best is None else best[1]


def near_equal_partition(n, m):
    k = -(-n // m)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    return sizes


def central_difference(f, x, h=1e-4):
    return (f(x + h) - f(x - h)) / (2 * h)


def all_messages(d):
    return list(itertools.product(range(d), range(d)))
