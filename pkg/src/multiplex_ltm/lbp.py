"""Loopy belief propagation on the Bayesian-network image of an LTM instance.

Sum-product runs on the factor graph with one factor per CPT. A factor with
``d`` parents has ``2**d`` rows, so the factor-to-variable messages are not
computed from the table. They use the product structure of the CPT instead.
With independent parents ``x_j ~ Bernoulli(p_j)``,

    prod_k (1 + sum_j b_kj x_j)

expands into a sum over ways of giving each layer to at most one parent. In
the commutative algebra spanned by ``e_T`` (``T`` a subset of layers) with
``e_S e_T = e_{S|T}`` for disjoint ``S, T`` and 0 otherwise, that sum is the
product over parents of ``A_j = 1 + p_j sum_{T != {}} prod_{k in T} b_kj e_T``.
OR uses ``b = -w`` and reads off ``1 - (sum of all coefficients)``; AND uses
``b = +w`` and reads off the coefficient of the full layer set.

The non-constant part of each ``A_j`` is nilpotent, so ``log`` and ``exp``
are finite series. Products over a factor's parents and the leave-one-out
products needed for messages to parents are then sums and differences of
logs, vectorized across all edges.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Mapping

import numpy as np

from .bayesnet import BayesNet, MarginalResult, _check_evidence

DEFAULTS = {"max_iters": 200, "tolerance": 1e-6, "damping": 0.5}


@lru_cache(maxsize=None)
def _algebra(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    size = 2**m
    S, T = [], []
    for s in range(size):
        for t in range(size):
            if s & t == 0:
                S.append(s)
                T.append(t)
    S, T = np.array(S), np.array(T)
    M = np.zeros((len(S), size))
    M[np.arange(len(S)), S | T] = 1.0
    return S, T, M


def _mul(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    S, T, M = _algebra(m)
    return (a[:, S] * b[:, T]) @ M


def _log1p(N: np.ndarray, m: int) -> np.ndarray:
    """log(1 + N) for N with zero constant term."""
    out = np.zeros_like(N)
    power = N
    for r in range(1, m + 1):
        out += ((-1) ** (r + 1) / r) * power
        power = _mul(power, N, m)
    return out


def _exp(X: np.ndarray, m: int) -> np.ndarray:
    """exp(X) for X with zero constant term."""
    out = np.zeros_like(X)
    out[:, 0] = 1.0
    power = X
    for r in range(1, m + 1):
        out += power / math.factorial(r)
        power = _mul(power, X, m)
    return out


class _FactorGraph:
    def __init__(self, bn: BayesNet):
        self.n, self.m = bn.n, bn.m
        m, size = bn.m, 2**bn.m
        fac, par, coef, sign = [], [], [], []
        self.kind = np.array([c.kind for c in bn.cpts])
        for c in bn.cpts:
            s = -1.0 if c.kind == "OR" else 1.0
            for t, j in enumerate(c.parents):
                fac.append(c.agent - 1)
                par.append(j - 1)
                row = np.zeros(size)
                for T in range(1, size):
                    row[T] = math.prod(s * c.weights[k, t] for k in range(m) if T >> k & 1)
                coef.append(row)
                sign.append(s)
        self.fac = np.array(fac, dtype=np.int64)
        self.par = np.array(par, dtype=np.int64)
        self.E = len(fac)
        self.coef = np.array(coef).reshape(self.E, size)
        one = np.zeros((self.E, size))
        one[:, 0] = 1.0
        self.coef_one = one + self.coef  # A_j at p_j = 1
        self.edge_or = np.array([self.kind[f] == "OR" for f in fac], dtype=bool)

    def evaluate(self, X: np.ndarray, is_or: np.ndarray) -> np.ndarray:
        or_val = 1.0 - X.sum(axis=1)
        and_val = X[:, -1]
        return np.clip(np.where(is_or, or_val, and_val), 0.0, 1.0)


def _normalize(p1: np.ndarray, p0: np.ndarray) -> np.ndarray:
    z = p1 + p0
    return np.where(z > 0, p1 / np.where(z > 0, z, 1.0), 0.5)


def _incoming(n, targets, msgs, ev1, ev0):
    """Log-sum and zero-count of incoming messages per variable, for both values."""
    with np.errstate(divide="ignore"):
        l1, l0 = np.log(msgs), np.log1p(-msgs)
    acc = {}
    for name, logs, ev in (("1", l1, ev1), ("0", l0, ev0)):
        zero = ~np.isfinite(logs)
        s = np.zeros(n)
        z = np.zeros(n, dtype=np.int64)
        np.add.at(s, targets, np.where(zero, 0.0, logs))
        np.add.at(z, targets, zero.astype(np.int64))
        z += (ev == 0).astype(np.int64)
        acc[name] = (s, z, logs, zero)
    return acc


def _leave_one_out(acc, targets):
    out = {}
    for name in ("1", "0"):
        s, z, logs, zero = acc[name]
        s_, z_ = s[targets] - np.where(zero, 0.0, logs), z[targets] - zero
        out[name] = np.where(z_ > 0, 0.0, np.exp(s_))
    return _normalize(out["1"], out["0"])


def loopy_bp(
    bn: BayesNet,
    evidence: Mapping[int, int] | None = None,
    max_iters: int = DEFAULTS["max_iters"],
    tolerance: float = DEFAULTS["tolerance"],
    damping: float = DEFAULTS["damping"],
) -> MarginalResult:
    """Flooding sum-product with damping; exact on polytrees.

    ``converged`` is set when the largest change of any message drops below
    ``tolerance``; marginals are returned either way.
    """
    ev = _check_evidence(bn, evidence)
    g = _FactorGraph(bn)
    n, m = g.n, g.m
    ev1 = np.ones(n)
    ev0 = np.ones(n)
    for i, v in ev.items():
        (ev0 if v == 1 else ev1)[i - 1] = 0.0
    const = g.kind == "CONST"
    node_or = g.kind == "OR"

    # every message is stored as its (normalized) value at x = 1
    mu_child = np.full(n, 0.5)  # factor f_c -> variable c
    mu_par = np.full(g.E, 0.5)  # factor f_c -> parent j, per edge
    targets = np.concatenate([np.arange(n), g.par])
    converged = False
    residual = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        msgs = np.concatenate([mu_child, mu_par])
        acc = _incoming(n, targets, msgs, ev1, ev0)
        nu = _leave_one_out(acc, targets)
        lam, pi = nu[:n], nu[n:]  # lam[c] = nu(c -> f_c), pi[e] = nu(parent -> f_c)

        logA = _log1p(pi[:, None] * g.coef, m) if g.E else np.zeros((0, 2**m))
        L = np.zeros((n, 2**m))
        np.add.at(L, g.fac, logA)
        full = _exp(L, m)
        p_child = g.evaluate(full, node_or)
        p_child[const] = 1.0
        if g.E:
            loo = _exp(L[g.fac] - logA, m)
            g0 = g.evaluate(loo, g.edge_or)
            g1 = g.evaluate(_mul(loo, g.coef_one, m), g.edge_or)
            lf = lam[g.fac]
            new_par = _normalize((1 - lf) * (1 - g1) + lf * g1, (1 - lf) * (1 - g0) + lf * g0)
        else:
            new_par = mu_par
        new_child = (1 - damping) * p_child + damping * mu_child
        new_par = (1 - damping) * new_par + damping * mu_par
        residual = float(max(np.max(np.abs(new_child - mu_child)), np.max(np.abs(new_par - mu_par), initial=0.0)))
        mu_child, mu_par = new_child, new_par
        if residual < tolerance:
            converged = True
            break

    msgs = np.concatenate([mu_child, mu_par])
    acc = _incoming(n, targets, msgs, ev1, ev0)
    b1 = np.where(acc["1"][1] > 0, 0.0, np.exp(acc["1"][0]))
    b0 = np.where(acc["0"][1] > 0, 0.0, np.exp(acc["0"][0]))
    per_agent = _normalize(b1, b0)
    for i, v in ev.items():
        per_agent[i - 1] = float(v)
    return MarginalResult(
        np.clip(per_agent, 0.0, 1.0), "loopy-bp", converged=converged, iterations=it, residual=residual, evidence=ev
    )
