"""Bayesian-network backend for multiplex LTM instances with acyclic projection.

Each agent becomes a binary node whose parents are its projected
out-neighbors (the agents it senses). Given the final states of its parents,
agent ``i`` gets a positive input from layer ``k`` with probability
``s_k = sum of w^k_ij over active parents j``, independently across layers
because thresholds are. Hence

    OR:   P(x_i = 1 | parents) = 1 - prod_k (1 - s_k)
    AND:  P(x_i = 1 | parents) = prod_k s_k

Seeds enter as an intervention: a seed node loses its parents and gets a
constant CPT equal to 1. On a DAG the joint of the network is then exactly
the distribution of the steady state, so its marginals are the activation
probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapacityError, CyclicProjectionError
from .network import MultiplexNetwork, topological_order, validate_seeds
from .protocols import ProtocolLike, as_protocol, protocol_sequence

MAX_UNOBSERVED = 25
_CHUNK_BITS = 16
_ONE_TOL = 1e-12


@dataclass(frozen=True)
class ConditionalProbabilityTable:
    """``rows[r] = P(x_agent = 1 | parent states)``; parent 0 is the most significant bit of ``r``.

    ``weights[k, t]`` is the layer-``k`` weight on parent ``t`` and ``kind`` is
    "OR", "AND" or "CONST" (an intervened seed with no parents).
    """

    agent: int
    parents: tuple[int, ...]
    rows: np.ndarray
    kind: str
    weights: np.ndarray

    def probability(self, states: Mapping[int, int] | Sequence[int]) -> float:
        """Row lookup from parent states, given as a mapping or in parent order."""
        if isinstance(states, Mapping):
            states = [states[j] for j in self.parents]
        r = 0
        for b in states:
            r = (r << 1) | int(bool(b))
        return float(self.rows[r])

    def to_json(self) -> dict:
        return {"agent": self.agent, "parents": list(self.parents), "rows": [float(x) for x in self.rows]}


CPT = ConditionalProbabilityTable


def _parent_bits(d: int) -> np.ndarray:
    """``(2**d, d)`` parent states for each row index, MSB first."""
    r = np.arange(2**d)[:, None]
    shifts = np.arange(d - 1, -1, -1)[None, :]
    return ((r >> shifts) & 1).astype(np.float64)


def build_cpt(network: MultiplexNetwork, agent: int, protocol: ProtocolLike) -> ConditionalProbabilityTable:
    kind = as_protocol(protocol, network.m).classify(network.m)
    parents = tuple(sorted({j for layer in network.layers for j in layer.out_neighbors(agent)}))
    d = len(parents)
    pos = {j: t for t, j in enumerate(parents)}
    weights = np.zeros((network.m, d))
    for k, layer in enumerate(network.layers):
        for j, w in layer.out_edges(agent):
            weights[k, pos[j]] = w
    s = np.clip(_parent_bits(d) @ weights.T, 0.0, 1.0)  # (rows, m)
    # a full layer sums to one up to rounding; make it exact so certain events stay certain
    s[np.abs(s - 1.0) <= _ONE_TOL] = 1.0
    if kind == "OR":
        rows = 1.0 - np.prod(1.0 - s, axis=1)
    else:
        rows = np.prod(s, axis=1)
    return ConditionalProbabilityTable(agent, parents, np.clip(rows, 0.0, 1.0), kind, weights)


def _constant_cpt(agent: int, m: int) -> ConditionalProbabilityTable:
    return ConditionalProbabilityTable(agent, (), np.array([1.0]), "CONST", np.zeros((m, 0)))


@dataclass(frozen=True)
class BayesNet:
    n: int
    m: int
    cpts: tuple[ConditionalProbabilityTable, ...]
    order: tuple[int, ...]  # parents before children

    def parents(self, i: int) -> tuple[int, ...]:
        return self.cpts[i - 1].parents

    def children(self, i: int) -> tuple[int, ...]:
        return tuple(c.agent for c in self.cpts if i in c.parents)

    def intervene(self, seeds: Iterable[int]) -> "BayesNet":
        """Copy in which every seed is cut from its parents and fixed at 1."""
        seeds = validate_seeds(seeds, self.n)
        cpts = tuple(_constant_cpt(c.agent, self.m) if c.agent in seeds else c for c in self.cpts)
        return replace(self, cpts=cpts)


def build_bayes_net(network: MultiplexNetwork, protocols: ProtocolLike | Iterable[ProtocolLike]) -> BayesNet:
    order = topological_order(network)
    if order is None:
        raise CyclicProjectionError(
            "the projection has a cycle; the Bayesian-network backend needs a DAG "
            "(use 'exact' or 'simulate' instead)"
        )
    protocols = protocol_sequence(protocols, network.n, network.m)
    cpts = tuple(build_cpt(network, i, protocols[i - 1]) for i in network.agents)
    return BayesNet(network.n, network.m, cpts, tuple(order))


@dataclass
class MarginalResult:
    per_agent: np.ndarray
    method: str
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0
    evidence: dict[int, int] = field(default_factory=dict)

    @property
    def spread(self) -> float:
        return float(self.per_agent.sum())

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "per_agent": [float(x) for x in self.per_agent],
            "spread": self.spread,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": float(self.residual),
        }


def _check_evidence(bn: BayesNet, evidence: Mapping[int, int] | None) -> dict[int, int]:
    ev = {int(i): int(v) for i, v in (evidence or {}).items()}
    for i, v in ev.items():
        if not 1 <= i <= bn.n or v not in (0, 1):
            raise ValueError(f"bad evidence entry {i}: {v}")
    return ev


def exact_marginals_enumeration(
    bn: BayesNet, evidence: Mapping[int, int] | None = None, max_unobserved: int = MAX_UNOBSERVED
) -> MarginalResult:
    """Marginals conditioned on evidence by summing the joint over all free assignments."""
    ev = _check_evidence(bn, evidence)
    free = [i for i in range(1, bn.n + 1) if i not in ev]
    if len(free) > max_unobserved:
        raise CapacityError(
            f"{len(free)} unobserved nodes exceed the enumeration limit of {max_unobserved}; use LBP"
        )
    total = 2 ** len(free)
    chunk = 2**_CHUNK_BITS
    free_idx = np.array([i - 1 for i in free], dtype=np.int64)
    shifts = np.arange(len(free), dtype=np.int64)
    z_parts: list[float] = []
    m_parts: list[np.ndarray] = []
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        X = np.zeros((len(idx), bn.n), dtype=np.int64)
        for i, v in ev.items():
            X[:, i - 1] = v
        if len(free):
            X[:, free_idx] = (idx[:, None] >> shifts[None, :]) & 1
        joint = np.ones(len(idx))
        for c in bn.cpts:
            r = np.zeros(len(idx), dtype=np.int64)
            for j in c.parents:
                r = (r << 1) | X[:, j - 1]
            p1 = c.rows[r]
            joint *= np.where(X[:, c.agent - 1] == 1, p1, 1.0 - p1)
        z_parts.append(float(joint.sum()))
        m_parts.append(joint @ X)
    z = math.fsum(z_parts)
    if z <= 0.0:
        raise ValueError("evidence has probability zero under this network")
    stacked = np.stack(m_parts)
    per_agent = np.array([math.fsum(stacked[:, i]) for i in range(bn.n)]) / z
    for i, v in ev.items():
        per_agent[i - 1] = float(v)
    return MarginalResult(np.clip(per_agent, 0.0, 1.0), "exact-enumeration", evidence=ev)


def spread_evidence(network: MultiplexNetwork, seeds: Iterable[int]) -> dict[int, int]:
    """Seeds observed active; unseeded agents with no out-neighbors observed inactive."""
    seeds = validate_seeds(seeds, network.n)
    ev = {s: 1 for s in seeds}
    for i in network.agents:
        if i not in seeds and all(layer.out_degree(i) == 0 for layer in network.layers):
            ev[i] = 0
    return ev


def influence_spread_bn(
    network: MultiplexNetwork,
    protocols: ProtocolLike | Iterable[ProtocolLike],
    seeds: Iterable[int],
    method: str = "exact",
    **lbp_params,
) -> MarginalResult:
    """Activation marginals and spread (``result.spread``) through the BN image."""
    seeds = validate_seeds(seeds, network.n)
    bn = build_bayes_net(network, protocols).intervene(seeds)
    ev = spread_evidence(network, seeds)
    if method == "exact":
        return exact_marginals_enumeration(bn, ev)
    if method == "lbp":
        from .lbp import loopy_bp

        return loopy_bp(bn, ev, **lbp_params)
    raise ValueError(f"unknown method {method!r}; expected 'exact' or 'lbp'")
