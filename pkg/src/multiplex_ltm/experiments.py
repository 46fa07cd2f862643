"""Protocol design experiments.

Signal detection utility
    A signal node is attached to one sensing agent ``l``. A real signal is
    visible to ``l`` in every layer, a spurious one in a single layer. The
    utility of a protocol sequence rewards cascades triggered by real signals
    and charges ``c`` per unit of cascades triggered by spurious ones,
    averaged over the sensing agent.

Random-DAG sweep
    Mean cascade centrality of the root of random duplex DAGs as the edge
    probability grows, for all-OR, all-AND and randomly mixed protocols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .analytic import random_duplex_dag_from_uniforms
from .bayesnet import influence_spread_bn
from .errors import CapacityError, NetworkValidationError
from .live_edge import exact_probabilities, exact_probabilities_batch
from .network import LayerGraph, MultiplexNetwork
from .protocols import AND, OR, Protocol

MODES = ("real", "spur1", "spur2")
TIE_TOL = 1e-9


def build_signal_network(
    base: MultiplexNetwork, l: int, mode: str, rewiring: str = "remove"
) -> MultiplexNetwork:
    """Base network plus a signal agent ``n + 1`` sensed by ``l`` with weight 1.

    In each layer where ``l`` sees the signal, its other out-edges are dropped
    (``rewiring="remove"``) or kept and scaled so the layer still sums to one
    (``rewiring="renormalize"``, signal weight 1 before scaling).
    """
    if mode not in MODES:
        raise NetworkValidationError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    if rewiring not in ("remove", "renormalize"):
        raise NetworkValidationError(f"unknown rewiring {rewiring!r}")
    base.agent_id(l)
    n = base.n + 1
    signal = n
    visible = {"real": range(base.m), "spur1": [0], "spur2": [1 % base.m]}[mode]
    layers = []
    for k, layer in enumerate(base.layers):
        edges = list(layer.edges)
        if k in visible:
            own = [e for e in edges if e[0] == l]
            edges = [e for e in edges if e[0] != l]
            if rewiring == "remove":
                edges.append((l, signal, 1.0))
            else:
                total = 1.0 + sum(w for _, _, w in own)
                edges += [(l, j, w / total) for _, j, w in own] + [(l, signal, 1.0 / total)]
        layers.append(LayerGraph(n, edges))
    names = None if base.names is None else list(base.names) + ["signal"]
    return MultiplexNetwork(n, layers, names)


def all_sequences(n: int) -> list[tuple[Protocol, ...]]:
    """All ``2**n`` OR/AND sequences; index bit ``i`` set means agent ``i+1`` uses AND."""
    return [tuple(AND if (s >> i) & 1 else OR for i in range(n)) for s in range(2**n)]


def _and_set(seq: Sequence[Protocol]) -> frozenset[int]:
    return frozenset(i + 1 for i, p in enumerate(seq) if p.kind == "AND")


@dataclass
class SignalCentralities:
    """``real[u, l]`` and ``spur[u, l]`` (mean of the two spurious modes) per sequence ``u``."""

    sequences: list[tuple[Protocol, ...]]
    real: np.ndarray
    spur: np.ndarray

    def utility(self, c: float) -> np.ndarray:
        return self.real.mean(axis=1) - c * self.spur.mean(axis=1)


def signal_centralities(
    base: MultiplexNetwork,
    sequences: Sequence[Sequence[Protocol]] | None = None,
    rewiring: str = "remove",
) -> SignalCentralities:
    """Signal-node cascade centralities of every sequence on all ``3n`` scenario networks.

    The signal agent itself uses OR; it senses no one, so this does not matter.
    """
    if sequences is None:
        sequences = all_sequences(base.n)
    sequences = [tuple(s) for s in sequences]
    n = base.n
    real = np.zeros((len(sequences), n))
    spur = np.zeros((len(sequences), n))
    for l in range(1, n + 1):
        for mode in MODES:
            g = build_signal_network(base, l, mode, rewiring)
            results = exact_probabilities_batch(g, [s + (OR,) for s in sequences], {n + 1})
            vals = np.array([r.spread for r in results])
            if mode == "real":
                real[:, l - 1] = vals
            else:
                spur[:, l - 1] += 0.5 * vals
    return SignalCentralities(sequences, real, spur)


def utility_Q(base: MultiplexNetwork, protocols: Sequence[Protocol], c: float, rewiring: str = "remove") -> float:
    if c < 0:
        raise ValueError("c must be nonnegative")
    sc = signal_centralities(base, [tuple(protocols)], rewiring)
    return float(sc.utility(c)[0])


@dataclass
class SweepPoint:
    c: float
    q_opt: float
    optimal_sets: list[frozenset[int]]
    fraction_and: float


@dataclass
class UtilitySweepResult:
    points: list[SweepPoint]
    n: int
    rewiring: str = field(default="remove")

    def to_rows(self) -> list[dict]:
        return [
            {
                "c": round(p.c, 10),
                "fraction_and": p.fraction_and,
                "q_opt": p.q_opt,
                "optimal_sets": ";".join(
                    "{" + ",".join(map(str, sorted(s))) + "}" for s in sorted(p.optimal_sets, key=lambda s: (len(s), sorted(s)))
                ),
            }
            for p in self.points
        ]


def c_grid(c_max: float = 3.0, c_step: float = 0.05) -> list[float]:
    steps = int(round(c_max / c_step))
    return [round(i * c_step, 12) for i in range(steps + 1)]


def optimal_protocol_sweep(
    base: MultiplexNetwork,
    grid: Iterable[float] | None = None,
    rewiring: str = "remove",
    max_agents: int = 20,
) -> UtilitySweepResult:
    """Exhaustive argmax of the utility over all sequences at each ``c``; ties within 1e-9 kept."""
    if base.n > max_agents:
        raise CapacityError(f"{base.n} agents need 2**{base.n} sequences; the sweep is limited to {max_agents}")
    grid = c_grid() if grid is None else list(grid)
    sc = signal_centralities(base, rewiring=rewiring)
    sets = [_and_set(s) for s in sc.sequences]
    points = []
    for c in grid:
        q = sc.utility(c)
        best = float(q.max())
        winners = [sets[u] for u in np.flatnonzero(q >= best - TIE_TOL)]
        frac = min(len(s) for s in winners) / base.n
        points.append(SweepPoint(float(c), best, winners, frac))
    return UtilitySweepResult(points, base.n, rewiring)


# ---------------------------------------------------------------------------
# random DAG sweep

PE_MODES = ("or", "and", "mixed")


@dataclass
class PeCurvePoint:
    p_e: float
    mode: str
    mean_centrality: float
    stderr: float
    values: list[float]
    backend: str


def _replicate_rng(master_seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(rep,)))


def replicate_draws(n: int, master_seed: int, rep: int, m: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Edge uniforms and the mixed-mode AND mask of one replicate.

    The same draws serve every ``p_e``, so replicate networks are nested in
    ``p_e`` and shared by all modes.
    """
    rng = _replicate_rng(master_seed, rep)
    uniforms = rng.random((m, n, n))
    mixed = rng.random(n) < 0.5
    return uniforms, mixed


def root_centrality(network: MultiplexNetwork, protocols, backend: str, **lbp_params) -> float:
    if backend == "bn":
        return influence_spread_bn(network, protocols, {1}, method="exact").spread
    if backend == "lbp":
        return influence_spread_bn(network, protocols, {1}, method="lbp", **lbp_params).spread
    if backend == "lem":
        return exact_probabilities(network, protocols, {1}).spread
    raise ValueError(f"unknown backend {backend!r}")


def pe_sweep(
    n: int,
    p_e_grid: Sequence[float],
    replicates: int,
    modes: Sequence[str] = PE_MODES,
    master_seed: int = 0,
    backend: str = "auto",
    **lbp_params,
) -> list[PeCurvePoint]:
    """Mean root centrality per ``(p_e, mode)`` over replicate random duplex DAGs.

    The root is agent 1, which senses no one and is first in topological
    order. ``backend="auto"`` uses exact Bayesian-network enumeration for
    ``n <= 12`` and loopy BP above.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    for mode in modes:
        if mode not in PE_MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(PE_MODES)}")
    if backend == "auto":
        backend = "bn" if n <= 12 else "lbp"
    draws = [replicate_draws(n, master_seed, r) for r in range(replicates)]
    out = []
    for p_e in p_e_grid:
        nets = [random_duplex_dag_from_uniforms(u, p_e) for u, _ in draws]
        for mode in modes:
            vals = []
            for net, (_, mixed) in zip(nets, draws):
                if mode == "or":
                    prot = [OR] * n
                elif mode == "and":
                    prot = [AND] * n
                else:
                    prot = [AND if a else OR for a in mixed]
                vals.append(root_centrality(net, prot, backend, **lbp_params))
            arr = np.array(vals)
            se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
            out.append(PeCurvePoint(float(p_e), mode, float(math.fsum(vals) / len(vals)), se, vals, backend))
    return out
