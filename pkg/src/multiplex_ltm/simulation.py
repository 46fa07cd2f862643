"""Monte Carlo simulation of the heterogeneous multiplex linear threshold model.

Each trial draws one threshold per agent per layer from U(0, 1) and runs the
synchronous update until no agent changes. Agent ``i`` gets a positive input
from layer ``k`` when its threshold is strictly below the total weight of its
active out-neighbors in that layer; it activates once the fraction of positive
layers reaches its protocol's ``delta``.

Reproducibility: trials are grouped in blocks of ``BLOCK_SIZE`` consecutive
indices. Block ``b`` draws its thresholds from
``SeedSequence(master_seed, spawn_key=(b,))``, so trial ``i``'s thresholds
depend only on ``(master_seed, i)``. Blocks are independent work units and
the reduction is an integer count, so results do not depend on threading.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .network import MultiplexNetwork, validate_seeds
from .protocols import Protocol, ProtocolLike, protocol_sequence

BLOCK_SIZE = 4096


@dataclass
class SpreadEstimate:
    per_agent: np.ndarray
    spread: float
    trials: int
    rng_seed: int
    method: str = field(default="monte-carlo")

    def standard_errors(self) -> np.ndarray:
        p = self.per_agent
        return np.sqrt(p * (1.0 - p) / self.trials)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "per_agent": [float(x) for x in self.per_agent],
            "spread": float(self.spread),
            "trials": self.trials,
            "seed": self.rng_seed,
        }


class _Compiled:
    """Dense per-layer weight matrices and activation requirements."""

    def __init__(self, network: MultiplexNetwork, protocols: Sequence[Protocol], seeds: frozenset[int]):
        self.n, self.m = network.n, network.m
        # (m, n, n) with W[k, i, j]
        self.W = np.stack([layer.weight_matrix() for layer in network.layers])
        self.required = np.array([p.required_layers(self.m) for p in protocols])
        self.seed_mask = np.zeros(self.n, dtype=bool)
        for s in seeds:
            self.seed_mask[s - 1] = True


def _prepare(network, protocols, seeds):
    protocols = protocol_sequence(protocols, network.n, network.m)
    seeds = validate_seeds(seeds, network.n)
    return _Compiled(network, protocols, seeds)


def _run(c: _Compiled, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    T = thresholds.shape[0]
    active = np.broadcast_to(c.seed_mask, (T, c.n)).copy()
    iterations = np.zeros(T, dtype=np.int64)
    for _ in range(c.n + 1):
        prev = active.astype(np.float64)
        positive = np.zeros((T, c.n), dtype=np.int64)
        for k in range(c.m):
            weight_sum = prev @ c.W[k].T
            positive += thresholds[:, :, k] < weight_sum
        newly = ~active & (positive >= c.required)
        changed = newly.any(axis=1)
        if not changed.any():
            break
        iterations += changed
        active |= newly
    return active, iterations


def simulate_thresholds(
    network: MultiplexNetwork,
    protocols: ProtocolLike | Iterable[ProtocolLike],
    seeds: Iterable[int],
    thresholds: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the dynamics for given thresholds.

    ``thresholds`` has shape ``(T, n, m)`` (or ``(n, m)`` for one trial).
    Returns the steady-state active mask ``(T, n)`` and the number of update
    iterations in which each trial changed.
    """
    c = _prepare(network, protocols, seeds)
    th = np.asarray(thresholds, dtype=np.float64)
    single = th.ndim == 2
    if single:
        th = th[None]
    if th.shape[1:] != (c.n, c.m):
        raise ValueError(f"thresholds must have shape (T, {c.n}, {c.m}), got {th.shape}")
    active, iterations = _run(c, th)
    if single:
        return active[0], iterations[0]
    return active, iterations


def run_trial(
    network: MultiplexNetwork,
    protocols: ProtocolLike | Iterable[ProtocolLike],
    seeds: Iterable[int],
    rng: np.random.Generator,
) -> frozenset[int]:
    """One trial with fresh thresholds from ``rng``; returns the steady-state active set."""
    th = rng.random((network.n, network.m))
    active, _ = simulate_thresholds(network, protocols, seeds, th)
    return frozenset(int(i) + 1 for i in np.flatnonzero(active))


def block_generator(master_seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(block,)))


def trial_thresholds(network: MultiplexNetwork, master_seed: int, trial: int) -> np.ndarray:
    """Thresholds used by trial ``trial`` of ``estimate_spread``."""
    block, offset = divmod(trial, BLOCK_SIZE)
    th = block_generator(master_seed, block).random((offset + 1, network.n, network.m))
    return th[offset]


def estimate_spread(
    network: MultiplexNetwork,
    protocols: ProtocolLike | Iterable[ProtocolLike],
    seeds: Iterable[int],
    trials: int,
    master_seed: int,
    threads: int = 1,
) -> SpreadEstimate:
    """Per-agent activation frequencies over ``trials`` independent trials."""
    if trials < 1:
        raise ValueError("trials must be a positive integer")
    c = _prepare(network, protocols, seeds)
    n_blocks = -(-trials // BLOCK_SIZE)

    def block_counts(b: int) -> np.ndarray:
        size = min(BLOCK_SIZE, trials - b * BLOCK_SIZE)
        th = block_generator(master_seed, b).random((size, c.n, c.m))
        active, _ = _run(c, th)
        return active.sum(axis=0)

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block_counts, range(n_blocks)))
    else:
        parts = [block_counts(b) for b in range(n_blocks)]
    counts = np.sum(parts, axis=0)
    per_agent = counts / trials
    return SpreadEstimate(per_agent=per_agent, spread=float(per_agent.sum()), trials=trials, rng_seed=master_seed)
