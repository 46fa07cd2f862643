"""Exact influence spread through the multiplex live-edge model.

In a selection of live edges every unseeded agent keeps exactly one of its
out-edges in each nonempty layer, chosen with probability equal to the edge
weight; seeds keep none. An agent using OR is reachable when some live edge
points into the reachable set, an AND agent when all of its live edges do
(and it has no empty layer). The probability that an agent is active at
steady state in the threshold model equals the total probability of the
selections under which it is reachable.

Two decision procedures live here:

* ``reachable_set_fixed_point`` grows the reachable set from the seeds and is
  what the exact backend uses;
* ``build_live_edge_tree`` + ``is_U_reachable_tree`` decide reachability
  from seed-terminated branches and feasible branch subsets. It is
  exponential and exists as an oracle for the first.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import CapacityError
from .network import MultiplexNetwork, validate_seeds
from .protocols import Protocol, ProtocolLike, protocol_sequence

DEFAULT_CAP = 10**7
CAP_ENV = "MLTM_ENUM_CAP"
DEFAULT_BRANCH_CAP = 20
_CHUNK = 4096
_LANES = 64
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


def enumeration_cap(cap: int | None = None) -> int:
    if cap is not None:
        return int(cap)
    return int(os.environ.get(CAP_ENV, DEFAULT_CAP))


@dataclass(frozen=True)
class LiveEdgeSelection:
    """Live edge of every (unseeded agent, nonempty layer) pair."""

    n: int
    m: int
    live: Mapping[tuple[int, int], int]
    probability: float

    def target(self, i: int, k: int) -> int | None:
        return self.live.get((i, k))

    def live_edges(self, i: int) -> list[tuple[int, int, int]]:
        return [(i, k, self.live[(i, k)]) for k in range(self.m) if (i, k) in self.live]


@dataclass
class ReachabilityResult:
    per_agent: np.ndarray
    spread: float
    enumerated: int
    method: str = field(default="lem-exact")

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "per_agent": [float(x) for x in self.per_agent],
            "spread": float(self.spread),
            "enumerated": self.enumerated,
        }


def selection_count(network: MultiplexNetwork, seeds: Iterable[int]) -> int:
    seeds = validate_seeds(seeds, network.n)
    return math.prod(
        max(layer.out_degree(i), 1) for i in network.agents if i not in seeds for layer in network.layers
    )


def _check_cap(count: int, cap: int | None) -> None:
    limit = enumeration_cap(cap)
    if count > limit:
        raise CapacityError(
            f"exact enumeration needs {count} live-edge selections, above the cap of {limit}; "
            "use the Bayesian-network backend ('bn') or Monte Carlo ('simulate') instead"
        )


def enumerate_selections(
    network: MultiplexNetwork, seeds: Iterable[int], cap: int | None = None
) -> Iterator[LiveEdgeSelection]:
    """All selections, lexicographic in (agent, layer, neighbor index)."""
    seeds = validate_seeds(seeds, network.n)
    _check_cap(selection_count(network, seeds), cap)
    slots = [
        (i, k)
        for i in network.agents
        if i not in seeds
        for k, layer in enumerate(network.layers)
        if layer.out_degree(i) > 0
    ]
    options = [network.layers[k].out_edges(i) for i, k in slots]
    for combo in itertools.product(*options):
        live = {slot: j for slot, (j, _) in zip(slots, combo)}
        q = math.prod(w for _, w in combo)
        yield LiveEdgeSelection(network.n, network.m, live, q)


def _or_and(protocols: Sequence[Protocol], m: int) -> list[str]:
    return [p.classify(m) for p in protocols]


def reachable_set_fixed_point(
    selection: LiveEdgeSelection,
    protocols: ProtocolLike | Iterable[ProtocolLike],
    seeds: Iterable[int],
) -> frozenset[int]:
    """Least fixed point of the OR/AND joining rule, grown from the seeds."""
    n, m = selection.n, selection.m
    kinds = _or_and(protocol_sequence(protocols, n, m), m)
    reached = set(validate_seeds(seeds, n))
    for _ in range(n):
        joined = []
        for i in range(1, n + 1):
            if i in reached:
                continue
            targets = [selection.target(i, k) for k in range(m)]
            if kinds[i - 1] == "OR":
                ok = any(t is not None and t in reached for t in targets)
            else:
                ok = all(t is not None and t in reached for t in targets)
            if ok:
                joined.append(i)
        if not joined:
            break
        reached.update(joined)
    return frozenset(reached)


# ---------------------------------------------------------------------------
# live-edge trees


@dataclass(frozen=True)
class TreeNode:
    agent: int
    children: tuple[tuple[int, "TreeNode"], ...]  # (layer, child)


@dataclass(frozen=True)
class LiveEdgeTree:
    """Live-edge tree of ``root`` with walks that revisit an agent pruned."""

    root: int
    top: TreeNode
    selection: LiveEdgeSelection
    seeds: frozenset[int]

    def branches(self) -> list[tuple[tuple[int, int, int], ...]]:
        """Seed-terminated branches as edge tuples ``(from, layer, to)``, depth-first."""
        out: list[tuple[tuple[int, int, int], ...]] = []

        def walk(node: TreeNode, path: tuple) -> None:
            for k, child in node.children:
                step = path + ((node.agent, k, child.agent),)
                if child.agent in self.seeds:
                    out.append(step)
                else:
                    walk(child, step)

        walk(self.top, ())
        return out


def build_live_edge_tree(selection: LiveEdgeSelection, agent: int, seeds: Iterable[int]) -> LiveEdgeTree:
    seeds = validate_seeds(seeds, selection.n)
    if agent in seeds:
        raise ValueError(f"agent {agent} is a seed; live-edge trees are rooted at unseeded agents")

    def grow(a: int, on_path: frozenset[int]) -> TreeNode:
        if a in seeds:
            return TreeNode(a, ())
        kids = []
        for k in range(selection.m):
            t = selection.target(a, k)
            if t is None or t in on_path:
                continue
            kids.append((k, grow(t, on_path | {t})))
        return TreeNode(a, tuple(kids))

    return LiveEdgeTree(agent, grow(agent, frozenset({agent})), selection, seeds)


def _feasible(
    subset: Sequence[tuple[tuple[int, int, int], ...]],
    kinds: Sequence[str],
    selection: LiveEdgeSelection,
    seeds: frozenset[int],
) -> bool:
    edges = {e for b in subset for e in b}
    agents = {a for b in subset for e in b for a in (e[0], e[2])}
    for a in agents:
        if a in seeds or kinds[a - 1] != "AND":
            continue
        own = selection.live_edges(a)
        # an AND agent with an empty layer can never satisfy every layer
        if len(own) < selection.m or any(e not in edges for e in own):
            return False
    return True


def _any_feasible_subset(branches, kinds, selection, seeds) -> bool:
    """Check every nonempty branch subset at once with bitmask unions.

    Live edge ``(i, k, .)`` is bit ``(i - 1) * m + k``; agent ``i`` is bit ``i - 1``.
    ``E[s]`` and ``V[s]`` are the unions over the branches in subset ``s``.
    """
    m = selection.m
    wide = selection.n * m > 63
    dtype = object if wide else np.uint64

    def bit(b: int):
        return (1 << b) if wide else np.uint64(1 << b)

    E = np.zeros(1, dtype=dtype)
    V = np.zeros(1, dtype=dtype)
    for b in branches:
        em, vm = 0, 0
        for i, k, j in b:
            em |= 1 << ((i - 1) * m + k)
            vm |= (1 << (i - 1)) | (1 << (j - 1))
        em = em if wide else np.uint64(em)
        vm = vm if wide else np.uint64(vm)
        E = np.concatenate([E, E | em])
        V = np.concatenate([V, V | vm])
    ok = np.ones(len(E), dtype=bool)
    ok[0] = False  # the empty subset
    zero = 0 if wide else np.uint64(0)
    for a in range(1, selection.n + 1):
        if a in seeds or kinds[a - 1] != "AND":
            continue
        own = selection.live_edges(a)
        touches = (V & bit(a - 1)) != zero
        if len(own) < m:
            ok &= ~touches
            continue
        req = 0
        for i, k, _ in own:
            req |= 1 << ((i - 1) * m + k)
        req = req if wide else np.uint64(req)
        ok &= ~touches | ((E & req) == req)
    return bool(ok.any())


def is_U_reachable_tree(
    tree: LiveEdgeTree,
    protocols: ProtocolLike | Iterable[ProtocolLike],
    method: str = "subsets",
    max_branches: int = DEFAULT_BRANCH_CAP,
) -> bool:
    """Does some nonempty branch subset satisfy every AND agent it touches?

    ``method="subsets"`` tries every subset (at most ``2**max_branches``).
    ``method="closure"`` uses that feasible subsets are closed under union:
    it repeatedly drops branches through an AND agent whose live edges are not
    all covered, leaving the largest feasible subset. ``"auto"`` picks subsets
    when the tree is small enough.
    """
    sel = tree.selection
    kinds = _or_and(protocol_sequence(protocols, sel.n, sel.m), sel.m)
    branches = tree.branches()
    if not branches:
        return False
    if method == "auto":
        method = "subsets" if len(branches) <= max_branches else "closure"
    if method == "subsets":
        if len(branches) > max_branches:
            raise CapacityError(
                f"live-edge tree has {len(branches)} branches; subset search is capped at {max_branches}"
            )
        return _any_feasible_subset(branches, kinds, sel, tree.seeds)
    if method == "closure":
        current = list(branches)
        while current:
            edges = {e for b in current for e in b}
            keep = []
            for b in current:
                ok = True
                for a in {e[0] for e in b}:
                    if kinds[a - 1] != "AND" or a in tree.seeds:
                        continue
                    own = sel.live_edges(a)
                    if len(own) < sel.m or any(e not in edges for e in own):
                        ok = False
                        break
                if ok:
                    keep.append(b)
            if len(keep) == len(current):
                return True
            current = keep
        return False
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# exact probabilities


class _Plan:
    """Enumeration plan restricted to agents that can reach a seed.

    Agents with no projected path to a seed are never reachable and do not
    influence anyone else's reachability, so their live edges are summed out;
    options pointing at such agents are merged into one dead option.
    """

    def __init__(self, network: MultiplexNetwork, seeds: frozenset[int]):
        n, m = network.n, network.m
        self.n, self.m = n, m
        sensed_by: dict[int, set[int]] = {i: set() for i in network.agents}
        for layer in network.layers:
            for i, j, _ in layer.edges:
                sensed_by[j].add(i)
        live = set(seeds)
        frontier = list(seeds)
        while frontier:
            j = frontier.pop()
            for i in sensed_by[j]:
                if i not in live:
                    live.add(i)
                    frontier.append(i)
        self.relevant = live
        dead = n  # dummy column, never reachable
        self.fixed = np.full((n, m), dead, dtype=np.int64)
        self.slots: list[tuple[int, int]] = []
        self.opt_targets: list[np.ndarray] = []
        self.opt_weights: list[np.ndarray] = []
        for i in network.agents:
            if i in seeds or i not in live:
                continue
            for k, layer in enumerate(network.layers):
                edges = layer.out_edges(i)
                if not edges:
                    continue
                targets, weights, dead_w = [], [], 0.0
                for j, w in edges:
                    if j in live:
                        targets.append(j - 1)
                        weights.append(w)
                    else:
                        dead_w += w
                if dead_w > 0:
                    targets.append(dead)
                    weights.append(dead_w)
                if len(targets) == 1:
                    self.fixed[i - 1, k] = targets[0]
                    continue
                self.slots.append((i - 1, k))
                self.opt_targets.append(np.array(targets, dtype=np.int64))
                self.opt_weights.append(np.array(weights, dtype=np.float64))
        self.radices = [len(t) for t in self.opt_targets]
        self.count = math.prod(self.radices)

    def chunk(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(start, stop, dtype=np.int64)
        C = stop - start
        tgt = np.broadcast_to(self.fixed, (C, self.n, self.m)).copy()
        q = np.ones(C)
        for s in range(len(self.slots) - 1, -1, -1):
            r = self.radices[s]
            digit = idx % r
            idx //= r
            i, k = self.slots[s]
            tgt[:, i, k] = self.opt_targets[s][digit]
            q *= self.opt_weights[s][digit]
        return tgt, q


def _lane_masks(batch: Sequence[Sequence[str]], n: int) -> tuple[np.ndarray, np.ndarray]:
    or_mask = np.zeros(n, dtype=np.uint64)
    and_mask = np.zeros(n, dtype=np.uint64)
    for lane, kinds in enumerate(batch):
        bit = np.uint64(1) << np.uint64(lane)
        for i, kind in enumerate(kinds):
            if kind == "OR":
                or_mask[i] |= bit
            else:
                and_mask[i] |= bit
    return or_mask, and_mask


def _reach_lanes(tgt: np.ndarray, seed_idx: np.ndarray, or_mask, and_mask, n: int) -> np.ndarray:
    C, _, m = tgt.shape
    reach = np.zeros((C, n + 1), dtype=np.uint64)
    reach[:, seed_idx] = _ALL
    for _ in range(n):
        hits = [np.take_along_axis(reach, tgt[:, :, k], axis=1) for k in range(m)]
        any_hit, all_hit = hits[0].copy(), hits[0].copy()
        for h in hits[1:]:
            any_hit |= h
            all_hit &= h
        new = reach[:, :n] | (any_hit & or_mask) | (all_hit & and_mask)
        if np.array_equal(new, reach[:, :n]):
            break
        reach[:, :n] = new
    return reach[:, :n]


def exact_probabilities_batch(
    network: MultiplexNetwork,
    protocol_list: Sequence[ProtocolLike | Iterable[ProtocolLike]],
    seeds: Iterable[int],
    cap: int | None = None,
    chunk: int = _CHUNK,
) -> list[ReachabilityResult]:
    """Exact reachability probabilities for several protocol sequences at once.

    Each selection is enumerated once; up to 64 sequences are evaluated in
    parallel as bit lanes of a ``uint64`` per agent.
    """
    seeds = validate_seeds(seeds, network.n)
    n, m = network.n, network.m
    kinds_list = [_or_and(protocol_sequence(p, n, m), m) for p in protocol_list]
    plan = _Plan(network, seeds)
    _check_cap(plan.count, cap)
    seed_idx = np.array(sorted(s - 1 for s in seeds), dtype=np.int64)
    results: list[ReachabilityResult] = []
    for b0 in range(0, len(kinds_list), _LANES):
        batch = kinds_list[b0 : b0 + _LANES]
        L = len(batch)
        or_mask, and_mask = _lane_masks(batch, n)
        partial: list[np.ndarray] = []
        for start in range(0, plan.count, chunk):
            tgt, q = plan.chunk(start, min(start + chunk, plan.count))
            reach = _reach_lanes(tgt, seed_idx, or_mask, and_mask, n)
            bits = np.unpackbits(reach.view(np.uint8).reshape(len(q), n, 8), axis=2, bitorder="little")
            partial.append(np.tensordot(q, bits[:, :, :L].astype(np.float64), axes=(0, 0)))
        stacked = np.stack(partial)  # (chunks, n, L)
        for lane in range(L):
            r = np.array([math.fsum(stacked[:, i, lane]) for i in range(n)])
            r[seed_idx] = 1.0
            r = np.clip(r, 0.0, 1.0)
            results.append(ReachabilityResult(per_agent=r, spread=float(r.sum()), enumerated=plan.count))
    return results


def exact_probabilities(
    network: MultiplexNetwork,
    protocols: ProtocolLike | Iterable[ProtocolLike],
    seeds: Iterable[int],
    cap: int | None = None,
) -> ReachabilityResult:
    """Probability that each agent is reachable (equivalently, active at steady state)."""
    return exact_probabilities_batch(network, [protocols], seeds, cap=cap)[0]


def exact_probabilities_reference(
    network: MultiplexNetwork,
    protocols: ProtocolLike | Iterable[ProtocolLike],
    seeds: Iterable[int],
    cap: int | None = None,
) -> ReachabilityResult:
    """Unoptimized per-selection loop over every selection; slow, for cross-checks."""
    seeds = validate_seeds(seeds, network.n)
    protocols = protocol_sequence(protocols, network.n, network.m)
    sums: list[list[float]] = [[] for _ in range(network.n)]
    count = 0
    for sel in enumerate_selections(network, seeds, cap=cap):
        count += 1
        for i in reachable_set_fixed_point(sel, protocols, seeds):
            sums[i - 1].append(sel.probability)
    r = np.array([math.fsum(s) for s in sums])
    for s in seeds:
        r[s - 1] = 1.0
    return ReachabilityResult(per_agent=r, spread=float(r.sum()), enumerated=count, method="lem-reference")


def cascade_centrality(
    network: MultiplexNetwork,
    protocols: ProtocolLike | Iterable[ProtocolLike],
    j: int,
    cap: int | None = None,
) -> float:
    """Expected number of active agents when ``j`` is the only seed."""
    return exact_probabilities(network, protocols, {j}, cap=cap).spread
