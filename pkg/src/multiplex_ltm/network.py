"""Multiplex network data model, file ingestion and projection.

Edges follow the sensing convention: an edge ``i -> j`` in layer ``k`` means
agent ``i`` senses agent ``j``, so activity flows from ``j`` to ``i``.
Agents are numbered ``1..n`` in every public interface; layers are indexed
``0..m-1`` in Python and by array position in files.
"""

from __future__ import annotations

import json
from collections import defaultdict
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import NetworkValidationError

WEIGHT_TOL = 1e-9

Edge = tuple[int, int, float]


class LayerGraph:
    """One directed weighted layer over agents ``1..n``."""

    __slots__ = ("n", "edges", "_out")

    def __init__(self, n: int, edges: Iterable[Edge]):
        self.n = int(n)
        self.edges: tuple[Edge, ...] = tuple(sorted((int(i), int(j), float(w)) for i, j, w in edges))
        out: dict[int, list[tuple[int, float]]] = defaultdict(list)
        for i, j, w in self.edges:
            out[i].append((j, w))
        self._out = {i: tuple(v) for i, v in out.items()}

    def out_neighbors(self, i: int) -> tuple[int, ...]:
        return tuple(j for j, _ in self._out.get(i, ()))

    def out_weights(self, i: int) -> tuple[float, ...]:
        return tuple(w for _, w in self._out.get(i, ()))

    def out_edges(self, i: int) -> tuple[tuple[int, float], ...]:
        return self._out.get(i, ())

    def out_degree(self, i: int) -> int:
        return len(self._out.get(i, ()))

    def weight_matrix(self) -> np.ndarray:
        """Dense ``n x n`` matrix ``W[i-1, j-1] = w_ij``."""
        W = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            W[i - 1, j - 1] = w
        return W

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LayerGraph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"LayerGraph(n={self.n}, edges={len(self.edges)})"


class MultiplexNetwork:
    """``m`` layers over a common agent set ``1..n``.

    Construction validates the model invariants: positive weights, no
    self-loops, and per-(agent, layer) out-weights summing to one. Sums within
    ``WEIGHT_TOL`` of one are renormalized exactly.
    """

    __slots__ = ("n", "layers", "names")

    def __init__(self, n: int, layers: Sequence[LayerGraph], names: Sequence[str] | None = None):
        if n < 1:
            raise NetworkValidationError("network needs at least one agent")
        if not layers:
            raise NetworkValidationError("network needs at least one layer")
        fixed = []
        for k, layer in enumerate(layers):
            if layer.n != n:
                raise NetworkValidationError(f"layer {k} has n={layer.n}, expected {n}")
            fixed.append(_checked_layer(n, layer.edges, k))
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != n or len(set(names)) != n:
                raise NetworkValidationError("names must be n distinct strings")
        self.n = int(n)
        self.layers: tuple[LayerGraph, ...] = tuple(fixed)
        self.names: tuple[str, ...] | None = names

    @property
    def m(self) -> int:
        return len(self.layers)

    @property
    def agents(self) -> range:
        return range(1, self.n + 1)

    def out_neighbors(self, i: int, k: int) -> tuple[int, ...]:
        return self.layers[k].out_neighbors(i)

    def has_empty_layer(self, i: int) -> bool:
        return any(layer.out_degree(i) == 0 for layer in self.layers)

    def agent_id(self, ref: int | str) -> int:
        """Resolve an agent id or external name to an id in ``1..n``."""
        if isinstance(ref, bool):
            raise NetworkValidationError(f"invalid agent reference {ref!r}")
        if isinstance(ref, int):
            if not 1 <= ref <= self.n:
                raise NetworkValidationError(f"dangling agent id {ref}; valid ids are 1..{self.n}")
            return ref
        if isinstance(ref, str) and self.names is not None and ref in self.names:
            return self.names.index(ref) + 1
        raise NetworkValidationError(f"unknown agent reference {ref!r}")

    @classmethod
    def from_edge_lists(
        cls,
        n: int,
        layers: Sequence[Iterable[tuple]],
        names: Sequence[str] | None = None,
        undirected: bool = False,
    ) -> "MultiplexNetwork":
        """Build from per-layer lists of ``(i, j)`` or ``(i, j, w)`` tuples.

        Unweighted agent-layers get ``1/out-degree`` weights.
        """
        built = []
        for k, edges in enumerate(layers):
            items = []
            for e in edges:
                if len(e) == 2:
                    items.append((e[0], e[1], None))
                else:
                    items.append((e[0], e[1], e[2]))
            if undirected:
                items = items + [(j, i, w) for i, j, w in items]
            built.append(LayerGraph(n, _assign_weights(n, items, k)))
        return cls(n, built, names)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiplexNetwork):
            return NotImplemented
        return self.n == other.n and self.layers == other.layers and self.names == other.names

    def __hash__(self) -> int:
        return hash((self.n, self.layers, self.names))

    def __repr__(self) -> str:
        return f"MultiplexNetwork(n={self.n}, m={self.m}, edges={[len(g.edges) for g in self.layers]})"


def _assign_weights(n: int, items: list[tuple], k: int) -> list[Edge]:
    groups: dict[int, list[tuple]] = defaultdict(list)
    for i, j, w in items:
        groups[i].append((i, j, w))
    out = []
    for i, group in groups.items():
        given = [w is not None for _, _, w in group]
        if all(given):
            out.extend((a, b, float(w)) for a, b, w in group)
        elif not any(given):
            d = len(group)
            out.extend((a, b, 1.0 / d) for a, b, _ in group)
        else:
            raise NetworkValidationError(
                f"schema violation: agent {i} in layer {k} mixes weighted and unweighted edges"
            )
    return out


def _checked_layer(n: int, edges: Iterable[Edge], k: int) -> LayerGraph:
    seen = set()
    sums: dict[int, float] = defaultdict(float)
    for i, j, w in edges:
        for a in (i, j):
            if not 1 <= a <= n:
                raise NetworkValidationError(f"dangling agent id {a} in layer {k}; valid ids are 1..{n}")
        if i == j:
            raise NetworkValidationError(f"self-loop on agent {i} in layer {k}")
        if (i, j) in seen:
            raise NetworkValidationError(f"duplicate edge {i}->{j} in layer {k}")
        if not w > 0 or not np.isfinite(w):
            raise NetworkValidationError(f"edge {i}->{j} in layer {k} has non-positive weight {w}")
        seen.add((i, j))
        sums[i] += w
    for i, s in sums.items():
        if abs(s - 1.0) > WEIGHT_TOL:
            raise NetworkValidationError(
                f"weight-sum violation: agent {i} in layer {k} has out-weights summing to {s:.12g}"
            )
    # exact renormalization only beyond float noise, so reloading is idempotent
    scale = {i: (s if abs(s - 1.0) > 1e-14 else 1.0) for i, s in sums.items()}
    return LayerGraph(n, ((i, j, w / scale[i]) for i, j, w in edges))


# ---------------------------------------------------------------------------
# documents


def load_network(document: str | Mapping[str, Any]) -> MultiplexNetwork:
    """Parse and validate a network document (JSON text or decoded mapping).

    Schema::

        {"n": 3, "m": 2, "names": ["a", "b", "c"],        # names optional
         "layers": [{"edges": [{"from": 1, "to": 2, "weight": 1.0}, ...],
                     "directed": true}, ...]}                # directed optional

    ``from``/``to`` accept agent ids or names; ``weight`` may be omitted for
    every out-edge of an agent in a layer, giving ``1/out-degree``.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise NetworkValidationError(f"schema violation: not valid JSON ({exc})") from None
    if not isinstance(document, Mapping):
        raise NetworkValidationError("schema violation: network document must be an object")
    n, m, layers = document.get("n"), document.get("m"), document.get("layers")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise NetworkValidationError("schema violation: 'n' must be a positive integer")
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise NetworkValidationError("schema violation: 'm' must be a positive integer")
    if not isinstance(layers, list) or len(layers) != m:
        raise NetworkValidationError(f"schema violation: 'layers' must be a list of m={m} objects")
    names = document.get("names")
    if names is not None and (not isinstance(names, list) or len(names) != n):
        raise NetworkValidationError("schema violation: 'names' must be a list of n strings")
    lookup = {str(s): idx + 1 for idx, s in enumerate(names)} if names else {}

    def resolve(ref: Any) -> int:
        if isinstance(ref, int) and not isinstance(ref, bool):
            return ref
        if isinstance(ref, str) and ref in lookup:
            return lookup[ref]
        raise NetworkValidationError(f"dangling agent reference {ref!r}")

    built = []
    for k, layer in enumerate(layers):
        if not isinstance(layer, Mapping) or not isinstance(layer.get("edges"), list):
            raise NetworkValidationError(f"schema violation: layer {k} needs an 'edges' list")
        directed = layer.get("directed", True)
        items = []
        for e in layer["edges"]:
            if not isinstance(e, Mapping) or "from" not in e or "to" not in e:
                raise NetworkValidationError(f"schema violation: bad edge {e!r} in layer {k}")
            w = e.get("weight")
            if w is not None and (not isinstance(w, (int, float)) or isinstance(w, bool)):
                raise NetworkValidationError(f"schema violation: weight {w!r} is not a number")
            items.append((resolve(e["from"]), resolve(e["to"]), w))
        if not directed:
            items = items + [(j, i, w) for i, j, w in items]
        built.append(LayerGraph(n, _assign_weights(n, items, k)))
    return MultiplexNetwork(n, built, names)


def serialize_network(network: MultiplexNetwork) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "n": network.n,
        "m": network.m,
        "layers": [
            {"edges": [{"from": i, "to": j, "weight": w} for i, j, w in layer.edges]}
            for layer in network.layers
        ],
    }
    if network.names is not None:
        doc["names"] = list(network.names)
    return doc


def read_network(path: str | Path) -> MultiplexNetwork:
    return load_network(Path(path).read_text())


def write_network(network: MultiplexNetwork, path: str | Path) -> None:
    Path(path).write_text(json.dumps(serialize_network(network), indent=2, sort_keys=True) + "\n")


def load_seeds(document: Any, network: MultiplexNetwork) -> frozenset[int]:
    """Seed document: JSON array of agent ids (or names)."""
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    if not isinstance(document, list):
        raise NetworkValidationError("schema violation: seed document must be an array")
    return frozenset(network.agent_id(ref) for ref in document)


def validate_seeds(seeds: Iterable[int], n: int) -> frozenset[int]:
    out = frozenset(int(s) for s in seeds)
    bad = [s for s in out if not 1 <= s <= n]
    if bad:
        raise NetworkValidationError(f"seed ids {sorted(bad)} outside 1..{n}")
    return out


# ---------------------------------------------------------------------------
# projection and structure


def project(network: MultiplexNetwork) -> LayerGraph:
    """Monoplex graph on the union of all layers' edges.

    A single-layer network is returned unchanged. Otherwise each projected
    out-edge gets weight ``1/out-degree`` in the projection; for weighted
    layers this is a modeling choice, not something the union determines.
    """
    if network.m == 1:
        return network.layers[0]
    pairs = sorted({(i, j) for layer in network.layers for i, j, _ in layer.edges})
    deg: dict[int, int] = defaultdict(int)
    for i, _ in pairs:
        deg[i] += 1
    return LayerGraph(network.n, ((i, j, 1.0 / deg[i]) for i, j in pairs))


def projection_network(network: MultiplexNetwork) -> MultiplexNetwork:
    """The projection wrapped as a monoplex network (for running engines on it)."""
    return MultiplexNetwork(network.n, [project(network)], network.names)


def _as_graph(graph: LayerGraph | MultiplexNetwork) -> LayerGraph:
    return project(graph) if isinstance(graph, MultiplexNetwork) else graph


def topological_order(graph: LayerGraph | MultiplexNetwork) -> list[int] | None:
    """Agents ordered so every agent precedes the agents that sense it.

    Returns None when the graph has a cycle.
    """
    g = _as_graph(graph)
    ts = TopologicalSorter({i: set(g.out_neighbors(i)) for i in range(1, g.n + 1)})
    try:
        return list(ts.static_order())
    except CycleError:
        return None


def is_dag(graph: LayerGraph | MultiplexNetwork) -> bool:
    return topological_order(graph) is not None


def is_polytree(graph: LayerGraph | MultiplexNetwork) -> bool:
    """True when the DAG's underlying undirected graph is a forest."""
    g = _as_graph(graph)
    if not is_dag(g):
        return False
    parent = list(range(g.n + 1))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in {tuple(sorted((i, j))) for i, j, _ in g.edges}:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True
