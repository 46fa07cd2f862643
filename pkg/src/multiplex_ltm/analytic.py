"""Network families with closed-form cascade results, and the formulas themselves.

Families
--------
``repeated-path``       duplex whose two layers are both the undirected path 1..N
``permutation-duplex``  duplex whose layers are the cycle 1..N minus {1, N} and
                        minus {N-1, N}; layer 2 is the path N-1, ..., 1, N
``path`` / ``cycle``    monoplex path and cycle
``random-duplex-dag``   agent j senses each i < j independently in each layer
                        with probability p_e, so agent 1 senses no one

Formulas are offered in two forms. ``form="printed"`` evaluates the
closed forms as stated. ``form="corrected"`` gives the values the
exact engine produces; see the function docstrings for where they differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NetworkValidationError
from .network import MultiplexNetwork

FAMILIES = ("repeated-path", "permutation-duplex", "path", "cycle", "random-duplex-dag")


@dataclass(frozen=True)
class FamilySpec:
    family: str
    N: int
    p_e: float | None = None
    seed: int | None = None
    m: int = 2  # layers, random family only

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise NetworkValidationError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise NetworkValidationError("N must be a positive integer")
        if self.family != "random-duplex-dag" and self.N < 3:
            raise NetworkValidationError(f"{self.family} needs N >= 3")
        if self.family == "permutation-duplex" and self.N < 4:
            raise NetworkValidationError("permutation-duplex needs N >= 4")
        if self.family == "random-duplex-dag":
            if self.p_e is None or not 0.0 <= self.p_e <= 1.0:
                raise NetworkValidationError("random-duplex-dag needs p_e in [0, 1]")
            if self.m < 1:
                raise NetworkValidationError("m must be positive")


def _undirected(order: Sequence[int]) -> list[tuple[int, int]]:
    edges = []
    for a, b in zip(order, order[1:]):
        edges += [(a, b), (b, a)]
    return edges


def path_order(N: int) -> list[int]:
    return list(range(1, N + 1))


def repeated_path(N: int) -> MultiplexNetwork:
    e = _undirected(path_order(N))
    return MultiplexNetwork.from_edge_lists(N, [e, e])


def permutation_duplex(N: int) -> MultiplexNetwork:
    layer1 = _undirected(path_order(N))
    layer2 = _undirected(list(range(N - 1, 0, -1)) + [N])
    return MultiplexNetwork.from_edge_lists(N, [layer1, layer2])


def path_network(N: int) -> MultiplexNetwork:
    return MultiplexNetwork.from_edge_lists(N, [_undirected(path_order(N))])


def cycle_network(N: int) -> MultiplexNetwork:
    return MultiplexNetwork.from_edge_lists(N, [_undirected(path_order(N) + [1])])


def random_duplex_dag_from_uniforms(uniforms: np.ndarray, p_e: float) -> MultiplexNetwork:
    """DAG with edge ``j -> i`` (j senses i, i < j) in layer k iff ``uniforms[k, j-1, i-1] < p_e``.

    Sharing ``uniforms`` across several ``p_e`` gives nested networks.
    """
    m, n, _ = uniforms.shape
    layers = []
    for k in range(m):
        layers.append([(j, i) for j in range(2, n + 1) for i in range(1, j) if uniforms[k, j - 1, i - 1] < p_e])
    return MultiplexNetwork.from_edge_lists(n, layers)


def random_duplex_dag(n: int, p_e: float, rng: np.random.Generator | int | None = None, m: int = 2) -> MultiplexNetwork:
    rng = np.random.default_rng(rng)
    return random_duplex_dag_from_uniforms(rng.random((m, n, n)), p_e)


def generate(spec: FamilySpec) -> MultiplexNetwork:
    if spec.family == "repeated-path":
        return repeated_path(spec.N)
    if spec.family == "permutation-duplex":
        return permutation_duplex(spec.N)
    if spec.family == "path":
        return path_network(spec.N)
    if spec.family == "cycle":
        return cycle_network(spec.N)
    return random_duplex_dag(spec.N, spec.p_e, spec.seed, spec.m)


# ---------------------------------------------------------------------------
# closed forms

_P0 = {"OR": 0.75, "AND": 0.25, "projection": 0.5}


def _geom(p: float, lo: int, hi: int) -> float:
    return sum(p**l for l in range(lo, hi + 1))


def h(p0: float, N: int, j: int, form: str = "printed") -> float:
    """Cascade centrality of agent ``j`` on a path where each step succeeds with ``p0``.

    End agents of the path have a single neighbor and activate surely once it
    is active. The stated interior case sums the left half up to ``j - 1``
    with a trailing ``p0**(j-1)``; the exact value uses ``j - 2``, which is
    what makes the expression symmetric under ``j -> N + 1 - j`` and agree
    with the near-end case at ``j = 2``. ``form="corrected"`` uses ``j - 2``.
    """
    if N < 3:
        raise ValueError("N must be at least 3")
    if not 1 <= j <= N:
        raise ValueError(f"j={j} outside 1..{N}")
    if form not in ("printed", "corrected"):
        raise ValueError(f"unknown form {form!r}")
    if j in (1, N):
        return _geom(p0, 0, N - 2) + p0 ** (N - 2)
    if j in (2, N - 1):
        return 1 + _geom(p0, 0, N - 3) + p0 ** (N - 3)
    left = j - 1 if form == "printed" else j - 2
    return _geom(p0, 0, left) + p0**left + _geom(p0, 1, N - j - 1) + p0 ** (N - j - 1)


def repeated_path_centrality(N: int, j: int, variant: str, form: str = "printed") -> float:
    """``h_j`` at 0.75 (OR), 0.25 (AND) or 0.5 (the monoplex projection)."""
    key = {"or": "OR", "and": "AND", "projection": "projection", "proj": "projection"}.get(variant.lower())
    if key is None:
        raise ValueError(f"unknown variant {variant!r}; expected OR, AND or projection")
    return h(_P0[key], N, j, form)


def permutation_domain(N: int) -> list[tuple[int, int]]:
    """Pairs ``(i, j)`` covered by the closed forms: agent ``i``, seed ``j``."""
    return [
        (i, j) for i in range(3, N - 2) for j in list(range(2, i - 1)) + list(range(i + 2, N - 1))
    ]


def permutation_probability(N: int, i: int, j: int, variant: str, form: str = "printed") -> float:
    """Activation probability of agent ``i`` with seed ``j`` on the permutation duplex.

    ``variant="cycle"`` is the monoplex cycle the duplex projects to. The
    stated OR expression subtracts ``0.5 * 0.75**(N-5)``; enumeration gives
    ``0.25 * 0.75**(N-5)`` for every in-domain pair, which ``form="corrected"``
    uses. The AND and cycle expressions need no correction.
    """
    if N < 6:
        raise ValueError("closed forms need N >= 6")
    if (i, j) not in permutation_domain(N):
        raise ValueError(
            f"(i={i}, j={j}) is outside the closed-form domain for N={N}; use the exact engine for this pair"
        )
    if form not in ("printed", "corrected"):
        raise ValueError(f"unknown form {form!r}")
    d = abs(i - j)
    v = variant.lower()
    if v == "or":
        tail = 0.5 if form == "printed" else 0.25
        return 0.75**d + 0.5 * 0.75 ** (N - d - 3) - tail * 0.75 ** (N - 5)
    if v == "and":
        return 0.25**d
    if v in ("cycle", "projection", "proj"):
        return 0.5**d + 0.5 ** (N - d)
    raise ValueError(f"unknown variant {variant!r}; expected OR, AND or cycle")
