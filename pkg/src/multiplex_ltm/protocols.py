"""Agent protocols: OR, AND and the general threshold rule.

An agent using ``Threshold(delta)`` activates once the fraction of layers
giving it a positive input is at least ``delta``; OR and AND are the two
limiting cases ``delta = 1/m`` and ``delta = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import NetworkValidationError, UnsupportedProtocolError

_DELTA_TOL = 1e-12


@dataclass(frozen=True)
class Protocol:
    kind: str  # "OR", "AND" or "THRESHOLD"
    delta: float | None = None

    def required_layers(self, m: int) -> int:
        """Smallest number of positive layers that activates the agent."""
        if self.kind == "OR":
            return 1
        if self.kind == "AND":
            return m
        # same comparison as the update rule: count/m >= delta
        for a in range(1, m + 1):
            if a / m >= self.delta:
                return a
        return m

    def classify(self, m: int) -> str:
        """Reduce to "OR" or "AND" for backends that only know those two.

        Raises UnsupportedProtocolError for intermediate thresholds.
        """
        a = self.required_layers(m)
        if a == 1:
            return "OR"
        if a == m:
            return "AND"
        raise UnsupportedProtocolError(
            f"threshold protocol delta={self.delta} needs {a} of {m} layers; "
            "only OR (1 layer) and AND (all layers) are supported by this backend"
        )

    def to_json(self) -> Union[str, float]:
        return self.kind if self.kind != "THRESHOLD" else self.delta

    def __str__(self) -> str:
        return self.kind if self.kind != "THRESHOLD" else f"Threshold({self.delta:g})"


OR = Protocol("OR")
AND = Protocol("AND")


def Threshold(delta: float) -> Protocol:
    return Protocol("THRESHOLD", float(delta))


ProtocolLike = Union[Protocol, str, float, int]


def as_protocol(entry: ProtocolLike, m: int) -> Protocol:
    if isinstance(entry, Protocol):
        p = entry
    elif isinstance(entry, str):
        key = entry.strip().upper()
        if key not in ("OR", "AND"):
            raise NetworkValidationError(f"unknown protocol {entry!r}; expected OR, AND or a number")
        p = OR if key == "OR" else AND
    elif isinstance(entry, (int, float)) and not isinstance(entry, bool):
        p = Threshold(entry)
    else:
        raise NetworkValidationError(f"unknown protocol entry {entry!r}")
    if p.kind == "THRESHOLD":
        d = p.delta
        if not (1.0 / m - _DELTA_TOL <= d <= 1.0 + _DELTA_TOL):
            raise NetworkValidationError(f"delta={d} outside [1/m, 1] for m={m}")
    return p


def protocol_sequence(entries: Union[ProtocolLike, Iterable[ProtocolLike]], n: int, m: int) -> tuple[Protocol, ...]:
    """Validate a length-n protocol sequence.

    A single protocol (or "OR"/"AND") is broadcast to every agent.
    """
    if isinstance(entries, (Protocol, str, int, float)) and not isinstance(entries, bool):
        entries = [entries] * n
    seq = tuple(as_protocol(e, m) for e in entries)
    if len(seq) != n:
        raise NetworkValidationError(f"protocol sequence has length {len(seq)}, expected {n}")
    return seq


def from_and_set(and_agents: Iterable[int], n: int) -> tuple[Protocol, ...]:
    """Sequence where the given 1-based agents use AND and the rest OR."""
    chosen = set(and_agents)
    return tuple(AND if i in chosen else OR for i in range(1, n + 1))


def and_set(protocols: Sequence[Protocol], m: int) -> frozenset[int]:
    """1-based agents that behave as AND (explicitly, or via delta with m > 1)."""
    return frozenset(
        i + 1
        for i, p in enumerate(protocols)
        if p.kind == "AND" or (p.kind == "THRESHOLD" and m > 1 and p.required_layers(m) == m)
    )
