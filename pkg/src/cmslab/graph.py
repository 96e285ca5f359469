"""Directed multigraphs, code windows and admissibility."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

MAX_ENUMERATION = 10**7


class StructuralError(ValueError):
    """An edge id or vertex id does not exist in the graph."""


class CapacityError(RuntimeError):
    """Enumeration would exceed ``MAX_ENUMERATION`` words."""


@dataclass(frozen=True)
class DirectedMultigraph:
    """Graph ``(V, E, i, t)`` with vertices ``1..N`` and edges ``0..|E|-1``.

    ``edges[e] == (i(e), t(e))``. Parallel edges and loops are allowed.
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.vertex_count < 1:
            raise StructuralError("vertex_count must be positive")
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        if not edges:
            raise StructuralError("graph needs at least one edge")
        for e, (a, b) in enumerate(edges):
            if not (1 <= a <= self.vertex_count and 1 <= b <= self.vertex_count):
                raise StructuralError(
                    f"edge {e} = ({a}, {b}) has a vertex outside 1..{self.vertex_count}"
                )

    @classmethod
    def single_vertex(cls, n_edges: int) -> "DirectedMultigraph":
        return cls(1, tuple((1, 1) for _ in range(n_edges)))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def initial(self, e: int) -> int:
        self.check_edge(e)
        return self.edges[e][0]

    def terminal(self, e: int) -> int:
        self.check_edge(e)
        return self.edges[e][1]

    def out_edges(self, vertex: int) -> list[int]:
        return [e for e, (a, _) in enumerate(self.edges) if a == vertex]

    def check_edge(self, e: int) -> None:
        if not (0 <= int(e) < len(self.edges)):
            raise StructuralError(f"edge id {e} not in 0..{len(self.edges) - 1}")


@dataclass(frozen=True)
class CodeWindow:
    """Finite block ``(sigma_m, ..., sigma_n)`` of a two-sided code sequence.

    Symbols are stored in chronological order, ``symbols[0]`` sits at
    ``start_index``. The window ending at index 0 has ``start_index == 1 - len``.
    """

    start_index: int
    symbols: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if not self.symbols:
            raise ValueError("code window needs at least one symbol")

    @classmethod
    def ending_at_zero(cls, symbols: Iterable[int]) -> "CodeWindow":
        symbols = tuple(symbols)
        return cls(1 - len(symbols), symbols)

    @property
    def end_index(self) -> int:
        return self.start_index + len(self.symbols) - 1

    def __len__(self) -> int:
        return len(self.symbols)

    def label(self) -> str:
        return "-".join(str(s) for s in self.symbols)


def _symbols(w: CodeWindow | Sequence[int]) -> tuple[int, ...]:
    return w.symbols if isinstance(w, CodeWindow) else tuple(int(s) for s in w)


def is_admissible(g: DirectedMultigraph, w: CodeWindow | Sequence[int]) -> bool:
    """True iff ``t(sigma_k) == i(sigma_{k+1})`` for consecutive symbols."""
    symbols = _symbols(w)
    for s in symbols:
        g.check_edge(s)
    return all(g.edges[a][1] == g.edges[b][0] for a, b in zip(symbols, symbols[1:]))


def enumerate_words(
    g: DirectedMultigraph, length: int, admissible_only: bool = False, start_index: int = 0
) -> list[CodeWindow]:
    """All words of ``length`` symbols in lexicographic order."""
    if length < 1:
        raise ValueError("length must be positive")
    if g.edge_count**length > MAX_ENUMERATION:
        raise CapacityError(
            f"{g.edge_count}^{length} words exceeds the enumeration guard {MAX_ENUMERATION}"
        )
    if not admissible_only:
        return [
            CodeWindow(start_index, word)
            for word in itertools.product(range(g.edge_count), repeat=length)
        ]
    # extend admissible prefixes only; output stays lexicographic
    words: list[tuple[int, ...]] = [(e,) for e in range(g.edge_count)]
    for _ in range(length - 1):
        words = [
            w + (e,)
            for w in words
            for e in range(g.edge_count)
            if g.edges[w[-1]][1] == g.edges[e][0]
        ]
    return [CodeWindow(start_index, w) for w in words]
