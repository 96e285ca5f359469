"""Reference systems: decimal expansion, Cantor set, Barnsley-Elton, two-vertex planar."""
from __future__ import annotations

from typing import Optional, Sequence

from .graph import DirectedMultigraph
from .system import (
    Box,
    EdgeMap,
    FullSpace,
    HalfSpace,
    MarkovSystem,
    MetricSpace,
    ProbabilityFunction,
)

BUILTIN_NAMES = ("decimal", "cantor", "barnsley_elton", "two_vertex_planar")


def _constant_probs(probs: Optional[Sequence[float]], n: int) -> tuple:
    if probs is None:
        probs = [1.0 / n] * n
    if len(probs) != n:
        raise ValueError(f"expected {n} probabilities, got {len(probs)}")
    return tuple(ProbabilityFunction.constant(p) for p in probs)


def decimal(probs: Optional[Sequence[float]] = None) -> MarkovSystem:
    return MarkovSystem(
        graph=DirectedMultigraph.single_vertex(10),
        space=MetricSpace(1, "L1"),
        regions=(Box([0.0], [1.0]),),
        maps=tuple(EdgeMap([[0.1]], [e / 10]) for e in range(10)),
        probabilities=_constant_probs(probs, 10),
        anchors=[[0.0]],
        declared_rate=0.1,
        bbox=([0.0], [1.0]),
        name="decimal",
    )


def cantor(probs: Optional[Sequence[float]] = None) -> MarkovSystem:
    return MarkovSystem(
        graph=DirectedMultigraph.single_vertex(2),
        space=MetricSpace(1, "L1"),
        regions=(Box([0.0], [1.0]),),
        maps=(EdgeMap([[1 / 3]], [0.0]), EdgeMap([[1 / 3]], [2 / 3])),
        probabilities=_constant_probs(probs, 2),
        anchors=[[0.0]],
        declared_rate=1 / 3,
        bbox=([0.0], [1.0]),
        name="cantor",
    )


def barnsley_elton() -> MarkovSystem:
    return MarkovSystem(
        graph=DirectedMultigraph.single_vertex(2),
        space=MetricSpace(1, "L1"),
        regions=(FullSpace(),),
        maps=(EdgeMap([[0.5]], [0.0]), EdgeMap([[-2.0]], [3.0])),
        probabilities=_constant_probs([0.75, 0.25], 2),
        anchors=[[0.0]],
        declared_rate=7 / 8,
        name="barnsley_elton",
    )


def two_vertex_planar() -> MarkovSystem:
    """Planar system on ``y >= 1/2`` and ``y <= -1/2`` with the L1 norm.

    Edge ids 0, 1, 2 run ``K_1 -> K_2``, ``K_1 -> K_1`` and ``K_2 -> K_1``.
    """
    graph = DirectedMultigraph(2, ((1, 2), (1, 1), (2, 1)))
    maps = (
        EdgeMap([[-0.5, 0.0], [0.0, -1.5]], [-1.0, 0.25]),
        EdgeMap([[-1.5, 0.0], [0.0, 0.25]], [1.0, 0.375]),
        EdgeMap([[-0.5, 0.0], [0.0, -0.75]], [1.0, 0.125], pre_abs=(True, False)),
    )
    probs = (
        ProbabilityFunction("sin2", 53 / 105, 1 / 15),
        ProbabilityFunction("cos2", 3 / 7, 1 / 15),
        ProbabilityFunction.constant(1.0),
    )
    return MarkovSystem(
        graph=graph,
        space=MetricSpace(2, "L1"),
        regions=(HalfSpace([0.0, 1.0], 0.5, "ge"), HalfSpace([0.0, 1.0], -0.5, "le")),
        maps=maps,
        probabilities=probs,
        anchors=[[0.0, 1.0], [0.0, -1.0]],
        declared_rate=209 / 210,
        name="two_vertex_planar",
    )


def builtin(name: str, probs: Optional[Sequence[float]] = None) -> MarkovSystem:
    if name == "decimal":
        return decimal(probs)
    if name == "cantor":
        return cantor(probs)
    if probs is not None:
        raise ValueError(f"built-in {name!r} has fixed probabilities")
    if name == "barnsley_elton":
        return barnsley_elton()
    if name == "two_vertex_planar":
        return two_vertex_planar()
    raise KeyError(f"unknown built-in system {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def deterministic_halving() -> MarkovSystem:
    """Single map ``x -> x/2`` on ``[-1, 1]`` with probability one."""
    return MarkovSystem(
        graph=DirectedMultigraph.single_vertex(1),
        space=MetricSpace(1, "L1"),
        regions=(Box([-1.0], [1.0]),),
        maps=(EdgeMap([[0.5]], [0.0]),),
        probabilities=(ProbabilityFunction.constant(1.0),),
        anchors=[[1.0]],
        declared_rate=0.5,
        bbox=([-1.0], [1.0]),
        name="halving",
    )
