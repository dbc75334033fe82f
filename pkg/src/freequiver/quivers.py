"""Quivers, their free path categories, and relation presentations.

A quiver is a finite directed multigraph. Its free category has the vertices
as objects and all finite paths as morphisms; the empty path at a vertex is
that vertex's identity morphism.

Paths store their arcs in application order (first arc applied first) but are
rendered right-to-left, matching function-composition notation: the path
[x, y] (x applied first) renders as "y x".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence


@dataclass(frozen=True)
class Arc:
    name: str
    src: str
    dst: str


@dataclass(frozen=True)
class Quiver:
    """Ordered vertices and arcs. Construction does not validate; call
    validate_quiver to collect violations (empty list == valid)."""

    vertices: tuple[str, ...]
    arcs: tuple[Arc, ...]

    def __init__(self, vertices: Sequence[str], arcs: Sequence):
        object.__setattr__(self, "vertices", tuple(vertices))
        object.__setattr__(
            self, "arcs", tuple(a if isinstance(a, Arc) else Arc(*a) for a in arcs)
        )

    def arc(self, name: str) -> Arc:
        for a in self.arcs:
            if a.name == name:
                return a
        raise KeyError(f"no arc named {name!r}")

    def has_arc(self, name: str) -> bool:
        return any(a.name == name for a in self.arcs)

    def arc_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.arcs)

    def arc_index(self, name: str) -> int:
        for i, a in enumerate(self.arcs):
            if a.name == name:
                return i
        raise KeyError(f"no arc named {name!r}")


def validate_quiver(q: Quiver) -> list[str]:
    """Return every invariant violation found (empty list means valid).

    Checked: at least one vertex, unique vertex names, unique arc names, and
    no dangling endpoint (every arc's src/dst is a declared vertex).
    """
    problems: list[str] = []
    if len(q.vertices) == 0:
        problems.append("quiver must have at least one vertex")
    seen: set[str] = set()
    for v in q.vertices:
        if v in seen:
            problems.append(f"duplicate name: vertex {v!r}")
        seen.add(v)
    vertex_set = set(q.vertices)
    seen_arcs: set[str] = set()
    for a in q.arcs:
        if a.name in seen_arcs:
            problems.append(f"duplicate name: arc {a.name!r}")
        seen_arcs.add(a.name)
        if a.src not in vertex_set:
            problems.append(f"dangling endpoint: arc {a.name!r} has src {a.src!r}")
        if a.dst not in vertex_set:
            problems.append(f"dangling endpoint: arc {a.name!r} has dst {a.dst!r}")
    return problems


def check_quiver(q: Quiver) -> Quiver:
    """Raise ValueError listing all violations; return q unchanged if valid."""
    problems = validate_quiver(q)
    if problems:
        raise ValueError("invalid quiver: " + "; ".join(problems))
    return q


@dataclass(frozen=True)
class Path:
    """A morphism of the free category: arcs in application order plus the
    endpoints. The empty arc sequence is the identity at src == dst."""

    arcs: tuple[str, ...]
    src: str
    dst: str

    def __init__(self, arcs: Sequence[str], src: str, dst: str):
        object.__setattr__(self, "arcs", tuple(arcs))
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)

    @property
    def is_identity(self) -> bool:
        return len(self.arcs) == 0

    def __len__(self) -> int:
        return len(self.arcs)


def identity_path(vertex: str) -> Path:
    return Path((), vertex, vertex)


def path_of(q: Quiver, arc_names: Sequence[str], at: str | None = None) -> Path:
    """Build a Path over q from arc names in application order, checking that
    consecutive arcs compose. `at` anchors the identity path (required only
    for an empty arc list)."""
    names = tuple(arc_names)
    if not names:
        if at is None:
            raise ValueError("identity path needs an anchor vertex")
        if at not in q.vertices:
            raise ValueError(f"unknown vertex {at!r}")
        return identity_path(at)
    arcs = [q.arc(n) for n in names]
    for k in range(len(arcs) - 1):
        if arcs[k].dst != arcs[k + 1].src:
            raise ValueError(
                f"arcs do not compose: {arcs[k].name!r} ends at {arcs[k].dst!r} "
                f"but {arcs[k + 1].name!r} starts at {arcs[k + 1].src!r}"
            )
    return Path(names, arcs[0].src, arcs[-1].dst)


def check_path(q: Quiver, p: Path) -> None:
    """Raise ValueError unless p is a valid path of q."""
    rebuilt = path_of(q, p.arcs, at=p.src if p.is_identity else None)
    if (rebuilt.src, rebuilt.dst) != (p.src, p.dst):
        raise ValueError(
            f"path endpoints ({p.src!r}, {p.dst!r}) disagree with its arcs "
            f"({rebuilt.src!r}, {rebuilt.dst!r})"
        )


def compose_paths(p: Path, r: Path) -> Path:
    """Concatenate p then r (p applied first); rendered right-to-left as r∘p."""
    if p.dst != r.src:
        raise ValueError(
            f"non-composable endpoints: first path ends at {p.dst!r}, "
            f"second starts at {r.src!r}"
        )
    return Path(p.arcs + r.arcs, p.src, r.dst)


def is_parallel(p: Path, r: Path) -> bool:
    return p.src == r.src and p.dst == r.dst


def render_path(p: Path) -> str:
    """Right-to-left rendering: last-applied arc leftmost. Identity renders
    as id_<vertex>."""
    if p.is_identity:
        return f"id_{p.src}"
    return " ".join(reversed(p.arcs))


def enumerate_paths(q: Quiver, src: str, dst: str, max_len: int) -> list[Path]:
    """All paths src→dst of length ≤ max_len, in lexicographic order by arc
    index sequence (so the identity, when present, comes first)."""
    if src not in q.vertices or dst not in q.vertices:
        raise ValueError(f"unknown vertex in ({src!r}, {dst!r})")
    by_src: dict[str, list[Arc]] = {v: [] for v in q.vertices}
    for a in q.arcs:  # quiver order == index order, so this stays lexicographic
        by_src[a.src].append(a)

    out: list[Path] = []

    def walk(prefix: list[str], here: str) -> None:
        if here == dst:
            out.append(Path(tuple(prefix), src, dst))
        if len(prefix) == max_len:
            return
        for a in by_src[here]:
            prefix.append(a.name)
            walk(prefix, a.dst)
            prefix.pop()

    walk([], src)
    return out


@dataclass(frozen=True)
class RelationPresentation:
    """A quiver plus parallel-path relations lhs == rhs, for index categories
    that are not free (group presentations, etc.)."""

    quiver: Quiver
    relations: tuple[tuple[Path, Path], ...] = field(default=())

    def __init__(self, quiver: Quiver, relations: Sequence[tuple[Path, Path]]):
        object.__setattr__(self, "quiver", quiver)
        object.__setattr__(self, "relations", tuple(tuple(r) for r in relations))
        for lhs, rhs in self.relations:
            check_path(quiver, lhs)
            check_path(quiver, rhs)
            if not is_parallel(lhs, rhs):
                raise ValueError(
                    f"relation sides are not parallel: {render_path(lhs)} "
                    f"({lhs.src}->{lhs.dst}) vs {render_path(rhs)} ({rhs.src}->{rhs.dst})"
                )

    def __iter__(self) -> Iterator[tuple[Path, Path]]:
        return iter(self.relations)


def classical_embed(d: int) -> Quiver:
    """One vertex, d loops: the classical free-analysis setting. Arc naming:
    x | x,y | x,y,z for d ≤ 3, else x1..xd."""
    if d < 1:
        raise ValueError("need at least one loop")
    if d == 1:
        names = ["x"]
    elif d == 2:
        names = ["x", "y"]
    elif d == 3:
        names = ["x", "y", "z"]
    else:
        names = [f"x{i}" for i in range(1, d + 1)]
    return Quiver(("u",), tuple(Arc(n, "u", "u") for n in names))
