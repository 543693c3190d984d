"""File-level dependency graphs and the eight architectural metrics.

Edges point from a file to the files it depends on. Per file we measure
fan-in, fan-out, the design-rule-hierarchy layer and five butterfly-space
metrics (space size plus width and depth of the upper and lower wings).
The upper wing holds files that transitively depend on the file, the lower
wing the files it transitively depends on.
"""
from __future__ import annotations

import csv
import logging
import re
from collections import deque
from dataclasses import astuple, dataclass, fields
from functools import cached_property
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np

from .records import FeatureSource, FileVector
from .tokenizer import _drop_literal_contents, strip_comments

log = logging.getLogger(__name__)

METRIC_NAMES = ("fan_in", "fan_out", "drh_layer", "space_size",
                "upper_width", "upper_depth", "lower_width", "lower_depth")

_PACKAGE = re.compile(r"^\s*package\s+([\w.]+)\s*;", re.M)
_IMPORT = re.compile(r"^\s*import\s+(static\s+)?([\w.]+?)(\.\*)?\s*;", re.M)
_TYPE_DECL = re.compile(r"\b(?:class|interface|enum|record)\s+([A-Za-z_$][\w$]*)")
_IDENT = re.compile(r"[A-Za-z_$][\w$]*")


class DependencyGraph:
    """Directed file dependency graph; self-loops are dropped."""

    def __init__(self, nodes: Iterable[str] = (), edges: Iterable[tuple[str, str]] = ()):
        self._g = nx.DiGraph()
        self._g.add_nodes_from(nodes)
        for src, dst in edges:
            self._g.add_node(src)
            self._g.add_node(dst)
            if src != dst:
                self._g.add_edge(src, dst)

    @property
    def nodes(self) -> list[str]:
        return sorted(self._g.nodes)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return sorted(self._g.edges)

    def __contains__(self, f) -> bool:
        return f in self._g

    def __len__(self) -> int:
        return self._g.number_of_nodes()

    def _check(self, f: str) -> None:
        if f not in self._g:
            raise KeyError(f"unknown file {f!r}")

    def successors(self, f: str) -> set[str]:
        self._check(f)
        return set(self._g.successors(f))

    def predecessors(self, f: str) -> set[str]:
        self._check(f)
        return set(self._g.predecessors(f))

    @cached_property
    def condensation(self) -> nx.DiGraph:
        """SCC DAG; each node has a ``members`` set, graph attr ``mapping``."""
        return nx.condensation(self._g)

    def component(self, f: str) -> int:
        self._check(f)
        return self.condensation.graph["mapping"][f]

    @cached_property
    def _depths(self) -> tuple[dict[int, int], dict[int, int]]:
        # longest condensation path (in edges) going down / up from each component
        C = self.condensation
        order = list(nx.topological_sort(C))
        down: dict[int, int] = {}
        for c in reversed(order):
            down[c] = max((down[s] + 1 for s in C.successors(c)), default=0)
        up: dict[int, int] = {}
        for c in order:
            up[c] = max((up[p] + 1 for p in C.predecessors(c)), default=0)
        return down, up

    def lower_depth(self, f: str) -> int:
        return self._depths[0][self.component(f)]

    def upper_depth(self, f: str) -> int:
        return self._depths[1][self.component(f)]

    def upper_wing(self, f: str) -> set[str]:
        self._check(f)
        return nx.ancestors(self._g, f) - {f}

    def lower_wing(self, f: str) -> set[str]:
        self._check(f)
        return nx.descendants(self._g, f) - {f}

    def relabel(self, mapping: dict[str, str]) -> "DependencyGraph":
        return DependencyGraph((mapping[n] for n in self._g.nodes),
                               ((mapping[a], mapping[b]) for a, b in self._g.edges))


@dataclass(frozen=True)
class ArchMetrics:
    file_id: str
    fan_in: int
    fan_out: int
    drh_layer: int
    space_size: int
    upper_width: int
    upper_depth: int
    lower_width: int
    lower_depth: int

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self)[1:], dtype=np.float64)


def fan_in(G: DependencyGraph, f: str) -> int:
    return len(G.predecessors(f))


def fan_out(G: DependencyGraph, f: str) -> int:
    return len(G.successors(f))


def drh_layers(G: DependencyGraph) -> dict[str, int]:
    """Layer 1 holds components that depend on nothing; dependents sit lower."""
    # a component's layer is one more than the longest dependency chain below it
    return {f: G.lower_depth(f) + 1 for f in G.nodes}


def _max_level_width(start: str, nbrs) -> int:
    dist = {start: 0}
    per_level: dict[int, int] = {}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in nbrs(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                per_level[dist[v]] = per_level.get(dist[v], 0) + 1
                queue.append(v)
    return max(per_level.values(), default=0)


def butterfly_metrics(G: DependencyGraph, f: str, layers: dict[str, int] | None = None) -> ArchMetrics:
    """All eight metrics of ``f``.

    Width is the largest number of wing files sharing one shortest-path
    distance from ``f``; depth is the longest path on the SCC condensation.
    """
    G._check(f)
    upper, lower = G.upper_wing(f), G.lower_wing(f)
    if layers is None:
        layers = drh_layers(G)
    return ArchMetrics(
        file_id=f,
        fan_in=fan_in(G, f),
        fan_out=fan_out(G, f),
        drh_layer=layers[f],
        space_size=len({f} | upper | lower),
        upper_width=_max_level_width(f, G._g.predecessors),
        upper_depth=G.upper_depth(f),
        lower_width=_max_level_width(f, G._g.successors),
        lower_depth=G.lower_depth(f),
    )


def all_metrics(G: DependencyGraph) -> list[ArchMetrics]:
    layers = drh_layers(G)
    return [butterfly_metrics(G, f, layers) for f in G.nodes]


def arch_features(G: DependencyGraph, labels: dict[str, int] | None = None) -> list[FileVector]:
    """One 8-value vector per file in :data:`METRIC_NAMES` order."""
    labels = labels or {}
    return [FileVector(m.file_id, m.as_array(), FeatureSource.ARCH, labels.get(m.file_id))
            for m in all_metrics(G)]


def write_metrics_csv(G: DependencyGraph, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", *METRIC_NAMES])
        for m in all_metrics(G):
            writer.writerow(astuple(m))


def read_metrics_csv(path: str | Path) -> list[ArchMetrics]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        names = [f.name for f in fields(ArchMetrics)][1:]
        return [ArchMetrics(row["file"], *(int(row[k]) for k in names)) for row in reader]


def write_edge_list(G: DependencyGraph, path: str | Path) -> None:
    """``source<TAB>target`` per edge; files without edges get a line of their own."""
    touched = {n for e in G.edges for n in e}
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in G.edges:
            fh.write(f"{a}\t{b}\n")
        for n in G.nodes:
            if n not in touched:
                fh.write(f"{n}\n")


def read_edge_list(path: str | Path) -> DependencyGraph:
    nodes, edges = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) == 1:
                nodes.append(parts[0])
            elif len(parts) == 2:
                edges.append((parts[0], parts[1]))
            else:
                raise ValueError(f"{path}:{lineno}: expected 'source<TAB>target'")
    return DependencyGraph(nodes, edges)


# ---------------------------------------------------------------------------
# lightweight Java-style reference resolution


@dataclass
class _SourceInfo:
    package: str
    imports: list[tuple[str, bool]]      # (name, is_wildcard)
    types: list[str]
    identifiers: set[str]


def _scan(text: str) -> _SourceInfo:
    code = _drop_literal_contents(strip_comments(text))
    m = _PACKAGE.search(code)
    package = m.group(1) if m else ""
    imports = [(name, bool(star)) for _static, name, star in _IMPORT.findall(code)]
    body = _IMPORT.sub("", _PACKAGE.sub("", code))
    return _SourceInfo(package, imports, _TYPE_DECL.findall(body), set(_IDENT.findall(body)))


def extract_dependencies(project_root: str | Path,
                         extensions: tuple[str, ...] = (".java",)) -> DependencyGraph:
    """Resolve imports and same-package type references between project files.

    ``f -> g`` when ``f`` imports a type declared in ``g`` (directly, via a
    wildcard import plus a use of the simple name, or through a static import),
    or uses the simple name of a type declared in ``g`` in the same package.
    References that do not resolve inside the project are ignored.
    """
    root = Path(project_root)
    infos: dict[str, _SourceInfo] = {}
    for path in sorted(p for p in root.rglob("*") if p.is_file() and p.suffix in extensions):
        rel = path.relative_to(root).as_posix()
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            log.warning("skipping unreadable file %s: %s", rel, exc)
            continue
        infos[rel] = _scan(text)

    by_fqn: dict[str, str] = {}
    by_package: dict[str, dict[str, str]] = {}
    for rel, info in infos.items():
        for t in info.types:
            fqn = f"{info.package}.{t}" if info.package else t
            by_fqn.setdefault(fqn, rel)
            by_package.setdefault(info.package, {}).setdefault(t, rel)

    edges = []
    for rel, info in infos.items():
        targets = set()
        for name, wildcard in info.imports:
            if wildcard:
                pkg_types = by_package.get(name, {})
                targets.update(pkg_types[i] for i in info.identifiers if i in pkg_types)
                continue
            parts = name.split(".")
            # nested types and static members: fall back to shorter prefixes
            for k in range(len(parts), 0, -1):
                hit = by_fqn.get(".".join(parts[:k]))
                if hit is not None:
                    targets.add(hit)
                    break
        local = by_package.get(info.package, {})
        targets.update(local[i] for i in info.identifiers if i in local)
        targets.discard(rel)
        edges.extend((rel, t) for t in sorted(targets))
    return DependencyGraph(infos.keys(), edges)
