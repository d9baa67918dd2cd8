"""Tree decoding: maximum spanning arborescence and the local-argmax baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..blocks import ROOT


@dataclass
class DependencyTree:
    parent: dict[int, int]  # block id -> parent block id or ROOT

    def children(self) -> dict[int, list[int]]:
        """Child lists keyed by parent (ROOT included), ordered by block id."""
        kids: dict[int, list[int]] = {ROOT: []}
        for c in sorted(self.parent):
            kids.setdefault(c, [])
            kids.setdefault(self.parent[c], []).append(c)
        return kids

    def validate(self) -> None:
        seen = set(self.parent)
        reach = set()
        for c in self.parent:
            path = []
            node = c
            while node != ROOT and node not in reach:
                if node in path:
                    raise ValueError(f"cycle through block {node}")
                path.append(node)
                if node not in self.parent:
                    raise ValueError(f"block {node} has no parent entry")
                node = self.parent[node]
            reach.update(path)
        unknown = {p for p in self.parent.values() if p != ROOT and p not in seen}
        if unknown:
            raise ValueError(f"parents outside the block set: {sorted(unknown)}")


@dataclass
class ValidityReport:
    is_tree: bool
    cycle_count: int
    cycles: list[list[int]] = field(default_factory=list)


Edge = tuple[int, int, float]  # (child, candidate parent, score)


def _best_in_edges(nodes: list[int], edges: list[Edge]) -> dict[int, Edge]:
    """Highest-scoring in-edge per node; ties keep the earliest edge in input order."""
    best: dict[int, Edge] = {}
    for e in edges:
        child = e[0]
        if child not in best or e[2] > best[child][2]:
            best[child] = e
    return best


def _find_cycle(best: dict[int, Edge]) -> list[int] | None:
    color: dict[int, int] = {}
    for start in sorted(best):
        if color.get(start):
            continue
        path = []
        node = start
        while node in best and color.get(node) is None:
            color[node] = 1
            path.append(node)
            node = best[node][1]
        if node != ROOT and color.get(node) == 1 and node in path:
            return path[path.index(node):]
        for n in path:
            color[n] = 2
    return None


def _mst(nodes: list[int], edges: list[Edge]) -> dict[int, Edge]:
    """Chu-Liu/Edmonds maximum arborescence rooted at ROOT; returns chosen in-edges."""
    best = _best_in_edges(nodes, edges)
    cycle = _find_cycle(best)
    if cycle is None:
        return best
    cyc_set = set(cycle)
    super_node = min(cycle)  # reuse an id as the contracted node label
    cyc_best = {n: best[n] for n in cycle}

    new_edges: list[Edge] = []
    origin: dict[tuple[int, int, float], Edge] = {}
    for child, parent, w in edges:
        if child in cyc_set and parent in cyc_set:
            continue
        if child in cyc_set:
            # entering the cycle: pay for replacing the cycle's own in-edge
            nw = w - cyc_best[child][2]
            ne = (super_node, parent if parent not in cyc_set else super_node, nw)
        elif parent in cyc_set:
            ne = (child, super_node, w)
        else:
            ne = (child, parent, w)
        if ne not in origin:  # first occurrence wins on exact ties
            origin[ne] = (child, parent, w)
        new_edges.append(ne)

    new_nodes = [n for n in nodes if n not in cyc_set] + [super_node]
    sub = _mst(new_nodes, new_edges)

    chosen: dict[int, Edge] = {}
    for node, ne in sub.items():
        oe = origin[ne]
        if node == super_node:
            entry = oe  # the real edge that enters the cycle
        else:
            chosen[node] = oe
    # expand the cycle: keep all cycle in-edges except the one displaced by entry
    for n in cycle:
        chosen[n] = cyc_best[n]
    chosen[entry[0]] = entry
    return chosen


def decode_mst(scored: list[tuple[int, int, float]]) -> DependencyTree:
    """Maximum-weight arborescence over candidate edges (ROOT edges guarantee feasibility)."""
    nodes = sorted({c for c, _, _ in scored})
    chosen = _mst(nodes, list(scored))
    tree = DependencyTree(parent={c: e[1] for c, e in chosen.items()})
    tree.validate()
    return tree


def decode_argmax(scored: list[tuple[int, int, float]]) -> tuple[dict[int, int], ValidityReport]:
    """Per-child best parent; ties go to the smaller candidate id (ROOT last).

    The output may violate tree constraints when candidate edges do not all
    point backward in reading order; the report flags any cycles.
    """
    best: dict[int, tuple[float, int]] = {}
    for child, parent, score in scored:
        key = (score, -parent)  # ROOT is -1, so it wins ties as the lowest id
        if child not in best or key > best[child]:
            best[child] = key
    parent_map = {c: -k[1] for c, k in best.items()}

    cycles = []
    state: dict[int, int] = {}
    for start in sorted(parent_map):
        if state.get(start):
            continue
        path = []
        node = start
        while node != ROOT and node in parent_map and state.get(node) is None:
            state[node] = 1
            path.append(node)
            node = parent_map[node]
        if node != ROOT and state.get(node) == 1 and node in path:
            cycles.append(path[path.index(node):])
        for n in path:
            state[n] = 2
    report = ValidityReport(is_tree=not cycles, cycle_count=len(cycles), cycles=cycles)
    return parent_map, report


def argmax_as_tree(parent_map: dict[int, int], report: ValidityReport) -> DependencyTree:
    """Canonicalize an argmax parent map for evaluation: cycle members attach to ROOT."""
    parent = dict(parent_map)
    for cyc in report.cycles:
        for n in cyc:
            parent[n] = ROOT
    tree = DependencyTree(parent=parent)
    tree.validate()
    return tree


def total_score(tree_or_map, scored: list[tuple[int, int, float]]) -> float:
    parent = tree_or_map.parent if isinstance(tree_or_map, DependencyTree) else tree_or_map
    lookup = {}
    for child, cand, score in scored:
        key = (child, cand)
        if key not in lookup or score > lookup[key]:
            lookup[key] = score
    return sum(lookup[(c, p)] for c, p in parent.items())
