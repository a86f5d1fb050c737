"""Causal DAGs: kinship queries, d-separation, and the pre/post twin-graph audit.

A graph is immutable after construction; every query is read-only. The text
format is line oriented::

    target: Y
    D -> Y
    D -> G
    Y -> G

One edge per line, a single ``target:`` header, ``#`` comments allowed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass


class GraphError(ValueError):
    """Malformed graph, unknown node, or invalid query."""


class CausalGraph:
    """Directed acyclic graph over named nodes with a designated target."""

    def __init__(self, nodes, edges, target):
        self.nodes = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("duplicate node names")
        if target not in self.nodes:
            raise GraphError(f"target {target!r} is not a node")
        self.target = target
        self.edges = tuple((p, c) for p, c in edges)
        seen = set()
        self._pa = {n: set() for n in self.nodes}
        self._ch = {n: set() for n in self.nodes}
        for p, c in self.edges:
            if p not in self._pa or c not in self._pa:
                missing = p if p not in self._pa else c
                raise GraphError(f"edge references unknown node {missing!r}")
            if p == c:
                raise GraphError(f"self-loop on {p!r}")
            if (p, c) in seen:
                raise GraphError(f"duplicate edge {p!r} -> {c!r}")
            seen.add((p, c))
            self._pa[c].add(p)
            self._ch[p].add(c)
        self._topo = self._topological_sort()

    def _topological_sort(self):
        # Kahn's algorithm; ties broken by declaration order so the result
        # is deterministic and usable as a canonical node ordering.
        indeg = {n: len(self._pa[n]) for n in self.nodes}
        ready = deque(n for n in self.nodes if indeg[n] == 0)
        order = []
        while ready:
            n = ready.popleft()
            order.append(n)
            for c in sorted(self._ch[n], key=self.nodes.index):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self.nodes):
            raise GraphError("graph contains a cycle")
        return tuple(order)

    # -- kinship ---------------------------------------------------------

    def _check_node(self, node):
        if node not in self._pa:
            raise GraphError(f"unknown node {node!r}")

    def parents(self, node):
        self._check_node(node)
        return set(self._pa[node])

    def children(self, node):
        self._check_node(node)
        return set(self._ch[node])

    def ancestors(self, node):
        self._check_node(node)
        out, todo = set(), deque(self._pa[node])
        while todo:
            n = todo.popleft()
            if n not in out:
                out.add(n)
                todo.extend(self._pa[n])
        return out

    def descendants(self, node):
        self._check_node(node)
        out, todo = set(), deque(self._ch[node])
        while todo:
            n = todo.popleft()
            if n not in out:
                out.add(n)
                todo.extend(self._ch[n])
        return out

    def spouses_of(self, node):
        """Parents of the node's children, excluding the node itself."""
        self._check_node(node)
        out = set()
        for c in self._ch[node]:
            out |= self._pa[c]
        out.discard(node)
        return out

    @property
    def feature_nodes(self):
        return tuple(n for n in self.nodes if n != self.target)

    def topological_order(self):
        return self._topo

    def topological_index(self, node):
        """1-based position of a node in the canonical topological order."""
        self._check_node(node)
        return self._topo.index(node) + 1

    # -- d-separation ----------------------------------------------------

    def d_separated(self, a, b, z):
        """True iff every undirected path between ``a`` and ``b`` is blocked.

        A path is blocked when it contains a chain or fork whose middle node
        is conditioned on, or a collider such that neither the collider nor
        any of its descendants is conditioned on. Implemented as reachability
        over (node, direction) states, which visits each edge at most twice.
        """
        a, b, z = set(a), set(b), set(z)
        for s in (a, b, z):
            for n in s:
                self._check_node(n)
        if a & b or a & z or b & z:
            raise GraphError("d-separation query sets must be disjoint")

        # Nodes whose descendants reach z: these keep colliders open.
        z_anc = set(z)
        todo = deque(z)
        while todo:
            n = todo.popleft()
            for p in self._pa[n]:
                if p not in z_anc:
                    z_anc.add(p)
                    todo.append(p)

        # State ("up": arrived from a child, "down": arrived from a parent).
        todo = deque((n, "up") for n in a)
        visited = set()
        while todo:
            n, d = todo.popleft()
            if (n, d) in visited:
                continue
            visited.add((n, d))
            if n in b and n not in z:
                return False
            if d == "up" and n not in z:
                for p in self._pa[n]:
                    todo.append((p, "up"))
                for c in self._ch[n]:
                    todo.append((c, "down"))
            elif d == "down":
                if n not in z:
                    for c in self._ch[n]:
                        todo.append((c, "down"))
                if n in z_anc:
                    for p in self._pa[n]:
                        todo.append((p, "up"))
        return True

    # -- text format -----------------------------------------------------

    def to_text(self):
        lines = [f"target: {self.target}"]
        lines += [f"{p} -> {c}" for p, c in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text):
        target = None
        nodes, edges = [], []

        def add_node(n):
            if n not in nodes:
                nodes.append(n)

        for i, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("target:"):
                if target is not None:
                    raise GraphError(f"line {i}: duplicate target header")
                target = line.split(":", 1)[1].strip()
                if not target:
                    raise GraphError(f"line {i}: empty target name")
                add_node(target)
            elif "->" in line:
                parts = [p.strip() for p in line.split("->")]
                if len(parts) != 2 or not all(parts):
                    raise GraphError(f"line {i}: malformed edge {raw.strip()!r}")
                add_node(parts[0])
                add_node(parts[1])
                edges.append((parts[0], parts[1]))
            else:
                raise GraphError(f"line {i}: unrecognized line {raw.strip()!r}")
        if target is None:
            raise GraphError("missing 'target:' header")
        return cls(nodes, edges, target)


@dataclass(frozen=True)
class Relations:
    parents: set
    children: set
    ancestors: set
    descendants: set
    spouses_of_target: set


def relations(graph: CausalGraph, node) -> Relations:
    """Kinship record for one node; spouses are parents of the node's children."""
    return Relations(
        parents=graph.parents(node),
        children=graph.children(node),
        ancestors=graph.ancestors(node),
        descendants=graph.descendants(node),
        spouses_of_target=graph.spouses_of(node),
    )


def d_separated(graph: CausalGraph, a, b, z) -> bool:
    return graph.d_separated(a, b, z)


# -- twin graph and audit --------------------------------------------------

ACTION_NODE = "A"


def post(node):
    """Name of a node's post-recourse twin."""
    return f"{node}^p"


def noise_of(node):
    return f"U_{node}"


@dataclass(frozen=True)
class TwinGraph:
    """Joint graph over pre-recourse nodes, post-recourse twins, noise, and A.

    The action node is computed from the pre-recourse observation before any
    post-recourse variable realizes, so it never has post-node parents.
    """

    graph: CausalGraph
    action: str
    pre_nodes: tuple
    post_nodes: tuple
    noise_resampled: bool

    def post_features(self):
        tgt_post = self.graph.target
        return tuple(n for n in self.post_nodes if n != tgt_post)


def build_twin_graph(graph, policy_inputs, intervention_targets, noise_resampled) -> TwinGraph:
    """Materialize the pre/post twin graph used by the validity audit.

    One noise node is created per original node on both sides; noise nodes
    carry identity edges U -> U^p unless ``noise_resampled`` is set. The
    action A reads every policy input and writes to the post twin of every
    intervention target.
    """
    policy_inputs = set(policy_inputs)
    intervention_targets = set(intervention_targets)
    features = set(graph.feature_nodes)
    for name, group in (("policy input", policy_inputs), ("intervention target", intervention_targets)):
        for n in group - features:
            if n == graph.target:
                raise GraphError(f"{name} {n!r} is the target; interventions on the target are not modeled")
            raise GraphError(f"{name} {n!r} is not a feature node")

    nodes = []
    edges = []
    for n in graph.nodes:
        nodes += [n, noise_of(n)]
        edges.append((noise_of(n), n))
    for n in graph.nodes:
        nodes += [post(n), noise_of(post(n))]
        edges.append((noise_of(post(n)), post(n)))
    if len(set(nodes) | {ACTION_NODE}) != len(nodes) + 1:
        raise GraphError("node names collide with twin-graph naming scheme")
    nodes.append(ACTION_NODE)

    for p, c in graph.edges:
        edges.append((p, c))
        edges.append((post(p), post(c)))
    for n in policy_inputs:
        edges.append((n, ACTION_NODE))
    for n in intervention_targets:
        edges.append((ACTION_NODE, post(n)))
    if not noise_resampled:
        for n in graph.nodes:
            edges.append((noise_of(n), noise_of(post(n))))

    twin = CausalGraph(nodes, edges, target=post(graph.target))
    return TwinGraph(
        graph=twin,
        action=ACTION_NODE,
        pre_nodes=tuple(graph.nodes),
        post_nodes=tuple(post(n) for n in graph.nodes),
        noise_resampled=noise_resampled,
    )


@dataclass(frozen=True)
class AuditReport:
    """Outcome of the two-sources audit on one recourse configuration."""

    influenced_by_effects: bool
    intervenes_on_effects: bool
    noise_resampled: bool
    d_separated: bool
    guaranteed_valid: bool

    def to_text(self):
        def yn(v):
            return "yes" if v else "no"

        return (
            f"influenced_by_effects: {yn(self.influenced_by_effects)}\n"
            f"intervenes_on_effects: {yn(self.intervenes_on_effects)}\n"
            f"noise_resampled: {yn(self.noise_resampled)}\n"
            f"d_separated: {yn(self.d_separated)}\n"
            f"guaranteed_valid: {yn(self.guaranteed_valid)}\n"
        )


def audit_performative_validity(graph, policy_inputs, intervention_targets, noise_resampled) -> AuditReport:
    """Check the two invalidity sources and the decisive d-separation.

    Validity is guaranteed exactly when the action is d-separated from the
    post-recourse target given the post-recourse features; the two source
    flags name which open-path mechanism is responsible when it is not.
    """
    twin = build_twin_graph(graph, policy_inputs, intervention_targets, noise_resampled)
    influenced = bool(set(policy_inputs) & graph.descendants(graph.target))
    intervenes = bool(set(intervention_targets) & graph.children(graph.target))
    sep = twin.graph.d_separated({twin.action}, {post(graph.target)}, set(twin.post_features()))
    return AuditReport(
        influenced_by_effects=influenced,
        intervenes_on_effects=intervenes,
        noise_resampled=bool(noise_resampled),
        d_separated=sep,
        guaranteed_valid=sep,
    )
