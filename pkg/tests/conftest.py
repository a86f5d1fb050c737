"""Shared test oracles, independent of the implementation paths they check."""

import numpy as np
import pytest

from recourselab.graph import CausalGraph


# -- brute-force d-separation oracle ------------------------------------------


def all_undirected_paths(graph: CausalGraph, start, end):
    """Every simple path between two nodes, ignoring edge direction.

    Each path is a list of (node, arrow) steps where arrow is +1 for a
    traversed parent->child edge and -1 for child->parent.
    """
    adjacency = {n: [] for n in graph.nodes}
    for p, c in graph.edges:
        adjacency[p].append((c, +1))
        adjacency[c].append((p, -1))
    paths = []

    def walk(node, visited, steps):
        if node == end:
            paths.append(list(steps))
            return
        for nxt, arrow in adjacency[node]:
            if nxt not in visited:
                visited.add(nxt)
                steps.append((nxt, arrow))
                walk(nxt, visited, steps)
                steps.pop()
                visited.discard(nxt)

    walk(start, {start}, [])
    return paths


def path_blocked(graph: CausalGraph, path, z):
    """Blocking per the textbook definition applied to one explicit path."""
    # walk interior nodes: arrows into and out of each middle node
    for i in range(len(path) - 1):
        node, arrow_in = path[i]
        _, arrow_out = path[i + 1]
        is_collider = arrow_in == +1 and arrow_out == -1
        if is_collider:
            cone = {node} | graph.descendants(node)
            if not (cone & z):
                return True
        else:
            if node in z:
                return True
    return False


def dsep_oracle(graph: CausalGraph, a, b, z):
    """d-separation by exhaustive path enumeration."""
    z = set(z)
    for x in a:
        for y in b:
            for path in all_undirected_paths(graph, x, y):
                if not path_blocked(graph, path, z):
                    return False
    return True


def enumerate_dags(n):
    """All DAGs on n nodes in canonical topological labeling.

    Edges only point from lower to higher index, which covers every
    isomorphism class; queries that quantify over all node subsets therefore
    exercise every ≤n-node DAG shape.
    """
    names = [f"N{i}" for i in range(n)]
    slots = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for mask in range(1 << len(slots)):
        edges = [(names[i], names[j]) for k, (i, j) in enumerate(slots) if mask >> k & 1]
        yield CausalGraph(names, edges, target=names[-1])


# -- conditional-independence chi-squared test ---------------------------------


def conditional_chi2_pvalue(a, b, z_columns):
    """Chi-squared test of a ⊥ b within every stratum of the z columns.

    Statistics and degrees of freedom add across strata; returns the combined
    p-value. Columns must be discrete.
    """
    from scipy.stats import chi2

    a = np.asarray(a)
    b = np.asarray(b)
    if z_columns:
        z = np.column_stack([np.asarray(c) for c in z_columns])
        _, strata = np.unique(z, axis=0, return_inverse=True)
    else:
        strata = np.zeros(a.shape[0], dtype=int)
    stat, dof = 0.0, 0
    for s in np.unique(strata):
        mask = strata == s
        av, ai = np.unique(a[mask], return_inverse=True)
        bv, bi = np.unique(b[mask], return_inverse=True)
        if av.size < 2 or bv.size < 2:
            continue
        table = np.zeros((av.size, bv.size))
        np.add.at(table, (ai, bi), 1.0)
        total = table.sum()
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / total
        ok = expected > 0
        stat += float(((table - expected) ** 2 / np.where(ok, expected, 1.0))[ok].sum())
        dof += (av.size - 1) * (bv.size - 1)
    if dof == 0:
        return 1.0
    return float(chi2.sf(stat, dof))


# -- independent standard-normal CDF -------------------------------------------


def phi_quadrature(z, steps=20000):
    """Normal CDF by trapezoidal quadrature of the density; oracle for erf."""
    if z < -10:
        return 0.0
    if z > 10:
        return 1.0
    grid = np.linspace(-10.0, z, steps)
    dens = np.exp(-0.5 * grid**2) / np.sqrt(2 * np.pi)
    return float(np.trapezoid(dens, grid))


@pytest.fixture(scope="session")
def ladd():
    from recourselab import settings

    return settings.build("LAdd")


@pytest.fixture(scope="session")
def example1():
    from recourselab import settings

    return settings.build("Example1")


@pytest.fixture(scope="session")
def example2():
    from recourselab import settings

    return settings.build("Example2")
