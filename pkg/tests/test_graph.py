import itertools

import numpy as np
import pytest

from recourselab.graph import (
    CausalGraph,
    GraphError,
    audit_performative_validity,
    build_twin_graph,
    d_separated,
    post,
    relations,
)
from recourselab.rng import stream

from conftest import conditional_chi2_pvalue, dsep_oracle, enumerate_dags


def example1_graph():
    return CausalGraph(("D", "Y", "G"), (("D", "Y"), ("D", "G"), ("Y", "G")), target="Y")


class TestConstruction:
    def test_cycle_rejected(self):
        with pytest.raises(GraphError, match="cycle"):
            CausalGraph(("A", "B"), (("A", "B"), ("B", "A")), target="A")

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError, match="self-loop"):
            CausalGraph(("A", "B"), (("A", "A"),), target="B")

    def test_duplicate_edge_rejected(self):
        with pytest.raises(GraphError, match="duplicate edge"):
            CausalGraph(("A", "B"), (("A", "B"), ("A", "B")), target="B")

    def test_target_must_exist(self):
        with pytest.raises(GraphError, match="target"):
            CausalGraph(("A", "B"), (), target="C")

    def test_text_roundtrip(self):
        g = example1_graph()
        again = CausalGraph.parse(g.to_text())
        assert set(again.nodes) == set(g.nodes) and set(again.edges) == set(g.edges) and again.target == "Y"

    def test_parse_errors_name_line(self):
        with pytest.raises(GraphError, match="line 2"):
            CausalGraph.parse("target: Y\nD -> -> Y\n")
        with pytest.raises(GraphError, match="target"):
            CausalGraph.parse("A -> B\n")


class TestRelations:
    def test_example1_kinship(self):
        g = example1_graph()
        rel = relations(g, "Y")
        assert rel.children == {"G"}
        assert rel.ancestors == {"D"}
        assert rel.spouses_of_target == {"D"}

    def test_chain_descendants(self):
        g = CausalGraph(("A", "B", "C"), (("A", "B"), ("B", "C")), target="C")
        assert relations(g, "A").descendants == {"B", "C"}

    def test_empty_graph_relations(self):
        g = CausalGraph(("A", "B", "C"), (), target="C")
        for n in g.nodes:
            rel = relations(g, n)
            assert not (rel.parents | rel.children | rel.ancestors | rel.descendants)

    def test_unknown_node(self):
        with pytest.raises(GraphError, match="nope"):
            relations(example1_graph(), "nope")


class TestDSeparation:
    def test_chain_blocked_by_middle(self):
        g = CausalGraph(("X", "Y", "Z"), (("X", "Y"), ("Y", "Z")), target="Y")
        assert d_separated(g, {"X"}, {"Z"}, {"Y"})
        assert not d_separated(g, {"X"}, {"Z"}, set())

    def test_collider_opened_by_conditioning(self):
        g = CausalGraph(("X", "Y", "Z"), (("X", "Y"), ("Z", "Y")), target="Y")
        assert d_separated(g, {"X"}, {"Z"}, set())
        assert not d_separated(g, {"X"}, {"Z"}, {"Y"})

    def test_collider_opened_by_descendant(self):
        g = CausalGraph(("X", "Y", "Z", "W"), (("X", "Y"), ("Z", "Y"), ("Y", "W")), target="Y")
        assert not d_separated(g, {"X"}, {"Z"}, {"W"})

    def test_overlapping_sets_rejected(self):
        g = example1_graph()
        with pytest.raises(GraphError, match="disjoint"):
            d_separated(g, {"D"}, {"G"}, {"D"})

    def test_agrees_with_path_enumeration_on_all_small_dags(self):
        # Every DAG up to 5 nodes in canonical labeling, every singleton pair,
        # every conditioning subset of the remaining nodes.
        checked = 0
        for n in range(2, 6):
            for g in enumerate_dags(n):
                nodes = g.nodes
                for a, b in itertools.combinations(nodes, 2):
                    rest = [x for x in nodes if x not in (a, b)]
                    for k in range(len(rest) + 1):
                        for z in itertools.combinations(rest, k):
                            got = g.d_separated({a}, {b}, set(z))
                            want = dsep_oracle(g, {a}, {b}, set(z))
                            assert got == want, f"n={n} edges={g.edges} a={a} b={b} z={z}"
                            checked += 1
        assert checked > 100_000

    def test_markov_property_on_sampled_discrete_scm(self):
        # Diamond X1 -> {X2, X3} -> X4: X2 and X3 are dependent marginally but
        # d-separated (hence independent) given X1.
        from recourselab.scm import Scm, ShiftedBinomial, StructuralEquation

        g = CausalGraph(
            ("X1", "X2", "X3", "X4"),
            (("X1", "X2"), ("X1", "X3"), ("X2", "X4"), ("X3", "X4")),
            target="X4",
        )
        eq = lambda pa_names, w: StructuralEquation(  # noqa: E731
            fn=lambda pa, u, names=pa_names, ww=w: sum(c * pa[p] for p, c in zip(names, ww)) + u
        )
        scm = Scm(
            g,
            {"X2": eq(("X1",), (1,)), "X3": eq(("X1",), (1,)), "X4": eq(("X2", "X3"), (1, -1))},
            {n: ShiftedBinomial(2, 0.5, 0) for n in g.nodes},
        )
        ds = scm.sample(100_000, stream(9001))
        x1, x2, x3 = (ds.column(c) for c in ("X1", "X2", "X3"))
        assert g.d_separated({"X2"}, {"X3"}, {"X1"})
        p_blocked = conditional_chi2_pvalue(x2, x3, [x1])
        assert p_blocked > 0.01  # Markov: d-separation must not be rejected
        assert not g.d_separated({"X2"}, {"X3"}, set())
        p_open = conditional_chi2_pvalue(x2, x3, [])
        assert p_open < 0.01  # the open fork is strongly dependent here


class TestTwinGraph:
    def test_policy_edges_present_interventions_absent(self):
        # Degree/activity configuration: policy reads both features, the
        # recommendation only ever moves the cause.
        g = example1_graph()
        twin = build_twin_graph(g, policy_inputs={"D", "G"}, intervention_targets={"D"}, noise_resampled=False)
        edges = set(twin.graph.edges)
        assert ("G", "A") in edges and ("D", "A") in edges
        assert ("A", post("D")) in edges
        assert ("A", post("G")) not in edges

    def test_resampled_noise_cuts_identity_edges(self):
        # Risk/mood configuration: interventions on the effect, daily noise.
        g = CausalGraph(("R", "Y", "M"), (("R", "Y"), ("Y", "M")), target="Y")
        twin = build_twin_graph(g, policy_inputs={"R", "M"}, intervention_targets={"M"}, noise_resampled=True)
        edges = set(twin.graph.edges)
        assert ("A", post("M")) in edges
        assert not any(e for e in edges if e[0].startswith("U_") and e[1].startswith("U_"))

    def test_persistent_noise_keeps_identity_edges(self):
        g = example1_graph()
        twin = build_twin_graph(g, {"D"}, {"D"}, noise_resampled=False)
        assert ("U_Y", "U_" + post("Y")) in set(twin.graph.edges)

    def test_empty_configuration_isolates_action(self):
        g = example1_graph()
        twin = build_twin_graph(g, set(), set(), noise_resampled=False)
        assert twin.graph.parents("A") == set() and twin.graph.children("A") == set()
        assert twin.graph.d_separated({"A"}, {post("Y")}, set(twin.post_features()))

    def test_target_as_intervention_target_rejected(self):
        with pytest.raises(GraphError, match="target"):
            build_twin_graph(example1_graph(), set(), {"Y"}, False)


class TestAudit:
    def test_cause_only_resampled_is_valid(self):
        g = example1_graph()
        rep = audit_performative_validity(g, {"D"}, {"D"}, noise_resampled=True)
        assert not rep.influenced_by_effects and not rep.intervenes_on_effects
        assert rep.guaranteed_valid

    def test_intervening_on_child_breaks_validity(self):
        g = example1_graph()
        rep = audit_performative_validity(g, {"D"}, {"G"}, noise_resampled=True)
        assert rep.intervenes_on_effects and not rep.guaranteed_valid

    def test_policy_on_descendant_with_persistent_noise_breaks_validity(self):
        g = example1_graph()
        rep = audit_performative_validity(g, {"D", "G"}, {"D"}, noise_resampled=False)
        assert rep.influenced_by_effects and not rep.guaranteed_valid

    def test_guaranteed_valid_iff_d_separated(self):
        g = example1_graph()
        for policy in ({"D"}, {"G"}, {"D", "G"}, set()):
            for targets in ({"D"}, {"G"}, {"D", "G"}, set()):
                for resampled in (False, True):
                    rep = audit_performative_validity(g, policy, targets, resampled)
                    assert rep.guaranteed_valid == rep.d_separated

    def test_case_analysis_matches_two_sources(self):
        # guaranteed_valid holds exactly when no intervention touches a direct
        # effect and any influence from effects is cut by noise resampling.
        spouse = CausalGraph(
            ("C", "S", "Y", "E", "W"),
            (("C", "Y"), ("Y", "E"), ("S", "E"), ("E", "W")),
            target="Y",
        )
        features = [n for n in spouse.nodes if n != "Y"]
        effects_ch = spouse.children("Y")
        effects_de = spouse.descendants("Y")
        for k in range(len(features) + 1):
            for policy in itertools.combinations(features, k):
                for j in range(len(features) + 1):
                    for targets in itertools.combinations(features, j):
                        for resampled in (False, True):
                            rep = audit_performative_validity(spouse, set(policy), set(targets), resampled)
                            influenced = bool(set(policy) & effects_de)
                            intervenes = bool(set(targets) & effects_ch)
                            expected = (not intervenes) and ((not influenced) or resampled)
                            assert rep.guaranteed_valid == expected, (policy, targets, resampled)
