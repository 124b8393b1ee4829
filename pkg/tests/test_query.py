import random

import pytest

from graphaudit.errors import MixedGraphError
from graphaudit.graph import ProgramGraph
from graphaudit.query import Subgraph, method_select, universe

from oracles import (
    oracle_between,
    oracle_forward,
    oracle_reverse,
    random_graph,
    random_origin,
    random_subgraph,
)


def chain(*edges):
    """Graph from (src, dst) name pairs; returns (graph, name->id)."""
    g = ProgramGraph()
    ids = {}
    for src, dst in edges:
        for name in (src, dst):
            if name not in ids:
                ids[name] = g.add_node("METHOD", name)
        g.add_edge("CALL", ids[src], ids[dst])
    return g.freeze(), ids


def sg(graph, ids, *names):
    return Subgraph.of(graph, {ids[n] for n in names})


def test_universe_empty_graph():
    g = ProgramGraph().freeze()
    u = universe(g)
    assert u.is_empty()


def test_universe_counts():
    g, _ = chain(("A", "B"), ("B", "C"))
    u = universe(g)
    assert len(u.node_ids) == 3 and len(u.edge_ids) == 2


def test_retain_edges_drops_isolated_node():
    g = ProgramGraph()
    a = g.add_node("METHOD", "a")
    b = g.add_node("METHOD", "b")
    g.add_node("METHOD", "isolated")
    g.add_edge("CALL", a, b)
    g.freeze()
    kept = universe(g).retain_edges()
    assert kept.node_ids == {a, b}


def test_retain_edges_identity_and_idempotence():
    g, ids = chain(("A", "B"))
    u = universe(g)
    once = u.retain_edges()
    assert once.same_ids(u)  # every node incident
    assert once.retain_edges().same_ids(once)
    empty = Subgraph.of(g, {ids["A"]})
    assert empty.retain_edges().is_empty()


def test_nodes_tagged_any():
    g = ProgramGraph()
    ids = [g.add_node("METHOD", f"m{i}") for i in range(5)]
    g.apply_tag(ids[:2], "MANIFEST_HIGH_PRIORITY")
    e_in = g.add_edge("CALL", ids[0], ids[1])
    g.add_edge("CALL", ids[1], ids[3])
    g.freeze()
    picked = universe(g).nodes_tagged_any("MANIFEST_HIGH_PRIORITY")
    assert picked.node_ids == set(ids[:2])
    assert picked.edge_ids == {e_in}
    assert universe(g).nodes_tagged_any().is_empty()
    all_tagged = universe(g).nodes_tagged_any("METHOD")
    assert all_tagged.same_ids(universe(g))
    assert universe(g).nodes_tagged_any("NO_SUCH_TAG").is_empty()


def test_edges_tagged_any_keeps_all_nodes():
    g = ProgramGraph()
    ids = [g.add_node("METHOD", f"m{i}") for i in range(4)]
    calls = [g.add_edge("CALL", ids[0], ids[1]),
             g.add_edge("CALL", ids[1], ids[2]),
             g.add_edge("CALL", ids[2], ids[3])]
    g.add_edge("DATA_FLOW", ids[0], ids[2])
    g.add_edge("DATA_FLOW", ids[3], ids[1])
    g.freeze()
    picked = universe(g).edges_tagged_any("CALL")
    assert picked.edge_ids == set(calls)
    assert picked.node_ids == set(ids)
    assert universe(g).edges_tagged_any().edge_ids == set()
    assert universe(g).edges_tagged_any().node_ids == set(ids)
    retained = picked.retain_edges()
    assert retained.node_ids == set(ids)  # all are CALL endpoints here


def test_set_op_identities():
    g, ids = chain(("A", "B"), ("B", "C"))
    u = universe(g)
    empty = Subgraph.empty(g)
    assert u.union(empty).same_ids(u)
    assert u.intersection(u).same_ids(u)
    assert u.difference(u).is_empty()


def test_set_ops_reject_mixed_graphs():
    g1, _ = chain(("A", "B"))
    g2, _ = chain(("A", "B"))
    with pytest.raises(MixedGraphError):
        universe(g1).union(universe(g2))


def test_difference_repairs_closure():
    g, ids = chain(("A", "B"), ("B", "C"))
    u = universe(g)
    without_b = u.difference(sg(g, ids, "B"))
    assert ids["B"] not in without_b.node_ids
    assert without_b.edge_ids == set()  # both edges touched B


def test_forward_example():
    g, ids = chain(("A", "B"), ("B", "C"), ("D", "C"))
    fwd = universe(g).forward(sg(g, ids, "A"))
    assert fwd.node_ids == {ids["A"], ids["B"], ids["C"]}
    assert len(fwd.edge_ids) == 2
    assert universe(g).forward(Subgraph.empty(g)).is_empty()


def test_forward_includes_isolated_origin():
    g = ProgramGraph()
    a = g.add_node("METHOD", "a")
    b = g.add_node("METHOD", "b")
    c = g.add_node("METHOD", "c")
    g.add_edge("CALL", b, c)
    g.freeze()
    fwd = universe(g).forward(Subgraph.of(g, {a}))
    assert fwd.node_ids == {a}


def test_reverse_examples():
    g, ids = chain(("A", "B"), ("B", "C"))
    rev = universe(g).reverse(sg(g, ids, "C"))
    assert rev.node_ids == {ids["A"], ids["B"], ids["C"]}
    only_a = universe(g).reverse(sg(g, ids, "A"))
    assert only_a.node_ids == {ids["A"]}


def test_between_example():
    g, ids = chain(("A", "B"), ("B", "C"), ("D", "C"))
    mid = universe(g).between(sg(g, ids, "A"), sg(g, ids, "C"))
    assert mid.node_ids == {ids["A"], ids["B"], ids["C"]}
    assert ids["D"] not in mid.node_ids
    assert len(mid.edge_ids) == 2
    disjoint = universe(g).between(sg(g, ids, "D"), sg(g, ids, "A"))
    assert disjoint.is_empty()


def test_steps():
    g, ids = chain(("A", "B"), ("B", "C"))
    step = universe(g).forward_step(sg(g, ids, "A"))
    assert step.node_ids == {ids["A"], ids["B"]}
    assert len(step.edge_ids) == 1
    assert universe(g).forward_step(Subgraph.empty(g)).is_empty()


def test_forward_step_fixpoint_equals_forward():
    rng = random.Random(7)
    for _ in range(50):
        g = random_graph(rng, max_nodes=15, max_edges=30)
        u = universe(g)
        origin = Subgraph.of(g, random_origin(rng, g))
        current = Subgraph.of(g, origin.node_ids)
        while True:
            nxt = u.forward_step(current).union(current)
            if nxt.same_ids(current):
                break
            current = nxt
        assert current.node_ids == u.forward(origin).node_ids


def test_method_select(smsblocker):
    g = smsblocker.graph
    hit = method_select(g, "BroadcastReceiver", "abortBroadcast")
    assert len(hit.node_ids) == 1
    assert hit.edge_ids == set()
    assert method_select(g, "NoSuchType", "abortBroadcast").is_empty()


def test_method_select_ambiguity():
    # Two types with the same simple name both declaring the method: the
    # builder forbids duplicate type names, but imported graphs can carry
    # them, and simple-name matching returns all hits.
    g = ProgramGraph()
    t1 = g.add_node("TYPE", "Widget")
    t2 = g.add_node("TYPE", "Widget")
    m1 = g.add_node("METHOD", "draw")
    m2 = g.add_node("METHOD", "draw")
    g.add_edge("DECLARES", t1, m1)
    g.add_edge("DECLARES", t2, m2)
    g.freeze()
    assert method_select(g, "Widget", "draw").node_ids == {m1, m2}


def test_operations_do_not_mutate_graph():
    g, ids = chain(("A", "B"), ("B", "C"))
    before_nodes = dict(g.nodes)
    before_edges = dict(g.edges)
    u = universe(g)
    u.forward(sg(g, ids, "A"))
    u.edges_tagged_any("CALL").retain_edges()
    u.difference(sg(g, ids, "B"))
    assert g.nodes == before_nodes and g.edges == before_edges


def test_randomized_traversals_match_oracle():
    rng = random.Random(42)
    for _ in range(150):
        g = random_graph(rng)
        q = random_subgraph(rng, g)
        origin = random_origin(rng, g)
        target = random_origin(rng, g)
        o_sg = Subgraph.of(g, origin)
        t_sg = Subgraph.of(g, target)

        fwd = q.forward(o_sg)
        nodes, edges = oracle_forward(q, origin)
        assert (fwd.node_ids, fwd.edge_ids) == (nodes, edges)

        rev = q.reverse(o_sg)
        nodes, edges = oracle_reverse(q, origin)
        assert (rev.node_ids, rev.edge_ids) == (nodes, edges)

        mid = q.between(o_sg, t_sg)
        nodes, edges = oracle_between(q, origin, target)
        assert (mid.node_ids, mid.edge_ids) == (nodes, edges)


def test_reverse_is_forward_on_transpose():
    rng = random.Random(5)
    for _ in range(60):
        g = random_graph(rng, max_nodes=20, max_edges=40)
        origin = random_origin(rng, g)
        rev = universe(g).reverse(Subgraph.of(g, origin))

        flipped = ProgramGraph()
        for nid in g.nodes:
            flipped.add_node("METHOD", g.nodes[nid].name, node_id=nid)
        for eid, e in g.edges.items():
            flipped.add_edge("CALL", e.dst, e.src, edge_id=eid)
        flipped.freeze()
        fwd = universe(flipped).forward(Subgraph.of(flipped, origin))
        assert rev.node_ids == fwd.node_ids
        assert rev.edge_ids == fwd.edge_ids


def test_monotonicity_in_origin():
    rng = random.Random(11)
    for _ in range(60):
        g = random_graph(rng, max_nodes=20, max_edges=40)
        big = random_origin(rng, g)
        small = {n for n in big if rng.random() < 0.5}
        u = universe(g)
        f_small = u.forward(Subgraph.of(g, small))
        f_big = u.forward(Subgraph.of(g, big))
        assert f_small.node_ids <= f_big.node_ids
        assert f_small.edge_ids <= f_big.edge_ids


def test_lattice_laws():
    rng = random.Random(23)
    for _ in range(60):
        g = random_graph(rng, max_nodes=20, max_edges=40)
        a = random_subgraph(rng, g)
        b = random_subgraph(rng, g)
        c = random_subgraph(rng, g)
        assert a.union(b).same_ids(b.union(a))
        assert a.intersection(b).same_ids(b.intersection(a))
        assert a.union(a).same_ids(a)
        assert a.intersection(a).same_ids(a)
        assert a.union(b.union(c)).same_ids(a.union(b).union(c))
        assert a.intersection(b.intersection(c)).same_ids(
            a.intersection(b).intersection(c))
        assert a.difference(a).is_empty()
        u = universe(g)
        assert a.union(b).node_ids <= u.node_ids
