import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multiplex_ltm.analytic import cycle_network, path_network, permutation_duplex, repeated_path
from multiplex_ltm.errors import NetworkValidationError
from multiplex_ltm.network import (
    LayerGraph,
    MultiplexNetwork,
    is_dag,
    is_polytree,
    load_network,
    load_seeds,
    project,
    read_network,
    serialize_network,
    topological_order,
    write_network,
)


class TestValidation:
    def test_unweighted_get_inverse_degree(self):
        g = MultiplexNetwork.from_edge_lists(3, [[(1, 2), (1, 3), (2, 1)]])
        assert g.layers[0].out_weights(1) == (0.5, 0.5)
        assert g.layers[0].out_weights(2) == (1.0,)

    def test_weight_sum_violation(self):
        with pytest.raises(NetworkValidationError, match="weight-sum"):
            MultiplexNetwork.from_edge_lists(3, [[(1, 2, 0.5), (1, 3, 0.4)]])

    def test_near_one_renormalized(self):
        g = MultiplexNetwork.from_edge_lists(3, [[(1, 2, 0.5), (1, 3, 0.5 + 1e-11)]])
        assert sum(g.layers[0].out_weights(1)) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize(
        "edges, msg",
        [
            ([(1, 1)], "self-loop"),
            ([(1, 4)], "dangling"),
            ([(1, 2, 0.5), (1, 2, 0.5)], "duplicate"),
            ([(1, 2, -1.0), (1, 3, 2.0)], "weight"),
        ],
    )
    def test_rejects(self, edges, msg):
        with pytest.raises(NetworkValidationError, match=msg):
            MultiplexNetwork.from_edge_lists(3, [edges])

    def test_mixed_weighted_unweighted(self):
        with pytest.raises(NetworkValidationError):
            MultiplexNetwork.from_edge_lists(3, [[(1, 2, 0.5), (1, 3)]])

    def test_empty_layer_allowed(self):
        g = MultiplexNetwork.from_edge_lists(3, [[(2, 1)], []])
        assert g.has_empty_layer(2)
        assert g.m == 2


class TestDocuments:
    DOC = {
        "n": 3,
        "m": 2,
        "names": ["a", "b", "c"],
        "layers": [
            {"edges": [{"from": "b", "to": "a"}, {"from": "c", "to": "a"}, {"from": "c", "to": "b"}]},
            {"edges": [{"from": 2, "to": 3}], "directed": False},
        ],
    }

    def test_load_names_and_undirected(self):
        g = load_network(json.dumps(self.DOC))
        assert g.layers[0].out_edges(3) == ((1, 0.5), (2, 0.5))
        assert g.layers[1].out_neighbors(3) == (2,)
        assert g.agent_id("c") == 3

    def test_schema_errors(self):
        with pytest.raises(NetworkValidationError, match="schema"):
            load_network("{not json")
        with pytest.raises(NetworkValidationError, match="'m'"):
            load_network({"n": 2, "layers": []})
        with pytest.raises(NetworkValidationError, match="layers"):
            load_network({"n": 2, "m": 2, "layers": [{"edges": []}]})
        with pytest.raises(NetworkValidationError, match="dangling"):
            load_network({"n": 2, "m": 1, "layers": [{"edges": [{"from": "x", "to": 1}]}]})

    def test_file_round_trip(self, tmp_path, six_agent_dag):
        p = tmp_path / "g.json"
        write_network(six_agent_dag, p)
        assert read_network(p) == six_agent_dag

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**31 - 1))
    def test_round_trip_property(self, n, m, seed):
        rng = np.random.default_rng(seed)
        layers = [[(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j and rng.random() < 0.4] for _ in range(m)]
        g = MultiplexNetwork.from_edge_lists(n, layers)
        assert load_network(json.dumps(serialize_network(g))) == g

    def test_seeds(self, six_agent_dag):
        assert load_seeds("[1, 6]", six_agent_dag) == {1, 6}
        with pytest.raises(NetworkValidationError, match="dangling"):
            load_seeds([7], six_agent_dag)
        with pytest.raises(NetworkValidationError):
            load_seeds({"a": 1}, six_agent_dag)


class TestProjection:
    def test_monoplex_unchanged(self):
        g = MultiplexNetwork.from_edge_lists(3, [[(1, 2, 0.3), (1, 3, 0.7)]])
        assert project(g) == g.layers[0]

    def test_repeated_path_projects_to_path(self):
        proj = project(repeated_path(4))
        assert proj == path_network(4).layers[0]
        assert proj.out_weights(2) == (0.5, 0.5)

    def test_permutation_projects_to_cycle(self):
        for N in (5, 8):
            assert project(permutation_duplex(N)) == cycle_network(N).layers[0]

    def test_union_weights(self):
        g = MultiplexNetwork.from_edge_lists(3, [[(1, 2)], [(1, 3)]])
        assert project(g).out_edges(1) == ((2, 0.5), (3, 0.5))


class TestStructure:
    def test_topological_order_parents_first(self, six_agent_dag):
        order = topological_order(six_agent_dag)
        pos = {a: i for i, a in enumerate(order)}
        for layer in six_agent_dag.layers:
            for i, j, _ in layer.edges:
                assert pos[j] < pos[i]

    def test_cycle_detected(self):
        assert topological_order(cycle_network(4)) is None
        assert not is_dag(repeated_path(3))

    def test_polytree(self, six_agent_dag):
        chain = MultiplexNetwork.from_edge_lists(4, [[(2, 1), (3, 2)], [(4, 2)]])
        assert is_polytree(chain)
        assert is_dag(six_agent_dag) and not is_polytree(six_agent_dag)

    def test_layergraph_dense(self):
        W = LayerGraph(3, [(1, 2, 0.25), (1, 3, 0.75)]).weight_matrix()
        assert W[0, 2] == 0.75 and W.sum() == 1.0
