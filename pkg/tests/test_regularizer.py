import logging
import random

import numpy as np
import pytest

from bugloc.embeddings import EmbeddingTable
from bugloc.errors import ParseError, ValidationError
from bugloc.network import HeteroNetwork, TypedNode
from bugloc.regularizer import (
    RepresentationModel,
    SolverConfig,
    clamped_digest,
    closed_form_solve,
    dump_model,
    energy,
    initialize_representation,
    load_model,
    solve,
    sweep_update,
)
from netgen import components, random_network

T1 = TypedNode("T", "t1")
T2 = TypedNode("T", "t2")
B1 = TypedNode("B", "b1")
S1 = TypedNode("S", "s1.java")


def _pair_net():
    net = HeteroNetwork()
    net.add_edge(T1, B1, 2.0)
    table = EmbeddingTable(1, {"t1": np.array([1.0])})
    return net, table


def _weighted_net():
    net = HeteroNetwork()
    net.add_edge(T1, B1, 3.0)
    net.add_edge(T2, B1, 1.0)
    table = EmbeddingTable(1, {"t1": np.array([1.0]), "t2": np.array([0.0])})
    return net, table


class TestInitialize:
    def test_clamps_known_terms_and_zeros_the_rest(self):
        net, table = _pair_net()
        net.add_edge(TypedNode("T", "oov"), B1, 1.0)
        model = initialize_representation(net, table)
        assert model.clamped == frozenset({T1})
        np.testing.assert_array_equal(model.vector(T1), [1.0])
        np.testing.assert_array_equal(model.vector(B1), [0.0])
        np.testing.assert_array_equal(model.vector(TypedNode("T", "oov")), [0.0])

    def test_clamped_vector_is_a_copy(self):
        net, table = _pair_net()
        model = initialize_representation(net, table)
        model.vectors[T1][0] = 99.0
        assert table.vectors["t1"][0] == 1.0


class TestSweepAndEnergy:
    def test_single_neighbor_snaps_to_it(self):
        net, table = _pair_net()
        model = initialize_representation(net, table)
        disp = sweep_update(model, net)
        np.testing.assert_array_equal(model.vector(B1), [1.0])
        assert disp == 1.0

    def test_weighted_average(self):
        net, table = _weighted_net()
        model = initialize_representation(net, table)
        sweep_update(model, net)
        assert model.vector(B1)[0] == 0.75

    def test_clamped_nodes_never_move(self):
        net, table = _weighted_net()
        model = initialize_representation(net, table)
        for _ in range(5):
            sweep_update(model, net)
        np.testing.assert_array_equal(model.vector(T1), [1.0])
        np.testing.assert_array_equal(model.vector(T2), [0.0])

    def test_energy_counts_each_edge_once(self):
        net = HeteroNetwork()
        net.add_edge(T1, B1, 2.0)
        model = RepresentationModel(
            dim=1,
            vectors={T1: np.array([1.0]), B1: np.array([0.5])},
            clamped=frozenset(),
        )
        assert energy(model, net) == 0.5  # 2.0 * (1.0 - 0.5)^2

    def test_energy_of_edgeless_network_is_zero(self):
        net = HeteroNetwork()
        net.add_node(T1)
        model = RepresentationModel(dim=1, vectors={T1: np.array([1.0])}, clamped=frozenset())
        assert energy(model, net) == 0.0


class TestSolve:
    def test_chain_converges_to_clamp(self):
        net = HeteroNetwork()
        net.add_edge(T1, B1, 1.0)
        net.add_edge(B1, S1, 1.0)
        table = EmbeddingTable(1, {"t1": np.array([1.0])})
        model = solve(net, table, SolverConfig(max_iters=50, tolerance=1e-12))
        assert model.convergence.converged
        np.testing.assert_allclose(model.vector(B1), [1.0], atol=1e-12)
        np.testing.assert_allclose(model.vector(S1), [1.0], atol=1e-12)

    def test_weighted_fixed_point(self):
        net, table = _weighted_net()
        model = solve(net, table)
        assert model.vector(B1)[0] == 0.75

    def test_report_fields(self):
        net, table = _pair_net()
        model = solve(net, table, SolverConfig(max_iters=10, tolerance=1e-9))
        rep = model.convergence
        assert rep.converged and rep.iterations == 2
        assert rep.final_displacement < 1e-9
        assert rep.final_energy == pytest.approx(0.0, abs=1e-15)
        d = rep.to_dict()
        assert d["iterations"] == 2 and d["converged"] is True

    def test_non_convergence_warns(self, caplog):
        net = HeteroNetwork()
        net.add_edge(T1, B1, 1.0)
        net.add_edge(B1, S1, 1.0)
        net.add_edge(TypedNode("B", "b2"), S1, 1.0)
        net.add_edge(TypedNode("T", "t2"), TypedNode("B", "b2"), 1.0)
        table = EmbeddingTable(1, {"t1": np.array([1.0]), "t2": np.array([-1.0])})
        with caplog.at_level(logging.WARNING, logger="bugloc.regularizer"):
            model = solve(net, table, SolverConfig(max_iters=1, tolerance=1e-12))
        assert not model.convergence.converged
        assert "did not converge" in caplog.text

    def test_energy_tracking_is_monotone(self):
        rng = random.Random(4242)
        net, table = random_network(rng)
        model = solve(net, table, SolverConfig(max_iters=200, tolerance=1e-14, track_energy=True))
        energies = model.convergence.energies
        assert len(energies) == model.convergence.iterations
        for prev, nxt in zip(energies, energies[1:]):
            assert nxt <= prev + 1e-12 * max(1.0, abs(prev))

    def test_isolated_component_stays_zero_with_diagnostic(self):
        net = HeteroNetwork()
        net.add_edge(T1, B1, 1.0)
        b2, s2 = TypedNode("B", "b2"), TypedNode("S", "s2.java")
        net.add_edge(b2, s2, 1.0)
        table = EmbeddingTable(1, {"t1": np.array([1.0])})
        model = solve(net, table)
        np.testing.assert_array_equal(model.vector(b2), [0.0])
        np.testing.assert_array_equal(model.vector(s2), [0.0])
        assert len(model.diagnostics) == 1
        assert model.convergence.isolated_components
        direct = closed_form_solve(net, table)
        np.testing.assert_array_equal(direct.vector(b2), [0.0])
        assert direct.diagnostics == model.diagnostics

    def test_config_validation(self):
        net, table = _pair_net()
        with pytest.raises(ValidationError):
            solve(net, table, SolverConfig(max_iters=0))
        with pytest.raises(ValidationError):
            solve(net, table, SolverConfig(tolerance=0.0))


class TestClosedForm:
    def test_weighted_fixed_point(self):
        net, table = _weighted_net()
        model = closed_form_solve(net, table)
        assert model.vector(B1)[0] == 0.75

    def test_matches_iterative_solver_on_random_networks(self):
        rng = random.Random(1312)
        for _ in range(25):
            net, table = random_network(rng)
            iterative = solve(net, table, SolverConfig(max_iters=20000, tolerance=1e-10))
            direct = closed_form_solve(net, table)
            for node in net.nodes:
                np.testing.assert_allclose(
                    iterative.vector(node), direct.vector(node), atol=1e-6
                )

    def test_free_node_guard(self):
        net, table = _weighted_net()
        net.add_edge(B1, S1, 1.0)
        with pytest.raises(ValidationError, match="free nodes"):
            closed_form_solve(net, table, max_free=1)


class TestInvariants:
    def test_clamped_vectors_bit_identical_after_solve(self):
        rng = random.Random(777)
        for _ in range(5):
            net, table = random_network(rng)
            model = solve(net, table, SolverConfig(max_iters=5000, tolerance=1e-10))
            for node in model.clamped:
                np.testing.assert_array_equal(model.vector(node), table.vectors[node.key])

    def test_solution_within_clamped_range_per_component(self):
        rng = random.Random(888)
        for _ in range(10):
            net, table = random_network(rng)
            model = solve(net, table, SolverConfig(max_iters=5000, tolerance=1e-10))
            for comp in components(net):
                clamped = [n for n in comp if n in model.clamped]
                if not clamped:
                    continue
                lo = np.min([model.vector(n) for n in clamped], axis=0)
                hi = np.max([model.vector(n) for n in clamped], axis=0)
                for node in comp:
                    assert np.all(model.vector(node) >= lo - 1e-8)
                    assert np.all(model.vector(node) <= hi + 1e-8)

    def test_initialization_does_not_change_the_fixed_point(self):
        rng = random.Random(999)
        net, table = random_network(rng)
        cfg = SolverConfig(max_iters=50000, tolerance=1e-12)
        base = solve(net, table, cfg)
        init = initialize_representation(net, table)
        for node in init.vectors:
            if node not in init.clamped:
                init.vectors[node] = np.array(
                    [rng.uniform(-5.0, 5.0) for _ in range(table.dim)]
                )
        other = solve(net, table, cfg, initial=init)
        for node in net.nodes:
            np.testing.assert_allclose(base.vector(node), other.vector(node), atol=1e-9)


class TestModelSerialization:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = random.Random(31337)
        net, table = random_network(rng)
        model = solve(net, table, SolverConfig(max_iters=5000, tolerance=1e-10))
        path = tmp_path / "model.tsv"
        dump_model(model, path)
        loaded = load_model(path)
        assert loaded.dim == model.dim
        assert loaded.clamped == model.clamped
        assert set(loaded.vectors) == set(model.vectors)
        for node in model.vectors:
            np.testing.assert_array_equal(loaded.vector(node), model.vector(node))
        assert clamped_digest(loaded) == clamped_digest(model)

    def test_dump_is_deterministic(self, tmp_path):
        net, table = _weighted_net()
        model = solve(net, table)
        p1, p2 = tmp_path / "m1.tsv", tmp_path / "m2.tsv"
        dump_model(model, p1)
        dump_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_tampered_clamped_vector_fails_digest(self, tmp_path):
        net, table = _weighted_net()
        model = solve(net, table)
        path = tmp_path / "model.tsv"
        dump_model(model, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines):
            parts = line.split("\t")
            if len(parts) == 4 and parts[2] == "c":
                parts[3] = "1.5"
                lines[i] = "\t".join(parts)
                break
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="digest"):
            load_model(path)

    def test_bad_flag_and_shape_rejected(self, tmp_path):
        net, table = _weighted_net()
        model = solve(net, table)
        path = tmp_path / "model.tsv"
        dump_model(model, path)
        text = path.read_text(encoding="utf-8")
        bad_flag = tmp_path / "flag.tsv"
        bad_flag.write_text(text.replace("\tf\t", "\tq\t"), encoding="utf-8")
        with pytest.raises(ParseError, match="flag"):
            load_model(bad_flag)
        bad_vec = tmp_path / "vec.tsv"
        bad_vec.write_text(text.replace("\tf\t0.75", "\tf\t0.75 0.25"), encoding="utf-8")
        with pytest.raises(ParseError, match="components"):
            load_model(bad_vec)

    def test_header_node_count_checked(self, tmp_path):
        net, table = _weighted_net()
        model = solve(net, table)
        path = tmp_path / "model.tsv"
        dump_model(model, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="nodes"):
            load_model(path)

    def test_tab_in_key_rejected(self):
        model = RepresentationModel(
            dim=1,
            vectors={TypedNode("S", "bad\tname"): np.array([0.0])},
            clamped=frozenset(),
        )
        with pytest.raises(ValidationError, match="serialized"):
            dump_model(model, "/dev/null")
