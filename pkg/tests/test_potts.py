"""Energy model, modularity, and the four optimizers against small oracles."""

import numpy as np
import pytest

from conftest import factor_panel, random_network, random_partition
from corrnets import network, potts
from corrnets.errors import ConfigError, DataError


def three_node_model():
    """One unit edge between nodes 0 and 1; uniform null gamma * P = 0.5."""
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 0] = 1.0
    J = A - 0.5
    np.fill_diagonal(J, 0.0)
    return potts.EnergyModel(J, gamma=1.0, m=1.0)


def test_partition_requires_contiguous_first_appearance_ids():
    with pytest.raises(DataError):
        potts.Partition(np.array([0, 2, 1]), 3)
    with pytest.raises(DataError):
        potts.Partition(np.array([1, 0]), 2)
    part = potts.Partition.from_labels(["b", "a", "b"])
    np.testing.assert_array_equal(part.assignment, [0, 1, 0])
    assert part.K == 2


def test_partition_views():
    part = potts.Partition.from_labels([0, 0, 1, 2, 1])
    np.testing.assert_array_equal(part.sizes(), [2, 2, 1])
    assert [c.tolist() for c in part.communities()] == [[0, 1], [2, 4], [3]]
    assert part.member_sets(["a", "b", "c", "d", "e"])[1] == frozenset({"c", "e"})
    assert part.same_as(potts.Partition.from_labels("xxyzy"))


def test_hamiltonian_three_node_example():
    model = three_node_model()
    paired = potts.Partition.from_labels([0, 0, 1])
    assert potts.hamiltonian(model, paired) == pytest.approx(-1.0, abs=1e-12)
    merged = potts.Partition.from_labels([0, 0, 0])
    assert potts.hamiltonian(model, merged) == pytest.approx(1.0, abs=1e-12)
    singles = potts.Partition.from_labels([0, 1, 2])
    assert potts.hamiltonian(model, singles) == 0.0


def test_scaled_energy_of_example():
    model = three_node_model()
    part = potts.Partition.from_labels([0, 0, 1])
    assert potts.scaled_energy(model, part) == pytest.approx(0.5, abs=1e-12)


def test_modularity_two_cliques():
    # two disconnected unit-weight 3-cliques, natural split; self-pairs excluded
    A = np.zeros((6, 6))
    for block in (slice(0, 3), slice(3, 6)):
        A[block, block] = 1.0
    np.fill_diagonal(A, 0.0)
    net = network.CorrNetwork([f"C{i}/N" for i in range(6)], A)
    part = potts.Partition.from_labels([0, 0, 0, 1, 1, 1])
    assert potts.modularity(net, part) == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_modularity_is_scaled_energy_at_unit_gamma(rng):
    for self_edges in (False, True):
        for _ in range(50):
            net = random_network(rng.integers(3, 12), rng, self_edges=self_edges)
            part = random_partition(net.n, rng, k_max=4)
            model = potts.EnergyModel.from_network(net, 1.0)
            q = potts.modularity(net, part)
            qs = potts.scaled_energy(model, part)
            assert qs == pytest.approx(q, abs=1e-12)


def test_gamma_rescaling_value():
    assert round(potts.rescale_gamma_self_edges(1.45, 110), 4) == 1.4495
    with pytest.raises(DataError):
        potts.rescale_gamma_self_edges(1.0, 2)


def planted_two_clique_model():
    A = np.zeros((6, 6))
    for block in (slice(0, 3), slice(3, 6)):
        A[block, block] = 1.0
    A[2, 3] = A[3, 2] = 0.2  # weak inter-clique link
    np.fill_diagonal(A, 0.0)
    net = network.CorrNetwork([f"C{i}/N" for i in range(6)], A)
    return potts.EnergyModel.from_network(net, 1.0), net


def test_greedy_recovers_planted_cliques():
    model, _ = planted_two_clique_model()
    part = potts.greedy_minimize(model)
    assert part.same_as(potts.Partition.from_labels([0, 0, 0, 1, 1, 1]))
    best = potts.brute_force(model)
    assert part.energy == pytest.approx(best.energy, abs=1e-12)


def test_greedy_all_positive_coupling_single_community(rng):
    J = rng.uniform(0.1, 1.0, size=(5, 5))
    J = (J + J.T) / 2
    np.fill_diagonal(J, 0.0)
    part = potts.greedy_minimize(potts.EnergyModel(J, 1.0, J.sum() / 2))
    assert part.K == 1


def test_greedy_single_node():
    model = potts.EnergyModel(np.zeros((1, 1)), 1.0, 1.0)
    part = potts.greedy_minimize(model)
    assert part.K == 1 and part.energy == 0.0


def test_anneal_three_node_example():
    part = potts.anneal_minimize(three_node_model(), seed=1)
    assert part.same_as(potts.Partition.from_labels([0, 0, 1]))
    assert part.energy == pytest.approx(-1.0, abs=1e-12)
    assert part.accepted_moves >= 0


def test_anneal_matches_greedy_on_planted():
    model, _ = planted_two_clique_model()
    ann = potts.anneal_minimize(model, seed=3)
    gre = potts.greedy_minimize(model)
    assert ann.same_as(gre)


def test_anneal_deterministic_per_seed():
    model, _ = planted_two_clique_model()
    a = potts.anneal_minimize(model, seed=11)
    b = potts.anneal_minimize(model, seed=11)
    assert a.same_as(b) and a.energy == b.energy


def test_anneal_schedule_validation():
    J = np.eye(2)
    with pytest.raises(ConfigError):
        potts.AnnealSchedule(t0=-1.0).resolved(J)
    with pytest.raises(ConfigError):
        potts.AnnealSchedule(cooling=1.0).resolved(J)
    with pytest.raises(ConfigError):
        potts.AnnealSchedule(moves_per_temp=0).resolved(J)
    t0, cooling, moves, tmin = potts.AnnealSchedule().resolved(J)
    assert (t0, cooling, moves, tmin) == (1.0, 0.995, 100, 1e-4)


def test_spectral_recovers_planted_split():
    model, _ = planted_two_clique_model()
    part = potts.spectral_minimize(model)
    assert part.same_as(potts.Partition.from_labels([0, 0, 0, 1, 1, 1]))


def test_spectral_all_positive_no_split(rng):
    J = rng.uniform(0.1, 0.5, size=(6, 6))
    J = (J + J.T) / 2
    np.fill_diagonal(J, 0.0)
    part = potts.spectral_minimize(potts.EnergyModel(J, 1.0, J.sum() / 2))
    assert part.K == 1


def test_spectral_no_better_than_greedy_in_aggregate(rng):
    wins = 0
    trials = 40
    for _ in range(trials):
        net = random_network(int(rng.integers(4, 9)), rng)
        model = potts.EnergyModel.from_network(net, float(rng.uniform(0.8, 1.6)))
        spec_h = potts.spectral_minimize(model).energy
        greedy_h = potts.greedy_minimize(model).energy
        if spec_h >= greedy_h - 1e-9:
            wins += 1
    assert wins >= trials // 2


def _rgs_oracle(n):
    """All restricted-growth strings by appending one node at a time."""
    if n == 1:
        yield (0,)
        return
    for head in _rgs_oracle(n - 1):
        top = max(head)
        for c in range(top + 2):
            yield head + (c,)


def test_all_partitions_matches_recursive_enumeration():
    for n in (1, 2, 3, 5):
        got = {tuple(int(v) for v in row) for row in potts.all_partitions(n)}
        want = set(_rgs_oracle(n))
        assert got == want
    assert len(potts.all_partitions(8)) == 4140  # Bell number B(8)


def test_brute_force_three_node_example():
    part = potts.brute_force(three_node_model())
    assert part.same_as(potts.Partition.from_labels([0, 0, 1]))
    assert part.energy == pytest.approx(-1.0, abs=1e-12)


def test_brute_force_matches_independent_minimum(rng):
    for _ in range(5):
        n = 6
        J = rng.normal(size=(n, n))
        J = (J + J.T) / 2
        model = potts.EnergyModel(J, 1.0, 1.0)
        best = potts.brute_force(model)
        lows = []
        for rgs in _rgs_oracle(n):
            h = -sum(J[i, j] for i in range(n) for j in range(n)
                     if i != j and rgs[i] == rgs[j])
            lows.append(h)
        assert best.energy == pytest.approx(min(lows), abs=1e-12)


def test_brute_force_size_cap():
    with pytest.raises(DataError):
        potts.brute_force(potts.EnergyModel(np.zeros((13, 13)), 1.0, 1.0))


def test_minimize_dispatch():
    model = three_node_model()
    for name in ("greedy", "anneal", "spectral", "brute"):
        part = potts.minimize(model, heuristic=name, seed=0)
        assert part.method == name
    with pytest.raises(ConfigError):
        potts.minimize(model, heuristic="tabu")


def test_self_pair_energy_shift_is_partition_independent(rng):
    # with self-edges the diagonal contributes the same constant to every H
    pnl = factor_panel([(3, 0.8)], 150, 8)
    net = network.build_network(pnl, 0, 150, include_self_edges=True)
    model = potts.EnergyModel.from_network(net, 1.2)
    parts = [random_partition(net.n, rng, k_max=3) for _ in range(4)]
    diag = -np.sum(np.diag(model.coupling))
    for part in parts:
        via_blocks = potts.hamiltonian(model, part)
        off = model.coupling.copy()
        np.fill_diagonal(off, 0.0)
        manual = -sum(off[i, j] for i in range(net.n) for j in range(net.n)
                      if part.assignment[i] == part.assignment[j]) + diag
        assert via_blocks == pytest.approx(manual, abs=1e-9)


def test_partition_round_trip(tmp_path):
    part = potts.Partition.from_labels([0, 1, 0, 2], energy=-1.5, gamma=1.1,
                                       method="greedy")
    path = tmp_path / "part.csv"
    potts.write_partition(str(path), part, ["A/N", "B/N", "C/N", "D/N"],
                          q_s=0.25, seed=7)
    back, labels, meta = potts.read_partition(str(path))
    assert back.same_as(part)
    assert labels == ["A/N", "B/N", "C/N", "D/N"]
    assert float(meta["gamma"]) == 1.1
    assert back.energy == pytest.approx(-1.5)
