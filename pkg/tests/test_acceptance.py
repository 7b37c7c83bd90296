"""Acceptance suite: one test per shipped guarantee, run with pytest -v.

Each test is self-contained and deterministic; thresholds and tolerances
are stated inline next to the assertion they protect.
"""

import itertools
import time

import numpy as np
import pytest

from conftest import (brute_betweenness, brute_mst_weight, factor_panel,
                      random_network, random_partition, two_scale_network)
from corrnets import (centrality, compare, network, panel, potts, resolution,
                      significance, synth, tree)
from corrnets.potts import Partition


def test_criterion_01_optimizers_reach_global_minimum():
    """Annealing matches brute force on >=99/100 small planted networks,
    greedy on >=90/100, neither ever beats it, all inside 60 seconds."""
    rng = np.random.default_rng(42)
    t_start = time.monotonic()
    anneal_hits = greedy_hits = 0
    for trial in range(100):
        n_groups = int(rng.integers(2, 4))
        sizes = rng.integers(2, 4, size=n_groups).tolist()
        while sum(sizes) > 8:
            sizes[-1] -= 1
        p_in = float(rng.uniform(0.7, 0.95))
        p_out = float(rng.uniform(0.1, 0.4))
        jit = float(rng.uniform(0.0, 0.1))
        net = synth.generate_planted_network(sizes, p_in, p_out, seed=trial,
                                             jitter=jit)
        model = potts.EnergyModel.from_network(net, 1.0)
        h_star = potts.hamiltonian(model, potts.brute_force(model))
        h_anneal = potts.hamiltonian(model, potts.anneal_minimize(model, seed=trial))
        h_greedy = potts.hamiltonian(model, potts.greedy_minimize(model, seed=trial))
        assert h_anneal >= h_star - 1e-9
        assert h_greedy >= h_star - 1e-9
        if h_anneal <= h_star + 1e-9:
            anneal_hits += 1
        if h_greedy <= h_star + 1e-9:
            greedy_hits += 1
    elapsed = time.monotonic() - t_start
    assert anneal_hits >= 99
    assert greedy_hits >= 90
    assert elapsed < 60.0


def test_criterion_02_scaled_energy_equals_modularity_at_unit_resolution():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        n = int(rng.integers(3, 13))
        net = random_network(n, rng)
        part = random_partition(n, rng)
        model = potts.EnergyModel.from_network(net, 1.0)
        assert abs(potts.scaled_energy(model, part)
                   - potts.modularity(net, part)) <= 1e-12


def test_criterion_03_inverse_paired_panels_have_uniform_strengths():
    for seed, groups in [(1, ((3, 0.9), (4, 0.5))),
                         (2, ((5, 0.8),)),
                         (3, ((2, 0.7), (2, 0.6), (3, 0.3)))]:
        pnl = factor_panel(groups, 300, seed)
        for start in (0, 100):
            net = network.build_network(pnl, start, 200)
            n = net.n
            assert np.abs(net.strengths - (n - 2) / 2).max() <= 1e-9
            P = network.null_expectation(net, "ng")
            assert np.abs(P - (n - 2) / (2 * n)).max() <= 1e-9


def test_criterion_04_self_edge_rescaling_reproduces_partitions():
    """Keeping unit self-edges but shrinking gamma by (n+2)(n-2)/n^2 must not
    change the detected partition on uniform-strength panels."""
    assert round(potts.rescale_gamma_self_edges(1.45, 110), 4) == 1.4495
    spec = synth.FactorModelSpec(groups=((4, 0.9), (4, 0.8), (4, 0.7)),
                                 length=800, noise=0.6, seed=7)
    pnl = synth.generate_panel(spec, expand=True)
    seq_plain = network.build_sequence(pnl, 40, 38, include_self_edges=False)
    seq_self = network.build_sequence(pnl, 40, 38, include_self_edges=True)
    gamma = 1.1
    gamma_s = potts.rescale_gamma_self_edges(gamma, seq_plain[0].n)
    assert len(seq_plain) >= 20
    for w in range(20):
        p_plain = potts.greedy_minimize(
            potts.EnergyModel.from_network(seq_plain[w], gamma), seed=w)
        p_self = potts.greedy_minimize(
            potts.EnergyModel.from_network(seq_self[w], gamma_s), seed=w)
        assert compare.norm_vi(p_plain, p_self) == 0.0


def test_criterion_05_vi_metric_properties():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        a = random_partition(50, rng, k_max=8)
        b = random_partition(50, rng, k_max=8)
        c = random_partition(50, rng, k_max=8)
        v_ab = compare.variation_of_information(a, b)
        assert v_ab == compare.variation_of_information(b, a)
        slack = (compare.variation_of_information(a, c)
                 + compare.variation_of_information(c, b) - v_ab)
        assert slack >= -1e-9
    p = random_partition(50, rng)
    assert compare.variation_of_information(p, p) == 0.0
    assert compare.norm_vi(p, p) == 0.0
    singletons = Partition.from_labels(list(range(50)))
    one_block = Partition.from_labels([0] * 50)
    assert compare.norm_vi(singletons, one_block) == pytest.approx(1.0, abs=1e-12)


def test_criterion_06_node_inversion_maps_partitions_onto_themselves():
    """Swapping every instrument with its inverse preserves the detected
    partition (equal energy and zero distance) on 20+ windows."""
    spec = synth.FactorModelSpec(groups=((5, 0.9), (5, 0.85), (5, 0.8)),
                                 length=900, noise=0.5, seed=11)
    pnl = synth.generate_panel(spec, expand=True)
    seq = network.build_sequence(pnl, 40, 40)
    assert len(seq) >= 20
    for w, net in enumerate(seq):
        inv = net.inverse_index()
        model = potts.EnergyModel.from_network(net, 1.0)
        part = potts.greedy_minimize(model, seed=w)
        image = Partition.from_labels(part.assignment[inv].tolist())
        h = potts.hamiltonian(model, part)
        h_image = potts.hamiltonian(model, image)
        assert abs(h - h_image) <= 1e-9 * max(1.0, abs(h))
        assert compare.norm_vi(part, image) == 0.0


def test_criterion_07_two_scale_network_yields_exactly_four_plateaus():
    """The default grid resolves one plateau per hierarchy level, the main
    plateau is the fine split, and brute force agrees inside every plateau."""
    net = two_scale_network()
    sw = resolution.sweep(net, heuristic="greedy", seed=0)
    plateaus = resolution.find_plateaus(sw)
    assert sorted(p.n_communities for p in plateaus) == [1, 2, 4, 8]
    main = resolution.main_plateau(plateaus, net.n)
    assert main is not None and main.n_communities == 4
    for plateau in plateaus:
        for gamma in np.linspace(plateau.gamma_lo, plateau.gamma_hi, 5):
            model = potts.EnergyModel.from_network(net, float(gamma))
            assert plateau.representative.same_as(potts.brute_force(model))


def test_criterion_08_betweenness_matches_path_enumeration():
    rng = np.random.default_rng(8)
    for trial in range(50):
        n = int(rng.integers(3, 8))
        A = rng.uniform(0.05, 0.95, size=(n, n))
        A = (A + A.T) / 2.0
        np.fill_diagonal(A, 0.0)
        net = network.CorrNetwork([f"C{i}/N" for i in range(n)], A)
        d = centrality.distance_matrix(net)
        np.testing.assert_allclose(centrality.betweenness(net),
                                   brute_betweenness(d), atol=1e-12)


def test_criterion_09_positive_spectrum_centrality_identities():
    rng = np.random.default_rng(9)
    for trial in range(30):
        pnl = factor_panel(((3, 0.8), (3, 0.5)), 200, seed=trial)
        net = network.build_network(pnl, 0, 200)
        model = potts.EnergyModel.from_network(net, 1.0)
        vectors = centrality.node_vectors(model)
        J = model.coupling
        w, U = np.linalg.eigh((J + J.T) / 2.0)
        positive = w > 0
        projection = (U[:, positive] * w[positive]) @ U[:, positive].T
        assert np.abs(vectors.vectors @ vectors.vectors.T
                      - projection).max() <= 1e-9
        norms = vectors.norms()
        part = potts.greedy_minimize(model, seed=trial)
        for candidate in (part, random_partition(net.n, rng, k_max=4)):
            y, _, _ = centrality.projected_centrality(vectors, candidate)
            assert np.all(y <= norms + 1e-12)
        inv = net.inverse_index()
        b = centrality.betweenness(net)
        np.testing.assert_allclose(b, b[inv], atol=1e-12)
        np.testing.assert_allclose(norms, norms[inv], rtol=1e-9)
        image = Partition.from_labels(part.assignment[inv].tolist())
        if part.same_as(image):
            y, _, _ = centrality.projected_centrality(vectors, part)
            np.testing.assert_allclose(y, y[inv], rtol=1e-9, atol=1e-12)


def test_criterion_10_mst_matches_exhaustive_minimum_and_single_linkage():
    rng = np.random.default_rng(10)
    for trial in range(50):
        n = int(rng.integers(4, 8))
        d = rng.uniform(0.1, 2.0, size=(n, n))
        d = (d + d.T) / 2.0
        np.fill_diagonal(d, 0.0)
        spanning = tree.mst(d)
        assert abs(spanning.total_weight - brute_mst_weight(d)) <= 1e-9
        merge_heights = np.sort(tree.linkage(d, mode="single").heights())
        edge_weights = np.sort([w for _, _, w in spanning.edges])
        np.testing.assert_allclose(merge_heights, edge_weights, atol=1e-12)


def test_criterion_11_permutation_test_power_calibration_and_sizes():
    """Planted structure is flagged at p < 0.01, pre-shuffled panels stay
    insignificant in >=90% of 50 meta-trials, and shuffled communities stay
    within the largest single-currency group in >=95% of windows."""
    spec = synth.FactorModelSpec(groups=((4, 0.9), (4, 0.85)), length=400,
                                 noise=0.3, seed=21)
    pnl = synth.generate_panel(spec, expand=True)
    bases = tuple(nm for nm in pnl.instruments if nm.endswith("/NUM"))
    shuffle = significance.ShuffleSpec(base_instruments=bases, rules=(),
                                       realizations=100, seed=4)
    report = significance.permutation_test(pnl, shuffle, gamma=1.0, T=100, dt=100)
    assert report.p_value < 0.01
    assert report.observed_mean > report.shuffled_means.mean()

    spec_small = synth.FactorModelSpec(groups=((3, 0.9), (3, 0.85)), length=240,
                                       noise=0.3, seed=33)
    base_pnl = synth.generate_panel(spec_small, expand=True)
    bases_small = tuple(nm for nm in base_pnl.instruments if nm.endswith("/NUM"))
    pre_shuffle = significance.ShuffleSpec(base_instruments=bases_small,
                                           rules=(), realizations=1, seed=999)
    calibrated = 0
    for m in range(50):
        null_pnl = significance.shuffle_panel(base_pnl, pre_shuffle, realization=m)
        trial_spec = significance.ShuffleSpec(base_instruments=bases_small,
                                              rules=(), realizations=19, seed=m)
        r = significance.permutation_test(null_pnl, trial_spec, gamma=1.0,
                                          T=80, dt=80)
        if r.p_value > 0.05:
            calibrated += 1
    assert calibrated >= 45

    rng = np.random.default_rng(55)
    length = 600
    ccys = ["U", "V", "W", "X"]
    base_rows = {c: rng.normal(0.0, 1e-3, length) for c in ccys}
    names = [f"{c}/B" for c in ccys]
    rows = [base_rows[c] for c in ccys]
    rules = []
    for a, b in itertools.combinations(ccys, 2):
        names.append(f"{a}/{b}")
        rows.append(base_rows[a] - base_rows[b])
        rules.append((f"{a}/{b}", f"{a}/B", f"{b}/B"))
    tri = panel.expand_inverses(
        panel.ReturnPanel(names, np.arange(length, dtype=float),
                          np.vstack(rows), 0))
    tri_spec = significance.ShuffleSpec(
        base_instruments=tuple(f"{c}/B" for c in ccys), rules=tuple(rules),
        realizations=1, seed=7)
    cap = len(ccys)  # each currency pairs with at most C - 1 = 4 others
    total = within = 0
    for realization in range(8):
        _, parts = significance.shuffled_partitions(tri, tri_spec, gamma=1.5,
                                                    T=120, dt=120,
                                                    realization=realization)
        for part in parts:
            total += 1
            if np.bincount(part.assignment).max() <= cap:
                within += 1
    assert total == 40
    assert within / total >= 0.95


def test_criterion_12_single_reorganization_is_flagged_once():
    before = Partition.from_labels([0, 0, 0, 1, 1, 1, 2, 2, 2])
    after = Partition.from_labels([0, 1, 2, 0, 1, 2, 0, 1, 2])
    parts = [before] * 15 + [after] * 15
    series = compare.detect_events(parts)
    assert series.flags[4].tolist() == [15]
    assert series.flags[5].tolist() == [15]
    assert series.flags[6].tolist() == []
    constant = compare.detect_events([before] * 12)
    assert all(len(v) == 0 for v in constant.flags.values())


def test_criterion_13_autocorrelation_tracks_stability_and_centrality():
    """a = 1 for untouched communities, mean a falls as planted drift rises,
    and mean a rises across projected-centrality quantile bins."""
    p = Partition.from_labels([0, 0, 1, 1, 2])
    assert np.all(compare.node_autocorrelations([p, p, p], tau=1) == 1.0)

    def drift_sequence(n, steps, rate, seed):
        rng = np.random.default_rng(seed)
        assign = np.repeat(np.arange(3), n // 3)
        parts = [Partition.from_labels(assign.tolist())]
        for _ in range(steps):
            assign = assign.copy()
            n_move = int(round(rate * n))
            if n_move:
                idx = rng.choice(n, size=n_move, replace=False)
                assign[idx] = rng.integers(0, 3, size=n_move)
            parts.append(Partition.from_labels(assign.tolist()))
        return parts

    means = []
    for rate in (0.0, 0.05, 0.1, 0.2, 0.4, 0.8):
        parts = drift_sequence(60, 30, rate, seed=17)
        means.append(float(compare.node_autocorrelations(parts, tau=1).mean()))
    assert all(a >= b - 1e-12 for a, b in zip(means, means[1:]))
    assert means[0] == 1.0 and means[-1] < 0.5

    spec = synth.FactorModelSpec(groups=((5, 0.95), (5, 0.9), (5, 0.15)),
                                 length=800, noise=0.6, seed=29)
    pnl = synth.generate_panel(spec, expand=True)
    seq = network.build_sequence(pnl, 60, 60)
    gamma = 1.3
    parts, y_per_window = [], []
    for w, net in enumerate(seq):
        model = potts.EnergyModel.from_network(net, gamma)
        part = potts.greedy_minimize(model, seed=w)
        parts.append(part)
        records = centrality.compute_roles(net, part, gamma, window=w)
        y_per_window.append(np.array([rec.y for rec in records]))
    autocorr = compare.node_autocorrelations(parts, tau=1)
    _, bin_means, _ = centrality.binned_relation(
        np.concatenate(y_per_window[:-1]), autocorr.ravel(), bins=4)
    assert all(a < b for a, b in zip(bin_means, bin_means[1:]))


def test_criterion_14_greedy_throughput_on_long_sequences():
    """563 windows of 110 nodes detect in under 10 minutes total and under
    one second per window."""
    spec = synth.FactorModelSpec(groups=tuple((5, 0.85) for _ in range(11)),
                                 length=11440, noise=0.6, seed=41)
    pnl = synth.generate_panel(spec, expand=True)
    seq = network.build_sequence(pnl, T=200, dt=20)
    assert len(seq) == 563
    assert seq[0].n == 110
    t_start = time.monotonic()
    slowest = 0.0
    for w, net in enumerate(seq):
        t_window = time.monotonic()
        potts.greedy_minimize(potts.EnergyModel.from_network(net, 1.45), seed=w)
        slowest = max(slowest, time.monotonic() - t_window)
    total = time.monotonic() - t_start
    assert total < 600.0
    assert slowest < 1.0


def test_criterion_15_greedy_and_annealing_agree_on_most_windows():
    spec = synth.FactorModelSpec(groups=((4, 0.9), (4, 0.8), (4, 0.7)),
                                 length=3030, noise=0.7, seed=47)
    pnl = synth.generate_panel(spec, expand=True)
    seq = network.build_sequence(pnl, T=60, dt=30)
    assert len(seq) >= 100
    agree = 0
    for w, net in enumerate(seq[:100]):
        model = potts.EnergyModel.from_network(net, 1.3)
        greedy = potts.greedy_minimize(model, seed=w)
        annealed = potts.anneal_minimize(model, seed=w)
        if compare.norm_vi(greedy, annealed) <= 0.1:
            agree += 1
    assert agree >= 80
