import numpy as np
import pytest
from scipy import stats

from jnnts.exceptions import DiagnosticError
from jnnts.inference import (SelectionSummary, align_components, compute_edge_mpp,
                             compute_node_mpp, compute_union_edge_mpp, gelman_rubin,
                             merge_chains, potential_scale_reduction, quantile_edge_lists,
                             summarize)
from jnnts.sampler import PosteriorChain


def fake_chain(node_ind, net_ind, rng=None, q=1):
    node_ind = np.asarray(node_ind, dtype=np.int8)
    net_ind = np.asarray(net_ind, dtype=np.int8)
    T, R, P = net_ind.shape
    rng = rng or np.random.default_rng(0)
    return PosteriorChain(
        eta=rng.standard_normal((T, q)), beta_tilde=np.ones((T, P)),
        gamma=rng.standard_normal((T, P)), theta=rng.standard_normal((T, P)),
        theta_r=rng.standard_normal((T, R, P)), alpha_tilde=np.ones((T, R, P)),
        variances=np.exp(rng.standard_normal((T, 5))), rho=rng.uniform(-0.1, 0.1, T),
        lam=rng.uniform(0, 1.5, T), node_indicator=node_ind, network_indicator=net_ind)


def two_block(T, P=6, swap_every=2):
    """Sub-networks {0,1,2} and {3,4,5} whose labels swap on alternate draws."""
    ind = np.zeros((T, 2, P), dtype=np.int8)
    ind[:, 0, :3] = 1
    ind[:, 1, 3:] = 1
    ind[::swap_every] = ind[::swap_every, ::-1]
    return ind


def test_node_mpp_is_mean_indicator():
    node = np.array([[1, 0, 1], [1, 0, 0], [1, 1, 0], [0, 0, 0]])
    ch = fake_chain(node, np.zeros((4, 1, 3)))
    np.testing.assert_allclose(compute_node_mpp(ch), [0.75, 0.25, 0.25])


def test_mpp_bounds_and_symmetry(rng):
    T, R, P = 50, 3, 7
    net = rng.random((T, R, P)) < 0.4
    ch = fake_chain(rng.random((T, P)) < 0.3, net, rng)
    node = compute_node_mpp(ch)
    edges = compute_edge_mpp(ch)
    union = compute_union_edge_mpp(ch)
    assert np.all((node >= 0) & (node <= 1))
    for m in (*edges, union):
        assert np.all((m >= 0) & (m <= 1))
        np.testing.assert_array_equal(m, m.T)
        assert not np.diag(m).any()


def test_union_edge_mpp_counts_any_component():
    net = np.zeros((2, 2, 3), dtype=np.int8)
    net[0, 0, [0, 1]] = 1
    net[1, 1, [0, 1]] = 1
    net[1, 0, [1, 2]] = 1
    u = compute_union_edge_mpp(fake_chain(np.zeros((2, 3)), net))
    assert u[0, 1] == 1.0
    assert u[1, 2] == 0.5
    assert u[0, 2] == 0.0


def test_alignment_undoes_label_switching():
    net = two_block(40)
    raw = compute_edge_mpp(fake_chain(np.zeros((40, 6)), net), aligned=False)
    assert raw[0, 0, 1] == pytest.approx(0.5)
    aligned = compute_edge_mpp(fake_chain(np.zeros((40, 6)), net))
    got = sorted(tuple(np.flatnonzero(aligned[r].sum(0) > 0)) for r in range(2))
    assert got == [(0, 1, 2), (3, 4, 5)]
    assert aligned.max() == 1.0


def test_alignment_permutations_are_valid(rng):
    net = rng.random((30, 4, 6)) < 0.5
    perm = align_components(net)
    assert perm.shape == (30, 4)
    assert all(sorted(row) == [0, 1, 2, 3] for row in perm.tolist())


def test_alignment_single_component_is_identity():
    perm = align_components(np.ones((5, 1, 3), dtype=bool))
    np.testing.assert_array_equal(perm, 0)


def test_summary_selects_and_verifies():
    T = 40
    node = np.zeros((T, 6), dtype=np.int8)
    node[:, [0, 4]] = 1
    node[: T // 4, 5] = 1
    ch = fake_chain(node, two_block(T))
    s = summarize(ch)
    assert s.selected_nodes == [0, 4]
    assert sorted(sub["nodes"] for sub in s.selected_subnetworks) == [[0, 1, 2], [3, 4, 5]]
    assert (0, 1) in s.selected_edges and (0, 3) not in s.selected_edges
    assert s.uniqueness_verdict == "unique"
    np.testing.assert_allclose(s.beta_hat, node.mean(0))
    # alpha_tilde = 1 on every selected node, so A_hat is the block indicator
    assert s.A_hat[0, 1] == 1.0 and s.A_hat[0, 4] == 0.0


def test_summary_flags_duplicated_supports():
    T, P = 20, 5
    net = np.zeros((T, 2, P), dtype=np.int8)
    net[:, :, :3] = 1
    s = summarize(fake_chain(np.zeros((T, P)), net))
    assert s.uniqueness_verdict == "not-verifiable"


def test_summary_drops_empty_components():
    net = np.zeros((10, 3, 6), dtype=np.int8)
    net[:, 0, :3] = 1
    net[:, 1, 3:] = 1
    s = summarize(fake_chain(np.zeros((10, 6)), net))
    assert s.uniqueness_verdict == "unique"
    assert [] in [sub["nodes"] for sub in s.selected_subnetworks]


def test_summary_round_trip(rng):
    ch = fake_chain(rng.random((20, 6)) < 0.5, two_block(20), rng)
    s = summarize(ch, cutoff=0.4)
    back = SelectionSummary.from_dict(s.to_dict())
    assert back.selected_edges == s.selected_edges
    assert back.cutoff == 0.4
    np.testing.assert_array_equal(back.A_hat, s.A_hat)


def test_summary_rejects_bad_inputs():
    empty = fake_chain(np.zeros((0, 3)), np.zeros((0, 1, 3)))
    with pytest.raises(DiagnosticError):
        summarize(empty)
    with pytest.raises(DiagnosticError):
        compute_node_mpp(empty)
    with pytest.raises(DiagnosticError):
        summarize(fake_chain(np.zeros((3, 3)), np.zeros((3, 1, 3))), cutoff=1.0)


def test_quantile_edge_lists_nested():
    m = np.zeros((5, 5))
    iu = np.triu_indices(5, 1)
    m[iu] = np.linspace(0.05, 1.0, iu[0].size)
    m = m + m.T
    out = quantile_edge_lists(m)
    assert set(out) == {"99%", "98%", "97%"}
    assert set(map(tuple, out["99%"]["edges"])) <= set(map(tuple, out["97%"]["edges"]))
    assert (3, 4) in out["99%"]["edges"]


def test_merge_chains_concatenates(rng):
    a = fake_chain(np.ones((4, 3)), np.zeros((4, 1, 3)), rng)
    b = fake_chain(np.zeros((6, 3)), np.zeros((6, 1, 3)), rng)
    m = merge_chains([a, b])
    assert m.n_draws == 10
    np.testing.assert_allclose(compute_node_mpp(m), 0.4)
    with pytest.raises(DiagnosticError):
        merge_chains([])


def test_gelman_rubin_formula(rng):
    x = rng.standard_normal((3, 50)) + np.array([[0.0], [0.5], [1.0]])
    m, n = x.shape
    W = x.var(axis=1, ddof=1).mean()
    B = n * x.mean(axis=1).var(ddof=1)
    V = (n - 1) / n * W + (m + 1) / (m * n) * B
    assert potential_scale_reduction(x) == pytest.approx(np.sqrt(V / W))


def test_gelman_rubin_identical_chains_below_one(rng):
    x = rng.standard_normal(100)
    r = potential_scale_reduction(np.stack([x, x, x]))
    assert r == pytest.approx(np.sqrt(99 / 100))


def test_gelman_rubin_separated_chains_flagged(rng):
    chains = [fake_chain(np.zeros((200, 3)), np.zeros((200, 1, 3)), rng) for _ in range(2)]
    chains[1].rho[:] += 5.0
    report = gelman_rubin(chains)
    assert report.gr_statistics["rho"] > 1.1
    assert not report.converged()
    assert set(report.to_dict()) >= {"gr_statistics", "trace_summaries", "n_chains"}


def test_gelman_rubin_requirements(rng):
    ch = fake_chain(np.zeros((20, 3)), np.zeros((20, 1, 3)), rng)
    short = fake_chain(np.zeros((5, 3)), np.zeros((5, 1, 3)), rng)
    with pytest.raises(DiagnosticError):
        gelman_rubin([ch])
    with pytest.raises(DiagnosticError):
        gelman_rubin([ch, ch.thin(2)])
    with pytest.raises(DiagnosticError):
        gelman_rubin([short, short])


def test_prior_only_mpp_matches_tail_mass():
    rng = np.random.default_rng(3)
    T, P, lam, sigma = 20000, 3, 0.8, 1.7
    gamma = rng.normal(0.0, np.sqrt(sigma), (T, P))
    ch = fake_chain(np.abs(gamma) > lam, np.zeros((T, 1, P)), rng)
    expected = 2 * (1 - stats.norm.cdf(lam / np.sqrt(sigma)))
    se = np.sqrt(expected * (1 - expected) / T)
    assert np.all(np.abs(compute_node_mpp(ch) - expected) < 4 * se)


def test_gelman_rubin_synthetic_chains(rng):
    far = np.stack([rng.normal(0, 1, 1000), rng.normal(10, 1, 1000)])
    assert potential_scale_reduction(far) > 5
    mixed = rng.normal(0, 1, (4, 1000))
    assert potential_scale_reduction(mixed) < 1.05
