import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_windows
from oracles import dtw_brute, exact_moments, frechet_diag, n_paths
from pdmsynth.dtw import dtw_distance, mean_pool
from pdmsynth.embedding import train_embedding
from pdmsynth.tsg_metrics import (
    METRIC_NAMES, MetricConfig, MetricsReport, ar_mae, autocorrelation_distance, compute_report,
    contextual_fid, dataset_dtw, discriminative_score, euclidean_distance, fit_ar, frechet_distance,
    marginal_distribution_distance, mean_acf, moment_differences, pair_by_signal, predictive_score,
)
from pdmsynth.tsne import conditional_probabilities, tsne_project


def noise_windows(seed, n=40, l=64, d=2, scale=1.0):
    r = np.random.default_rng(seed)
    return make_windows(scale * r.normal(size=(n, l, d)), bearing_ids=[i % 2 for i in range(n)],
                        faulty=[i % 3 == 0 for i in range(n)])


# -- DTW -----------------------------------------------------------------------

def test_dtw_examples():
    x = np.random.default_rng(0).normal(size=(12, 2))
    assert dtw_distance(x, x) == 0.0
    assert dtw_distance([0, 0, 1, 2], [0, 1, 2]) == 0.0 == dtw_brute([0, 0, 1, 2], [0, 1, 2])
    with pytest.raises(ValueError):
        dtw_distance(np.zeros((0, 1)), np.zeros((3, 1)))


def test_brute_force_oracle_enumerates_all_paths():
    assert n_paths(4, 3) == 25 and n_paths(6, 6) == 1683


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 2), st.integers(0, 2**31 - 1))
@settings(max_examples=150)
def test_dtw_matches_enumeration(n, m, d, seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(n, d)), r.normal(size=(m, d))
    assert abs(dtw_distance(a, b) - dtw_brute(a, b)) <= 1e-9
    assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), abs=1e-12)


def test_mean_pool():
    x = np.arange(10.0)[:, None]
    np.testing.assert_array_equal(mean_pool(x, 5)[:, 0], [0.5, 2.5, 4.5, 6.5, 8.5])
    np.testing.assert_array_equal(mean_pool(x, 4)[:, 0], [1, 4, 7, 9])
    assert mean_pool(np.zeros((2560, 2)), 256).shape == (256, 2)
    assert mean_pool(x, 20) is not None and len(mean_pool(x, 20)) == 10


# -- C-FID -----------------------------------------------------------------------

def test_frechet_closed_form_diagonal():
    mu1, v1, mu2, v2 = [0.0, 1.0], [1.0, 4.0], [2.0, -1.0], [9.0, 0.25]
    got = frechet_distance(mu1, np.diag(v1), mu2, np.diag(v2))
    assert got == pytest.approx(frechet_diag(mu1, v1, mu2, v2), abs=1e-6)
    assert got == pytest.approx(4 + 4 + 4 + 2.25, abs=1e-9)


@given(st.integers(0, 2**31 - 1), st.integers(1, 8))
def test_frechet_diagonal_random(seed, q):
    r = np.random.default_rng(seed)
    mu1, mu2 = r.normal(size=q), r.normal(size=q)
    v1, v2 = r.uniform(0.01, 5, q), r.uniform(0.01, 5, q)
    assert frechet_distance(mu1, np.diag(v1), mu2, np.diag(v2)) == pytest.approx(
        frechet_diag(mu1, v1, mu2, v2), abs=1e-6)


def test_frechet_symmetric_full_covariance(rng):
    A, B = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    S1, S2 = A @ A.T, B @ B.T
    mu = rng.normal(size=4)
    assert frechet_distance(mu, S1, mu, S1) < 1e-6
    assert frechet_distance(mu, S1, 0 * mu, S2) == pytest.approx(frechet_distance(0 * mu, S2, mu, S1), rel=1e-8)


# -- distribution metrics --------------------------------------------------------

def test_mdd_two_bin_example():
    assert marginal_distribution_distance([np.zeros((5, 1))], [np.ones((5, 1))], bins=2) == 1.0


def test_mdd_shuffle_invariant(rng):
    real, synth = noise_windows(0), noise_windows(1, scale=1.3)
    perm = rng.permutation(len(synth))
    assert marginal_distribution_distance(real, synth) == marginal_distribution_distance(
        real, [synth[i] for i in perm])


def test_acd_against_ar1_analytic():
    r = np.random.default_rng(0)
    phi, n, l = 0.95, 200, 2000
    x = np.zeros((n, l))
    e = r.normal(size=(n, l))
    x[:, 0] = e[:, 0] / math.sqrt(1 - phi ** 2)
    for t in range(1, l):
        x[:, t] = phi * x[:, t - 1] + e[:, t]
    ar1 = [v[:, None] for v in x]
    white = [v[:, None] for v in r.normal(size=(n, l))]
    analytic = math.sqrt(sum(phi ** (2 * k) for k in range(1, 11)))
    assert autocorrelation_distance(white, ar1, 10) == pytest.approx(analytic, rel=0.10)
    assert autocorrelation_distance(white, ar1, 10) == autocorrelation_distance(ar1, white, 10)


def test_acf_skips_constant_windows():
    ws = [np.zeros((20, 1)), np.sin(np.arange(20.0))[:, None]]
    acf, skipped = mean_acf(ws, 5)
    assert skipped == 1 and np.all(np.isfinite(acf))


def test_moments_match_exact_oracle():
    g = np.random.default_rng(3).normal(size=4000)
    real, synth = [g[:, None]], [(g ** 3)[:, None]]
    sd, kd = moment_differences(real, synth)
    s1, k1 = exact_moments(g)
    s2, k2 = exact_moments(g ** 3)
    assert sd == pytest.approx(abs(s1 - s2), abs=1e-9)
    assert kd == pytest.approx(abs(k1 - k2), abs=1e-9)


def test_symmetric_fixture_mirror_has_zero_sd():
    v = np.array([-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0])[:, None]
    sd, kd = moment_differences([v], [-v])
    assert sd == 0.0 and kd == 0.0


# -- paired metrics ------------------------------------------------------------------

def test_ed_constant_offset():
    real = make_windows(np.zeros((3, 4, 2)))
    synth = make_windows(np.full((3, 4, 2), 3.0))
    assert euclidean_distance(real, synth) == pytest.approx(3 * math.sqrt(8), abs=1e-12)
    assert euclidean_distance(real, real) == 0.0
    assert euclidean_distance(synth, real) == euclidean_distance(real, synth)


def test_pairing_errors():
    a = make_windows(np.zeros((3, 4, 1)))
    with pytest.raises(ValueError, match="equal counts"):
        euclidean_distance(a, a[:2])
    b = make_windows(np.zeros((3, 4, 1)), faulty=[True, False, False])
    with pytest.raises(ValueError, match="histograms"):
        euclidean_distance(a, b)


def test_pairing_follows_window_index_within_groups(rng):
    real = noise_windows(5, n=12)
    shuffled = [real[i] for i in rng.permutation(12)]
    assert euclidean_distance(real, shuffled) == 0.0
    assert dataset_dtw(real, shuffled) == 0.0
    assert all(real[i].key == shuffled[j].key for i, j in [(i, j) for i, j in pair_by_signal(real, shuffled)])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_mdd_and_ed_monotone_in_perturbation(seed):
    real = noise_windows(seed, n=30)
    r = np.random.default_rng(100 + seed)
    base = r.normal(size=(30, 64, 2))
    mdd, ed = [], []
    for s in (0.0, 0.25, 0.5, 1.0, 2.0):
        synth = make_windows([w.values + s * b for w, b in zip(real, base)],
                             bearing_ids=[w.bearing_id for w in real], faulty=[w.is_faulty for w in real])
        mdd.append(marginal_distribution_distance(real, synth))
        ed.append(euclidean_distance(real, synth))
    assert all(np.diff(mdd) >= 0) and all(np.diff(ed) >= 0)


# -- DS / PS -----------------------------------------------------------------------

def test_ds_identity_and_offset():
    real = noise_windows(0)
    assert discriminative_score(real, list(real)) < 0.1
    off = make_windows([w.values + 10.0 for w in real])
    assert discriminative_score(real, off) > 0.4
    with pytest.raises(ValueError):
        discriminative_score(real[:4], real[:4])


def test_ps_sine_and_noise():
    t = np.arange(128)
    sines = [np.sin(0.3 * t + ph)[:, None] for ph in np.linspace(0, 3, 10)]
    # a sinusoid obeys x_t = 2cos(w) x_{t-1} - x_{t-2}; that exact AR(2) predictor is the floor
    ar2 = np.zeros((1, 17))
    ar2[0, 15], ar2[0, 14] = 2 * math.cos(0.3), -1.0
    assert ar_mae(ar2, sines) < 1e-12
    matched = predictive_score(sines, sines)
    assert matched < 0.01
    noise = [v[:, None] for v in np.random.default_rng(0).normal(size=(10, 128))]
    assert predictive_score(sines, noise) > matched


def test_ps_identity_matches_real_baseline():
    real = noise_windows(1)
    baseline = ar_mae(fit_ar(real), real)
    assert predictive_score(real, list(real)) == pytest.approx(baseline, rel=0.10)


# -- embedding and report ------------------------------------------------------------

@pytest.fixture(scope="module")
def enc_and_real():
    real = noise_windows(9, n=60)
    return train_embedding(real, q=4, seed=0, epochs=8), real


def test_embedding_trains_and_is_deterministic(enc_and_real):
    enc, real = enc_and_real
    assert enc.loss_history[-1] < enc.loss_history[0]
    assert np.array_equal(enc.encode(real), enc.encode(real))
    assert enc.encode(real).shape == (60, 4)
    assert train_embedding(real[:20], seed=0, epochs=1).q == 16


def test_cfid_identity(enc_and_real):
    enc, real = enc_and_real
    assert contextual_fid(real, list(real), enc) < 1e-6


def test_report_identity_law_and_schema(enc_and_real):
    enc, real = enc_and_real
    synth = list(reversed(real))
    rep = compute_report(real, synth, enc, MetricConfig(q=4, max_lag=20))
    d = rep.to_dict()
    assert d["schema_version"] == 1 and all(k in d for k in METRIC_NAMES)
    for k in ("mdd", "acd", "ed", "sd", "kd", "c_fid", "dtw"):
        assert d[k] < 1e-6, k
    assert d["ds"] < 0.1
    with pytest.raises(ValueError):
        MetricsReport(0.6, 0, 0, 0, 0, 0, 0, 0, 0).validate()


# -- t-SNE -------------------------------------------------------------------------

def _silhouette(y, labels):
    D = np.sqrt(((y[:, None] - y[None]) ** 2).sum(-1))
    s = []
    for i in range(len(y)):
        same = labels == labels[i]
        a = D[i, same & (np.arange(len(y)) != i)].mean()
        b = D[i, ~same].mean()
        s.append((b - a) / max(a, b))
    return float(np.mean(s))


@pytest.fixture(scope="module")
def clusters():
    r = np.random.default_rng(0)
    x = np.vstack([r.normal(0, 1, (40, 10)), r.normal(8, 1, (40, 10))])
    return x, np.r_[np.zeros(40), np.ones(40)]


def test_tsne_separates_clusters_and_is_deterministic(clusters):
    x, labels = clusters
    a = tsne_project(x, perplexity=10, iterations=500, seed=0)
    b = tsne_project(x, perplexity=10, iterations=500, seed=0)
    assert np.array_equal(a.embedding, b.embedding)
    assert _silhouette(a.embedding, labels) > 0.5


def test_tsne_kl_settles(clusters):
    x, _ = clusters
    kl = tsne_project(x, perplexity=10, iterations=1000, seed=0).kl_history
    tail = np.diff(kl[-101:])
    assert np.sum(tail <= 0) >= 95


def test_perplexity_bisection_hits_target(clusters):
    x, _ = clusters
    D = ((x[:, None] - x[None]) ** 2).sum(-1)
    P, _ = conditional_probabilities(D, 10.0)
    for i in range(len(x)):
        p = np.delete(P[i], i)
        p = p[p > 0]
        assert -np.sum(p * np.log(p)) == pytest.approx(math.log(10.0), abs=1e-4)


def test_tsne_rejects_infeasible():
    with pytest.raises(ValueError):
        tsne_project(np.zeros((4, 2)), perplexity=1)
    with pytest.raises(ValueError):
        tsne_project(np.random.default_rng(0).normal(size=(10, 2)), perplexity=3)
