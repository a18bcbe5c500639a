import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tcpca.errors import InputError
from tcpca.latent_corr import LatentCorrelation, TruncationProfile, shrink
from tcpca.simulation import chordal_distance
from tcpca.spectral import build_model, eigendecompose, fix_signs, select_rank


def random_corr(p, seed, rank=3):
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((p, rank))
    S = L @ L.T + 0.3 * np.eye(p)
    d = np.sqrt(np.diag(S))
    S = S / np.outer(d, d)
    np.fill_diagonal(S, 1.0)
    return S


def test_identity():
    dec = eigendecompose(np.eye(4))
    np.testing.assert_array_equal(dec.eigenvalues, 1.0)
    Q = dec.eigenvectors
    assert np.all(np.isin(np.abs(Q), [0.0, 1.0]))
    np.testing.assert_array_equal(np.abs(Q).sum(axis=0), 1.0)


def test_two_by_two():
    dec = eigendecompose(np.array([[1, 0.6], [0.6, 1]]))
    np.testing.assert_allclose(dec.eigenvalues, [1.6, 0.4], atol=1e-14)
    np.testing.assert_allclose(dec.eigenvectors[:, 0], np.array([1, 1]) / np.sqrt(2), atol=1e-14)


@given(st.integers(2, 12), st.integers(0, 10_000))
def test_decomposition_invariants(p, seed):
    S = random_corr(p, seed, rank=min(3, p))
    dec = eigendecompose(S)
    Q, lam = dec.eigenvectors, dec.eigenvalues
    assert np.all(np.diff(lam) <= 0)
    assert lam.sum() == pytest.approx(p, abs=1e-10)
    np.testing.assert_allclose(Q.T @ Q, np.eye(p), atol=1e-10)
    assert np.linalg.norm(S - (Q * lam) @ Q.T) <= 1e-8 * p
    # sign rule
    idx = np.argmax(np.abs(Q), axis=0)
    assert np.all(Q[idx, np.arange(p)] > 0)


def test_repeatable():
    S = random_corr(8, 1)
    a, b = eigendecompose(S), eigendecompose(S.copy())
    np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)


def test_fix_signs_tie_takes_first():
    v = fix_signs(np.array([[-0.5], [0.5]]))
    np.testing.assert_array_equal(v[:, 0], [0.5, -0.5])


def test_select_rank_examples():
    assert select_rank([5, 3, 1, 1], "cumvar", 0.8) == 2
    assert select_rank(np.linspace(2, 0.1, 20), "fixed", 4) == 4
    assert select_rank(np.ones(6), "cumvar", 1.0) == 5
    assert select_rank([5, 3, 1, 1], "cumvar", 0.81) == 3


@pytest.mark.parametrize("args", [("cumvar", 0.0), ("cumvar", 1.5), ("fixed", 0), ("fixed", 4), ("fixed", 1.5), ("elbow", 2)])
def test_select_rank_errors(args):
    with pytest.raises(InputError):
        select_rank([4, 3, 2, 1], *args)


def test_build_model_tail_mean():
    ev = np.array([2.5, 2.5] + [0.5] * 18)
    Q = np.eye(20)
    from tcpca.spectral import SpectralDecomposition

    model = build_model(np.eye(20), SpectralDecomposition(ev, Q), 2)
    assert model.residual_variance == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(model.loadings.T @ model.loadings, np.eye(2), atol=1e-10)
    with pytest.raises(InputError):
        build_model(np.eye(20), SpectralDecomposition(ev, Q), 20)


def test_exact_recovery_from_true_matrix():
    rng = np.random.default_rng(4)
    p, r, s2 = 20, 4, 0.01
    W = rng.standard_normal((p, r))
    W *= np.sqrt(1 - s2) / np.linalg.norm(W, axis=1, keepdims=True)
    S = W @ W.T + s2 * np.eye(p)
    V = np.linalg.svd(W, full_matrices=False)[0]
    model = build_model(S, eigendecompose(S), r)
    assert chordal_distance(model.loadings, V) <= 1e-8
    assert model.residual_variance == pytest.approx(s2, abs=1e-12)


@given(st.integers(0, 10_000), st.sampled_from([1e-3, 0.05, 0.2]))
def test_shrunk_spectrum_bounded(seed, nu):
    S = shrink(random_corr(7, seed), nu)
    assert eigendecompose(S).eigenvalues.min() >= nu - 1e-10


def test_reconstruction_error_is_tail_spread():
    S = random_corr(10, 5, rank=4)
    dec = eigendecompose(S)
    errs = []
    for r in range(1, 10):
        model = build_model(S, dec, r)
        err = np.linalg.norm(model.reconstruct() - S)
        tail = dec.eigenvalues[r:]
        assert err == pytest.approx(np.linalg.norm(tail - tail.mean()), abs=1e-10)
        errs.append(err)
    assert np.all(np.diff(errs) <= 1e-12)


def test_scree_last_row():
    rows = eigendecompose(random_corr(6, 0)).scree()
    assert len(rows) == 6 and rows[-1][2] == 1.0
    assert [r[0] for r in rows] == list(range(1, 7))


def test_model_carries_profile_and_ids():
    prof = TruncationProfile(10, np.array([10, 5, 7]), np.array([-np.inf, 0.0, -0.52]))
    sig = LatentCorrelation(random_corr(3, 2, rank=2), 0.001, prof, ("a", "b", "c"))
    model = build_model(sig, eigendecompose(sig), 1)
    assert model.profile is prof and model.feature_ids == ("a", "b", "c")
