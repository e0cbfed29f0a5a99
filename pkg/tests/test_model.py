import json

import numpy as np
import pytest

from respscreen.errors import DegenerateData, NonFiniteFeature, SingleClass, TooFewUsers
from respscreen.metrics import roc_auc
from respscreen.model import (
    PCA_CUTOFFS,
    GridSpec,
    Standardizer,
    fit_lr,
    fit_pca,
    fit_pipeline,
    fit_svm_rbf,
    grid_search,
    load_pipeline,
    lr_loss_grad,
    pipeline_from_dict,
    pipeline_to_dict,
    rbf_kernel,
    resolve_gamma,
    save_pipeline,
)

from .oracles import svm_dual_qp_oracle


def blobs(n_per=20, d=5, sep=3.0, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([
        rng.normal(0.0, 1.0, size=(n_per, d)),
        rng.normal(sep, 1.0, size=(n_per, d)),
    ])
    y = np.array([0] * n_per + [1] * n_per)
    return X, y


class TestStandardizer:
    def test_transform(self):
        X = np.array([[1.0, 10.0], [3.0, 30.0]])
        Z = Standardizer().fit(X).transform(X)
        assert np.allclose(Z.mean(axis=0), 0.0)
        assert np.allclose(Z.std(axis=0), 1.0)

    def test_constant_column_maps_to_zero(self):
        X = np.array([[5.0, 1.0], [5.0, 2.0]])
        Z = Standardizer().fit(X).transform(X)
        assert np.allclose(Z[:, 0], 0.0)


class TestPca:
    def test_components_orthonormal(self):
        X = np.random.default_rng(1).normal(size=(40, 12))
        pca = fit_pca(X, 0.95)
        G = pca.components @ pca.components.T
        assert np.allclose(G, np.eye(pca.k), atol=1e-8)

    def test_minimal_k_per_cutoff(self):
        rng = np.random.default_rng(2)
        # planted spectrum: variances proportional to [8, 4, 2, 1, ...]
        X = rng.normal(size=(200, 8)) * np.array([8, 4, 2, 1, 0.5, 0.25, 0.1, 0.05])
        mean = X.mean(axis=0)
        _, s, _ = np.linalg.svd(X - mean, full_matrices=False)
        ratio = s**2 / np.sum(s**2)
        cumulative = np.cumsum(ratio)
        for cutoff in PCA_CUTOFFS:
            pca = fit_pca(X, cutoff)
            assert cumulative[pca.k - 1] >= cutoff - 1e-12
            if pca.k > 1:
                assert cumulative[pca.k - 2] < cutoff

    def test_monotone_in_cutoff(self):
        X = np.random.default_rng(3).normal(size=(60, 10))
        ks = [fit_pca(X, c).k for c in PCA_CUTOFFS]
        assert ks == sorted(ks)

    def test_exact_two_dim_example(self):
        # all the variance lies along one axis, so one component suffices
        X = np.array([[t, 0.0] for t in np.linspace(-1, 1, 9)])
        pca = fit_pca(X, 0.95)
        assert pca.k == 1
        assert abs(pca.components[0, 0]) == pytest.approx(1.0)

    def test_reconstruction_captures_variance(self):
        X = np.random.default_rng(4).normal(size=(100, 20))
        pca = fit_pca(X, 0.9)
        Z = pca.transform(X)
        Xr = Z @ pca.components + pca.mean
        resid = np.sum((X - Xr) ** 2)
        total = np.sum((X - X.mean(axis=0)) ** 2)
        assert 1.0 - resid / total >= 0.9 - 1e-12

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateData):
            fit_pca(np.ones((5, 3)), 0.9)


class TestLogisticRegression:
    def test_gradient_norm_at_solution(self):
        X, y = blobs(seed=5)
        clf = fit_lr(X, y, C=1.0)
        _, grad = lr_loss_grad(clf.weights, X, y.astype(float), 1.0)
        assert np.linalg.norm(grad) < 1e-6

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(15, 4))
        y = rng.integers(0, 2, size=15).astype(float)
        y[:2] = [0, 1]
        w = rng.normal(size=5)
        _, grad = lr_loss_grad(w, X, y, C=0.5)
        eps = 1e-6
        for j in range(5):
            e = np.zeros(5)
            e[j] = eps
            lp, _ = lr_loss_grad(w + e, X, y, 0.5)
            lm, _ = lr_loss_grad(w - e, X, y, 0.5)
            assert grad[j] == pytest.approx((lp - lm) / (2 * eps), abs=1e-4)

    def test_separable_high_auc(self):
        X, y = blobs(sep=4.0, seed=7)
        clf = fit_lr(X, y, C=10.0)
        assert roc_auc(clf.decision_scores(X), y) == 1.0

    def test_scores_are_probabilities(self):
        X, y = blobs(seed=8)
        s = fit_lr(X, y).decision_scores(X)
        assert np.all((s >= 0) & (s <= 1))

    def test_row_duplication_invariant(self):
        # mean-based loss: duplicating every row must not change the optimum
        X, y = blobs(n_per=10, seed=9)
        w1 = fit_lr(X, y, C=1.0).weights
        w2 = fit_lr(np.vstack([X, X]), np.concatenate([y, y]), C=1.0).weights
        assert np.allclose(w1, w2, atol=1e-6)

    def test_single_class_raises(self):
        with pytest.raises(SingleClass):
            fit_lr(np.ones((4, 2)), [1, 1, 1, 1])

    def test_non_finite_raises(self):
        X = np.ones((4, 2))
        X[0, 0] = np.nan
        with pytest.raises(NonFiniteFeature):
            fit_lr(X, [0, 1, 0, 1])


class TestSvm:
    def test_xor_against_qp_oracle(self):
        rng = np.random.default_rng(10)
        centers = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
        X = np.vstack([c + rng.normal(0, 0.08, size=(10, 2)) for c in centers])
        y = np.array([0] * 20 + [1] * 20)
        y_pm = 2.0 * y - 1.0
        gamma = 2.0

        clf = fit_svm_rbf(X, y, C=10.0, gamma=gamma)
        _, _, oracle_decision = svm_dual_qp_oracle(X, y_pm, 10.0, gamma)

        grid = np.array([[a, b] for a in np.linspace(-0.3, 1.3, 9)
                         for b in np.linspace(-0.3, 1.3, 9)])
        ours = clf.decision_scores(grid)
        theirs = oracle_decision(grid)
        agree = np.mean(np.sign(ours) == np.sign(theirs))
        assert agree >= 0.95
        acc = np.mean((clf.decision_scores(X) > 0) == (y == 1))
        assert acc == 1.0

    def test_kkt_conditions_on_blobs(self):
        X, y = blobs(n_per=15, d=3, sep=2.0, seed=11)
        C = 1.0
        clf = fit_svm_rbf(X, y, C=C, gamma=0.5)
        y_pm = 2.0 * y - 1.0
        f = clf.decision_scores(X)
        m = y_pm * f  # functional margin
        # reconstruct alpha per training point from the stored SVs
        alpha = np.zeros(len(X))
        for sv, coef in zip(clf.support_vectors, clf.dual_coef):
            idx = np.flatnonzero(np.all(np.isclose(X, sv), axis=1))[0]
            alpha[idx] = abs(coef)
        tol = 2e-3
        assert np.all(m[alpha < 1e-10] >= 1 - tol)  # non-SVs outside margin
        free = (alpha > 1e-10) & (alpha < C - 1e-10)
        assert np.all(np.abs(m[free] - 1) <= tol)  # free SVs on margin
        assert np.all(m[alpha > C - 1e-10] <= 1 + tol)  # bound SVs inside

    def test_dual_objective_matches_oracle(self):
        X, y = blobs(n_per=8, d=2, sep=1.0, seed=12)
        y_pm = 2.0 * y - 1.0
        gamma, C = 0.7, 5.0
        clf = fit_svm_rbf(X, y, C=C, gamma=gamma)
        alpha_o, _, _ = svm_dual_qp_oracle(X, y_pm, C, gamma)
        K = rbf_kernel(X, X, gamma)
        Q = np.outer(y_pm, y_pm) * K

        alpha = np.zeros(len(X))
        for sv, coef in zip(clf.support_vectors, clf.dual_coef):
            idx = np.flatnonzero(np.all(np.isclose(X, sv), axis=1))[0]
            alpha[idx] = abs(coef)

        def dual(a):
            return 0.5 * a @ Q @ a - a.sum()

        assert dual(alpha) <= dual(alpha_o) + 1e-3

    def test_gamma_scale_resolution(self):
        X = np.random.default_rng(13).normal(size=(30, 4))
        g = resolve_gamma("scale", X)
        assert g == pytest.approx(1.0 / (4 * X.var()))
        assert resolve_gamma(0.01, X) == 0.01

    def test_permutation_invariant_decisions(self):
        X, y = blobs(n_per=10, seed=14)
        perm = np.random.default_rng(15).permutation(len(X))
        c1 = fit_svm_rbf(X, y, C=1.0, gamma=0.2)
        c2 = fit_svm_rbf(X[perm], y[perm], C=1.0, gamma=0.2)
        probe = np.random.default_rng(16).normal(size=(20, X.shape[1]))
        # agreement is bounded by the SMO stopping tolerance, not exact
        assert np.allclose(c1.decision_scores(probe), c2.decision_scores(probe), atol=5e-3)

    def test_single_class_raises(self):
        with pytest.raises(SingleClass):
            fit_svm_rbf(np.ones((4, 2)), [0, 0, 0, 0])


class TestGridSearch:
    def users(self, n):
        # two samples per user so folds stay user-disjoint but non-trivial
        return [f"u{i // 2}" for i in range(n)]

    def test_planted_best_cell(self):
        # XOR layout: a near-linear kernel (tiny gamma) cannot rank it, so
        # the moderate gamma must win on inner-fold AUC despite sorting last
        rng = np.random.default_rng(17)
        centers = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
        X = np.vstack([c + rng.normal(0, 0.08, size=(15, 2)) for c in centers])
        y = np.array([0] * 30 + [1] * 30)
        users = self.users(len(X))
        grid = GridSpec(svm_c=(1.0,), svm_gamma=(1e-5, 1.0))
        best = grid_search(X, y, users, "svm-rbf", grid, seed=0)
        assert best == {"C": 1.0, "gamma": 1.0}

    def test_deterministic(self):
        X, y = blobs(n_per=20, d=3, seed=18)
        users = self.users(len(X))
        grid = GridSpec(svm_c=(0.1, 1.0), svm_gamma=("scale", 0.01))
        a = grid_search(X, y, users, "svm-rbf", grid, seed=0)
        b = grid_search(X, y, users, "svm-rbf", grid, seed=0)
        assert a == b

    def test_single_cell_short_circuit(self):
        X, y = blobs(n_per=5, seed=19)
        best = grid_search(X, y, self.users(len(X)), "lr", GridSpec(lr_c=(0.5,)), seed=0)
        assert best == {"C": 0.5}

    def test_too_few_users(self):
        X, y = blobs(n_per=4, seed=20)
        with pytest.raises(TooFewUsers):
            grid_search(X, y, ["u0"] * 4 + ["u1"] * 4, "lr", GridSpec(), seed=0)

    def test_tie_breaks_toward_smaller_c(self):
        # perfectly separable data: every C wins, smallest must be chosen
        X, y = blobs(n_per=30, d=2, sep=10.0, seed=21)
        best = grid_search(X, y, self.users(len(X)), "lr", GridSpec(), seed=0)
        assert best == {"C": 0.01}

    def test_pipeline_mode_runs(self):
        X, y = blobs(n_per=30, d=6, sep=3.0, seed=22)
        best = grid_search(X, y, self.users(len(X)), "lr", GridSpec(lr_c=(0.1, 1.0)),
                           seed=0, pca_cutoff=0.9)
        assert best["C"] in (0.1, 1.0)


class TestPipelinePersistence:
    def make(self, kind):
        X, y = blobs(n_per=12, d=5, seed=23)
        params = {"C": 1.0} if kind == "lr" else {"C": 1.0, "gamma": 0.1}
        return fit_pipeline(X, y, kind, params, pca_cutoff=0.9), X

    @pytest.mark.parametrize("kind", ["lr", "svm-rbf"])
    def test_json_round_trip_exact(self, kind, tmp_path):
        pipe, X = self.make(kind)
        path = tmp_path / "model.json"
        save_pipeline(pipe, path)
        loaded = load_pipeline(path)
        assert np.array_equal(pipe.decision_scores(X), loaded.decision_scores(X))
        # serialization itself is stable
        assert json.dumps(pipeline_to_dict(pipe)) == json.dumps(pipeline_to_dict(loaded))

    def test_version_check(self):
        pipe, _ = self.make("lr")
        d = pipeline_to_dict(pipe)
        d["format_version"] = 99
        with pytest.raises(ValueError):
            pipeline_from_dict(d)
