"""Architecture contracts: PCA, block behavior, shapes, parameter counting."""

import numpy as np
import pytest

from ssmfusion import numerics as nm
from ssmfusion.model import (
    InsufficientDataError,
    ModelConfig,
    flop_estimate,
    forward,
    fus_mamba_block,
    init_weights,
    loss_and_logits,
    mspa_mamba_block,
    mspa_ssm,
    param_count,
    pca_apply,
    pca_fit,
    spe_mamba_block,
    ss_mamba_module,
)
from ssmfusion.numerics import Tensor, backward, grad_check


def small_cfg(**kw) -> ModelConfig:
    base = dict(L=1, N_p=5, N=4, C=6, patch=6, routes=4, down_paths=2,
                aux_channels=2, classes=3)
    base.update(kw)
    return ModelConfig(**base).validate()


class TestPca:
    def test_line_through_origin(self):
        # Points on y = 2x, zero-mean: first axis is (1, 2)/sqrt(5).
        xs = np.linspace(-2, 2, 9)
        pts = np.stack([xs, 2 * xs], axis=1)
        model = pca_fit(pts, 2)
        np.testing.assert_allclose(
            model.basis[:, 0], np.array([1.0, 2.0]) / np.sqrt(5.0), atol=1e-12
        )
        assert model.explained_variance[1] == pytest.approx(0.0, abs=1e-12)

    def test_isotropic_variances_close(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((20000, 3))
        model = pca_fit(pts, 3)
        ev = model.explained_variance
        assert ev[0] / ev[-1] < 1.1
        assert np.all(np.diff(ev) <= 1e-12)

    def test_complete_basis_reconstructs(self):
        rng = np.random.default_rng(1)
        pts = rng.standard_normal((50, 6)) * rng.uniform(0.5, 3.0, 6)
        model = pca_fit(pts, 6)
        centered = pts - model.mean
        recon = (centered @ model.basis) @ model.basis.T
        assert np.abs(recon - centered).max() < 1e-5

    def test_orthonormality(self):
        rng = np.random.default_rng(2)
        model = pca_fit(rng.standard_normal((100, 8)), 5)
        gram = model.basis.T @ model.basis
        assert np.abs(gram - np.eye(5)).max() < 1e-6

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            pca_fit(np.ones((3, 8)), 5)

    def test_apply_centering(self):
        rng = np.random.default_rng(3)
        pts = rng.standard_normal((40, 4))
        model = pca_fit(pts, 2)
        cube = np.broadcast_to(model.mean, (3, 3, 4))
        assert np.abs(pca_apply(model, cube)).max() < 1e-12

    def test_apply_identity_basis(self):
        from ssmfusion.model import PcaModel

        model = PcaModel(
            mean=np.array([1.0, 1.0, 1.0, 1.0]),
            basis=np.eye(4),
            explained_variance=np.ones(4),
        )
        out = pca_apply(model, np.array([[1.0, 2.0, 3.0, 4.0]]))
        np.testing.assert_allclose(out, [[0.0, 1.0, 2.0, 3.0]], atol=1e-14)

    def test_reconstruction_error_monotone_in_components(self):
        rng = np.random.default_rng(4)
        cube = rng.standard_normal((6, 6, 8)) * rng.uniform(0.2, 2.0, 8)
        pixels = cube.reshape(-1, 8)
        errs = []
        for k in range(1, 9):
            model = pca_fit(pixels, k)
            proj = pca_apply(model, cube)
            recon = proj @ model.basis.T + model.mean
            errs.append(np.sum((recon - cube) ** 2))
        assert all(errs[i + 1] <= errs[i] + 1e-9 for i in range(len(errs) - 1))


class TestMspaSsm:
    def test_output_shape_all_configs(self):
        rng = np.random.default_rng(5)
        for routes, down in ((2, 0), (2, 2), (4, 0), (4, 2), (4, 4), (6, 2), (6, 4)):
            cfg = small_cfg(routes=routes, down_paths=down)
            w = init_weights(cfg, seed=0, dtype=np.float64)
            X = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
            out = mspa_ssm(X, w, "module0.mspa_h", cfg)
            assert out.shape == (cfg.patch, cfg.patch, cfg.C)

    def test_default_route_scale_assignment(self):
        """routes=4, down=2: stride-2 conv feeds exactly the last two routes."""
        cfg = small_cfg(routes=4, down_paths=2)
        w = init_weights(cfg, seed=1, dtype=np.float64)
        rng = np.random.default_rng(6)
        X = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        base = mspa_ssm(X, w, "module0.mspa_h", cfg).data

        # Perturbing the stride-2 kernel must change the output (the
        # downsampled pair is live)...
        w["module0.mspa_h.dw_s2.k"].data = w["module0.mspa_h.dw_s2.k"].data + 0.5
        changed = mspa_ssm(X, w, "module0.mspa_h", cfg).data
        assert np.abs(changed - base).max() > 1e-9

        # ...but with down_paths=0 the same weights cannot matter.
        cfg0 = small_cfg(routes=4, down_paths=0)
        w0 = init_weights(cfg0, seed=1, dtype=np.float64)
        y0 = mspa_ssm(X, w0, "module0.mspa_h", cfg0).data
        assert np.all(np.isfinite(y0))

    def test_no_downsample_equals_route_sum_oracle(self):
        """down_paths=0: the output is exactly the sum of the four full-res
        route scans of the stride-1 conv map, no interpolation branch."""
        from ssmfusion.model import ssm_params_at
        from ssmfusion.scanroutes import CANONICAL_ROUTES, beta, sigma
        from ssmfusion.ssm import ssm_self

        cfg = small_cfg(routes=4, down_paths=0, patch=5)
        w = init_weights(cfg, seed=2, dtype=np.float64)
        rng = np.random.default_rng(7)
        X = Tensor(rng.standard_normal((5, 5, cfg.C)))
        out = mspa_ssm(X, w, "module0.mspa_h", cfg)
        assert out.shape == (5, 5, cfg.C)

        z1 = nm.depthwise_conv2d(
            X, w["module0.mspa_h.dw_s1.k"], 1, w["module0.mspa_h.dw_s1.b"]
        )
        want = np.zeros((5, 5, cfg.C))
        for i, route in enumerate(CANONICAL_ROUTES[:4]):
            params = ssm_params_at(w, f"module0.mspa_h.route{i}")
            want = want + beta(ssm_self(sigma(z1, route), params), route, 5, 5).data
        np.testing.assert_allclose(out.data, want, atol=1e-12)

    def test_shared_route_params(self):
        cfg = small_cfg(share_route_params=True)
        w = init_weights(cfg, seed=3, dtype=np.float64)
        assert "module0.mspa_h.route0.A" in w
        assert "module0.mspa_h.route1.A" not in w
        rng = np.random.default_rng(8)
        X = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        out = mspa_ssm(X, w, "module0.mspa_h", cfg)
        assert out.shape == X.shape


class TestBlocks:
    def test_zero_weights_zero_output(self):
        cfg = small_cfg()
        w = init_weights(cfg, seed=4, dtype=np.float64)
        for key, tensor in w.items():
            if key.startswith("module0.mspa_h"):
                tensor.data = np.zeros_like(tensor.data)
        rng = np.random.default_rng(9)
        X = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        out = mspa_mamba_block(X, w, "module0.mspa_h", cfg)
        assert np.array_equal(out.data, np.zeros_like(out.data))

    def test_block_shape_preserved(self):
        cfg = small_cfg()
        w = init_weights(cfg, seed=5, dtype=np.float64)
        rng = np.random.default_rng(10)
        X = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        assert mspa_mamba_block(X, w, "module0.mspa_h", cfg).shape == X.shape
        assert spe_mamba_block(X, w, "module0.spe").shape == X.shape

    def test_mspa_block_gradcheck(self):
        cfg = small_cfg(C=4, N=3, patch=4)
        w = init_weights(cfg, seed=6, dtype=np.float64)
        keys = [k for k in w if k.startswith("module0.mspa_h")]
        rng = np.random.default_rng(11)
        X = Tensor(rng.standard_normal((4, 4, 4)), requires_grad=True)
        rep = grad_check(
            lambda: nm.tsum(mspa_mamba_block(X, w, "module0.mspa_h", cfg)),
            [X] + [w[k] for k in keys],
        )
        assert rep.passed, rep

    def test_spe_degenerate_single_pixel(self):
        """At 1x1 the spectral core is literally the pixel-spectrum scan:
        forward kernel on the spectrum plus the un-reversed reverse kernel."""
        from ssmfusion.model import ssm_params_at
        from ssmfusion.model.blocks import spe_ssm
        from ssmfusion.ssm import ssm_self

        cfg = small_cfg(patch=1, down_paths=0)
        w = init_weights(cfg, seed=7, dtype=np.float64)
        rng = np.random.default_rng(12)
        X = Tensor(rng.standard_normal((1, 1, cfg.C)))
        out = spe_mamba_block(X, w, "module0.spe")
        assert out.shape == (1, 1, cfg.C)

        core = spe_ssm(X, w, "module0.spe")
        spectrum = X.data.reshape(cfg.C, 1)
        fwd = ssm_self(Tensor(spectrum), ssm_params_at(w, "module0.spe.dir0"))
        rev = ssm_self(Tensor(spectrum[::-1].copy()), ssm_params_at(w, "module0.spe.dir1"))
        want = fwd.data[:, 0] + rev.data[::-1, 0]
        np.testing.assert_allclose(core.data[0, 0], want, atol=1e-12)

    def test_spe_gradcheck(self):
        cfg = small_cfg(C=4, N=3, patch=3)
        w = init_weights(cfg, seed=8, dtype=np.float64)
        keys = [k for k in w if k.startswith("module0.spe")]
        rng = np.random.default_rng(13)
        X = Tensor(rng.standard_normal((3, 3, 4)), requires_grad=True)
        rep = grad_check(
            lambda: nm.tsum(spe_mamba_block(X, w, "module0.spe")),
            [X] + [w[k] for k in keys],
        )
        assert rep.passed, rep

    def test_spectral_scan_is_channel_order_sensitive(self):
        """Permuting channels and un-permuting outputs is not the identity."""
        cfg = small_cfg()
        w = init_weights(cfg, seed=9, dtype=np.float64)
        rng = np.random.default_rng(14)
        X = rng.standard_normal((cfg.patch, cfg.patch, cfg.C))
        out = spe_mamba_block(Tensor(X), w, "module0.spe").data
        perm = rng.permutation(cfg.C)
        out_perm = spe_mamba_block(Tensor(X[:, :, perm]), w, "module0.spe").data
        un = np.empty_like(out_perm)
        un[:, :, perm] = out_perm
        assert np.abs(un - out).max() > 1e-8

    def test_fus_symmetric_inputs_symmetric_outputs(self):
        cfg = small_cfg()
        w = init_weights(cfg, seed=10, dtype=np.float64)
        # Mirror the x-branch weights onto the h-branch.
        for key in list(w):
            if ".fus." in key and key.endswith(tuple(
                f"_h.{s}" for s in ("W", "b", "k", "gamma", "beta")
            )):
                w[key.replace("_h.", "_x.")].data = w[key].data.copy()
            if ".fus.ssm_h." in key:
                w[key.replace("ssm_h", "ssm_x")].data = w[key].data.copy()
        rng = np.random.default_rng(15)
        F = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        out_h, out_x = fus_mamba_block(F, F, w, "module0.fus")
        assert np.array_equal(out_h.data, out_x.data)

    def test_fus_cross_perturbation_propagates(self):
        cfg = small_cfg()
        w = init_weights(cfg, seed=11, dtype=np.float64)
        rng = np.random.default_rng(16)
        F_h = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        F_x = rng.standard_normal((cfg.patch, cfg.patch, cfg.C))
        out_h, _ = fus_mamba_block(F_h, Tensor(F_x), w, "module0.fus")
        out_h2, _ = fus_mamba_block(F_h, Tensor(F_x + 0.3), w, "module0.fus")
        assert np.abs(out_h2.data - out_h.data).max() > 1e-9

    def test_fus_gradcheck_both_inputs(self):
        cfg = small_cfg(C=3, N=3, patch=3)
        w = init_weights(cfg, seed=12, dtype=np.float64)
        rng = np.random.default_rng(17)
        F_h = Tensor(rng.standard_normal((3, 3, 3)), requires_grad=True)
        F_x = Tensor(rng.standard_normal((3, 3, 3)), requires_grad=True)

        def f():
            a, b = fus_mamba_block(F_h, F_x, w, "module0.fus")
            return nm.tsum(nm.add(a, b))

        rep = grad_check(f, [F_h, F_x])
        assert rep.passed, rep


class TestModule:
    def test_shapes_preserved(self):
        cfg = small_cfg(L=2)
        w = init_weights(cfg, seed=13, dtype=np.float64)
        rng = np.random.default_rng(18)
        H = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        X = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        for i in range(cfg.L):
            H, X = ss_mamba_module(H, X, w, f"module{i}", cfg)
            assert H.shape == X.shape == (cfg.patch, cfg.patch, cfg.C)

    def test_ablation_reduces_to_parallel_spatial_blocks(self):
        cfg = small_cfg(use_spectral=False, use_fusion=False)
        w = init_weights(cfg, seed=14, dtype=np.float64)
        rng = np.random.default_rng(19)
        H = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        X = Tensor(rng.standard_normal((cfg.patch, cfg.patch, cfg.C)))
        mh, mx = ss_mamba_module(H, X, w, "module0", cfg)
        assert np.array_equal(mh.data, mspa_mamba_block(H, w, "module0.mspa_h", cfg).data)
        assert np.array_equal(mx.data, mspa_mamba_block(X, w, "module0.mspa_x", cfg).data)
        assert "module0.spe.lin_in.W" not in w
        assert "module0.fus.lin_in_h.W" not in w


class TestForward:
    def test_logit_shape_and_determinism(self):
        for classes in (2, 3, 5):
            cfg = small_cfg(classes=classes)
            w = init_weights(cfg, seed=15, dtype=np.float64)
            rng = np.random.default_rng(20)
            hsi = rng.standard_normal((cfg.patch, cfg.patch, cfg.N_p))
            aux = rng.standard_normal((cfg.patch, cfg.patch, cfg.aux_channels))
            a = forward(hsi, aux, w, cfg)
            b = forward(hsi, aux, w, cfg)
            assert a.shape == (classes,)
            assert np.array_equal(a.data, b.data)

    def test_seeded_init_bitwise_stable(self):
        cfg = small_cfg()
        w1 = init_weights(cfg, seed=42, dtype=np.float32)
        w2 = init_weights(cfg, seed=42, dtype=np.float32)
        assert sorted(w1) == sorted(w2)
        for k in w1:
            assert np.array_equal(w1[k].data, w2[k].data), k

    def test_stacked_modules_chain(self):
        cfg = small_cfg(L=3)
        w = init_weights(cfg, seed=16, dtype=np.float64)
        rng = np.random.default_rng(21)
        hsi = rng.standard_normal((cfg.patch, cfg.patch, cfg.N_p))
        aux = rng.standard_normal((cfg.patch, cfg.patch, cfg.aux_channels))
        logits = forward(hsi, aux, w, cfg)
        assert logits.shape == (cfg.classes,)
        grads = backward(
            nm.cross_entropy_logits(logits, 0), leaves=[w["module2.fus.lin_out_h.W"]]
        )
        assert np.abs(list(grads.values())[0]).max() > 0

    def test_shape_validation(self):
        cfg = small_cfg()
        w = init_weights(cfg, seed=17, dtype=np.float64)
        with pytest.raises(nm.ShapeError):
            forward(np.ones((3, 3, cfg.N_p)), np.ones((cfg.patch, cfg.patch, 2)), w, cfg)


class TestParamCount:
    @pytest.mark.parametrize(
        "kw",
        [
            {},
            {"routes": 2, "down_paths": 0},
            {"routes": 6, "down_paths": 4},
            {"share_route_params": True},
            {"use_spectral": False},
            {"use_fusion": False},
            {"use_spectral": False, "use_fusion": False},
            {"L": 3, "C": 10, "N": 12, "classes": 7},
        ],
    )
    def test_matches_brute_force_walk(self, kw):
        cfg = small_cfg(**kw)
        w = init_weights(cfg, seed=18, dtype=np.float32)
        assert param_count(cfg) == sum(t.size for t in w.values())

    def test_doubling_width_at_least_quadruples_linear_terms(self):
        def square_linear_weights(cfg):
            w = init_weights(cfg, seed=0, dtype=np.float32)
            return sum(
                t.size
                for k, t in w.items()
                if k.endswith(".W") and t.shape == (cfg.C, cfg.C)
            )

        lo, hi = small_cfg(C=8), small_cfg(C=16)
        assert square_linear_weights(hi) == 4 * square_linear_weights(lo)
        # and the total grows superlinearly with width
        assert param_count(hi) > 2 * param_count(lo)

    def test_independent_of_patch_size(self):
        assert param_count(small_cfg(patch=4)) == param_count(small_cfg(patch=16))

    def test_flop_estimate_scales_with_patch(self):
        assert flop_estimate(small_cfg(patch=16)) > flop_estimate(small_cfg(patch=4))
        assert flop_estimate(small_cfg()) == flop_estimate(small_cfg())


def test_config_validation_errors():
    with pytest.raises(nm.ConfigError):
        ModelConfig(routes=3).validate()
    with pytest.raises(nm.ConfigError):
        ModelConfig(routes=2, down_paths=3).validate()
    with pytest.raises(nm.ConfigError):
        ModelConfig(patch=1, down_paths=1).validate()
    with pytest.raises(nm.ConfigError):
        ModelConfig(classes=1).validate()
    with pytest.raises(nm.ConfigError):
        ModelConfig(interp="cubic").validate()
    with pytest.raises(nm.ConfigError):
        ModelConfig.from_dict({"bogus": 1})


def test_nearest_interp_mode_runs_and_differs():
    rng = np.random.default_rng(23)
    X = Tensor(rng.standard_normal((6, 6, 6)))
    out = {}
    for interp in ("bilinear", "nearest"):
        cfg = small_cfg(interp=interp)
        w = init_weights(cfg, seed=21, dtype=np.float64)
        out[interp] = mspa_ssm(X, w, "module0.mspa_h", cfg).data
    assert out["bilinear"].shape == out["nearest"].shape
    assert np.abs(out["bilinear"] - out["nearest"]).max() > 1e-9


def test_random_negative_a_init():
    cfg = small_cfg(a_init="random")
    w = init_weights(cfg, seed=19, dtype=np.float64)
    for key in w:
        if key.endswith(".A"):
            assert np.all(w[key].data < 0.0)


def test_end_to_end_gradcheck_small():
    """Cross-entropy through the whole model against finite differences."""
    cfg = ModelConfig(
        L=1, N_p=3, N=3, C=3, patch=4, routes=2, down_paths=2,
        aux_channels=2, classes=2,
    ).validate()
    w = init_weights(cfg, seed=20, dtype=np.float64)
    rng = np.random.default_rng(22)
    hsi = rng.standard_normal((4, 4, 3))
    aux = rng.standard_normal((4, 4, 2))

    def f():
        loss, _ = loss_and_logits(hsi, aux, 1, w, cfg)
        return loss

    rep = grad_check(f, list(w.values()), tol=1e-3)
    assert rep.passed, rep
