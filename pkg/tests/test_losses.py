"""Loss functions: frozen hand-computed values, brute-force transport
oracle agreement, gradient checks, and the style-loss axioms."""

from __future__ import annotations

import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from styleswap import autodiff as ad
from styleswap import losses
from styleswap.evaluate import run_sw1d_oracle, sw1d_bruteforce
from conftest import assert_grad_matches_fd


def t64(x):
    return ad.Tensor(np.asarray(x, dtype=np.float64))


def feats(rng, shapes):
    return [ad.Tensor(rng.normal(size=s), dtype=np.float64) for s in shapes]


def projection_min_gap(x: np.ndarray, dirs: np.ndarray) -> float:
    """Smallest gap between any two projected pixels of one batch element
    along one direction.  Finite-difference probes move a projection by at
    most h, so a gap floor keeps the sort permutation fixed."""
    n, c, h, w = x.shape
    pts = x.transpose(0, 2, 3, 1).reshape(n, h * w, c)
    proj = pts @ dirs
    gaps = np.diff(np.sort(proj, axis=1), axis=1)
    return float(gaps.min())


def tie_free_input(rng_seed_start: int, shape, dirs: np.ndarray,
                   min_gap: float = 1e-3) -> np.ndarray:
    for seed in range(rng_seed_start, rng_seed_start + 1000):
        x = np.random.default_rng(seed).normal(size=shape)
        if projection_min_gap(x, dirs) > min_gap:
            return x
    raise AssertionError("no tie-free input found")


def replicate_directions(seed: int, channels: int, k: int) -> np.ndarray:
    """The direction matrix a loss call will draw from a fresh rng(seed)."""
    return losses._unit_directions(channels, k, np.random.default_rng(seed),
                                   np.float64).data


FEATURE_SHAPES = [(2, 3, 6, 6), (2, 4, 4, 4), (2, 5, 3, 3), (2, 6, 2, 2)]
SPEC4 = losses.PerceptualLayerSpec(num_layers=4)


class TestConfigTypes:
    def test_loss_weights_reject_negative(self):
        with pytest.raises(ValueError):
            losses.LossWeights(alpha_rec=-1.0)

    def test_loss_weights_reject_all_zero(self):
        with pytest.raises(ValueError):
            losses.LossWeights(alpha_rec=0, alpha_con=0, alpha_gan=0,
                               alpha_per=0, lambda_style=0)

    def test_layer_spec_defaults(self):
        spec = losses.PerceptualLayerSpec(num_layers=4)
        assert spec.content_layers == (3,)
        assert spec.style_layers == (0, 1, 2)

    def test_layer_spec_rejects_other_selections(self):
        with pytest.raises(ValueError):
            losses.PerceptualLayerSpec(num_layers=4, content_layers=(0,))
        with pytest.raises(ValueError):
            losses.PerceptualLayerSpec(num_layers=4, style_layers=(0, 1, 3))
        with pytest.raises(ValueError):
            losses.PerceptualLayerSpec(num_layers=1)

    def test_swd_config_validation(self):
        with pytest.raises(ValueError):
            losses.SWDConfig(num_projections=0)
        with pytest.raises(ValueError):
            losses.SWDConfig(rng_seed_policy="sometimes")


class TestL1AndReconstruction:
    def test_identical_is_zero(self, rng):
        a = t64(rng.normal(size=(3, 4)))
        assert losses.l1_loss(a, a).item() == 0.0

    def test_frozen_value(self):
        assert losses.l1_loss(t64([0.0, 0.0]), t64([1.0, 3.0])).item() == 2.0

    def test_symmetry(self, rng):
        a, b = t64(rng.normal(size=8)), t64(rng.normal(size=8))
        assert losses.l1_loss(a, b).item() == losses.l1_loss(b, a).item()

    def test_shape_mismatch(self):
        with pytest.raises(ad.ShapeError):
            losses.l1_loss(t64([1.0]), t64([1.0, 2.0]))

    def test_reconstruction_constant_offset(self, rng):
        img = t64(rng.uniform(-0.5, 0.5, size=(2, 3, 4, 4)))
        shifted = ad.Tensor(img.data + 0.25, dtype=np.float64)
        assert losses.reconstruction_loss(img, shifted).item() == pytest.approx(0.25)

    def test_gradient(self, rng):
        b = t64(rng.normal(size=(3, 4)))
        # keep |a-b| away from the kink of |.|
        a0 = b.data + rng.choice([-1.0, 1.0], size=(3, 4)) * rng.uniform(0.2, 1.0, (3, 4))
        assert_grad_matches_fd(lambda t: losses.l1_loss(t, b), a0, tol=1e-6)


class TestConsistency:
    def test_identical_is_zero(self, rng):
        s = SimpleNamespace(content=t64(rng.normal(size=(1, 2, 2, 2))),
                            style=t64(rng.normal(size=(1, 2, 2, 2))))
        assert losses.consistency_loss(s, s).item() == 0.0

    def test_frozen_unit_case(self):
        orig = SimpleNamespace(content=t64([0.0]), style=t64([5.0]))
        reenc = SimpleNamespace(content=t64([1.0]), style=t64([5.0]))
        assert losses.consistency_loss(orig, reenc).item() == 1.0

    def test_matches_two_l1_calls(self, rng):
        orig = SimpleNamespace(content=t64(rng.normal(size=(2, 3))),
                               style=t64(rng.normal(size=(2, 3))))
        reenc = SimpleNamespace(content=t64(rng.normal(size=(2, 3))),
                                style=t64(rng.normal(size=(2, 3))))
        want = (losses.l1_loss(orig.content, reenc.content).item()
                + losses.l1_loss(orig.style, reenc.style).item())
        assert losses.consistency_loss(orig, reenc).item() == pytest.approx(want, rel=1e-12)


class TestGanLog:
    def test_balanced_discriminator_value(self):
        zeros = t64(np.zeros((2, 1, 2, 2)))
        loss = losses.gan_loss_log(zeros, zeros, "discriminator")
        assert loss.item() == pytest.approx(2.0 * math.log(2.0), rel=1e-9)

    def test_perfect_discriminator_approaches_zero(self):
        real = t64(np.full((1, 4), 40.0))
        fake = t64(np.full((1, 4), -40.0))
        assert losses.gan_loss_log(real, fake, "discriminator").item() < 1e-5

    def test_generator_value(self):
        fake = t64(np.zeros(3))
        assert losses.gan_loss_log(None, fake, "generator").item() == \
            pytest.approx(math.log(2.0), rel=1e-9)

    def test_sides_validated(self):
        z = t64([0.0])
        with pytest.raises(ValueError):
            losses.gan_loss_log(None, z, "discriminator")
        with pytest.raises(ValueError):
            losses.gan_loss_log(z, z, "referee")

    def test_gradients(self, rng):
        logits0 = rng.normal(size=(2, 1, 3, 3))
        other = t64(rng.normal(size=(2, 1, 3, 3)))
        assert_grad_matches_fd(
            lambda t: losses.gan_loss_log(t, other, "discriminator"), logits0, tol=1e-6)
        assert_grad_matches_fd(
            lambda t: losses.gan_loss_log(other, t, "discriminator"), logits0, tol=1e-6)
        assert_grad_matches_fd(
            lambda t: losses.gan_loss_log(None, t, "generator"), logits0, tol=1e-6)


class TestGanHinge:
    def test_margins_satisfied_is_zero(self):
        assert losses.gan_loss_hinge(t64([2.0]), t64([-2.0]), "discriminator").item() == 0.0

    def test_zero_logits_value(self):
        assert losses.gan_loss_hinge(t64([0.0]), t64([0.0]), "discriminator").item() == 2.0

    def test_generator_is_negated_mean(self):
        assert losses.gan_loss_hinge(None, t64([3.0]), "generator").item() == -3.0

    def test_dispatch(self):
        z = t64([0.5])
        got = losses.gan_loss(z, z, "discriminator", "hinge").item()
        want = losses.gan_loss_hinge(z, z, "discriminator").item()
        assert got == want
        with pytest.raises(ValueError):
            losses.gan_loss(z, z, "discriminator", "wasserstein")

    def test_gradients(self, rng):
        # keep logits away from the hinge kinks at +-1
        logits0 = rng.choice([-1.0, 1.0], size=(2, 4)) * rng.uniform(1.3, 2.5, (2, 4))
        other = t64(rng.normal(size=(2, 4)) * 0.1)
        assert_grad_matches_fd(
            lambda t: losses.gan_loss_hinge(t, other, "discriminator"), logits0, tol=1e-6)
        assert_grad_matches_fd(
            lambda t: losses.gan_loss_hinge(None, t, "generator"), logits0, tol=1e-6)


class TestContentLoss:
    def test_identical_is_zero(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        assert losses.content_loss(p, p, SPEC4).item() == 0.0

    def test_only_final_layer_counts(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        q = [ad.Tensor(t.data + rng.normal(size=t.shape) * 100.0, dtype=np.float64)
             for t in p[:-1]]
        q.append(ad.Tensor(p[-1].data + 2.0, dtype=np.float64))
        assert losses.content_loss(p, q, SPEC4).item() == pytest.approx(4.0, rel=1e-12)

    def test_layer_count_checked(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        with pytest.raises(ad.ShapeError):
            losses.content_loss(p[:-1], p[:-1], SPEC4)

    def test_gradient(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        x0 = rng.normal(size=FEATURE_SHAPES[-1])

        def f(t):
            q = p[:-1] + [t]
            return losses.content_loss(p, q, SPEC4)

        assert_grad_matches_fd(f, x0, tol=1e-6)


class TestGramMatrix:
    def test_hand_case_against_double_loop(self):
        # two channels over two pixels: c1=[1,0], c2=[0,1]
        f = np.zeros((1, 2, 1, 2))
        f[0, 0, 0, 0] = 1.0
        f[0, 1, 0, 1] = 1.0
        got = losses.gram_matrix(t64(f)).data[0]
        np.testing.assert_allclose(got, [[0.25, 0.0], [0.0, 0.25]], atol=1e-12)
        # independent brute-force double loop
        c, hw = 2, 2
        flat = f.reshape(2, 2)
        want = np.zeros((2, 2))
        for i in range(c):
            for j in range(c):
                for k in range(hw):
                    want[i, j] += flat[i, k] * flat[j, k]
        want /= c * 1 * 2
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_zero_features_zero_matrix(self):
        out = losses.gram_matrix(t64(np.zeros((2, 3, 4, 4))))
        assert not out.data.any()

    def test_symmetric_psd_on_random_inputs(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            n, c = int(rng.integers(1, 3)), int(rng.integers(1, 6))
            h, w = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            g = losses.gram_matrix(t64(rng.normal(size=(n, c, h, w)))).data
            for gi in g:
                np.testing.assert_allclose(gi, gi.T, atol=1e-12)
                eigvals = np.linalg.eigvalsh(gi)
                assert eigvals.min() > -1e-10

    def test_rejects_non_nchw(self):
        with pytest.raises(ad.ShapeError):
            losses.gram_matrix(t64(np.zeros((3, 4, 4))))


class TestGramStyleLoss:
    def test_identical_is_zero(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        assert losses.gram_style_loss(p, p, SPEC4).item() == 0.0

    def test_symmetry(self, rng):
        a, b = feats(rng, FEATURE_SHAPES), feats(rng, FEATURE_SHAPES)
        assert losses.gram_style_loss(a, b, SPEC4).item() == \
            pytest.approx(losses.gram_style_loss(b, a, SPEC4).item(), rel=1e-12)

    def test_final_layer_ignored(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        q = list(p)
        q[-1] = ad.Tensor(p[-1].data + 50.0, dtype=np.float64)
        assert losses.gram_style_loss(p, q, SPEC4).item() == 0.0

    def test_channel_permutation_sensitive_hand_case(self):
        # channels [1,0] and [0,2] swapped: gram diagonals trade places
        spec = losses.PerceptualLayerSpec(num_layers=2)
        a = np.zeros((1, 2, 1, 2))
        a[0, 0, 0, 0] = 1.0
        a[0, 1, 0, 1] = 2.0
        b = a[:, ::-1].copy()
        pad = t64(np.zeros((1, 2, 1, 1)))
        loss = losses.gram_style_loss([t64(a), pad], [t64(b), pad], spec)
        assert loss.item() > 0.1

    def test_gradient(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        x0 = rng.normal(size=FEATURE_SHAPES[1])

        def f(t):
            q = [p[0], t, p[2], p[3]]
            return losses.gram_style_loss(p, q, SPEC4)

        assert_grad_matches_fd(f, x0, tol=1e-6)


class TestSw1d:
    def test_permutation_of_same_set_is_zero(self, rng):
        vals = rng.normal(size=9)
        a = t64(vals)
        b = t64(rng.permutation(vals))
        assert losses.sw1d(a, b).item() == 0.0

    def test_frozen_case_matches_bruteforce(self):
        # both assignments of [0,2] onto [1,3] cost 1.0 and 5.0; sorted wins
        assert sw1d_bruteforce([0.0, 2.0], [1.0, 3.0]) == 1.0
        assert losses.sw1d(t64([0.0, 2.0]), t64([1.0, 3.0])).item() == 1.0

    def test_oracle_sweep_passes(self):
        report = run_sw1d_oracle(cases=200, seed=61104)
        assert report.passed, report.failures
        assert report.cases_run == 200
        assert report.max_rel_err <= 1e-9

    def test_length_mismatch(self):
        with pytest.raises(ad.ShapeError):
            losses.sw1d(t64([1.0]), t64([1.0, 2.0]))
        with pytest.raises(ad.ShapeError):
            losses.sw1d(t64([[1.0]]), t64([[1.0]]))

    @given(st.integers(0, 2 ** 31 - 1),
           st.floats(0.1, 10.0),
           st.floats(-50.0, 50.0))
    @settings(max_examples=100, deadline=None)
    def test_scale_law_and_shift_invariance(self, seed, a, c):
        r = np.random.default_rng(seed)
        n = int(r.integers(2, 12))
        s, sp = r.normal(size=n), r.normal(size=n)
        base = losses.sw1d(t64(s), t64(sp)).item()
        scaled = losses.sw1d(t64(a * s), t64(a * sp)).item()
        assert scaled == pytest.approx(a * a * base, rel=1e-6, abs=1e-12)
        shifted = losses.sw1d(t64(s + c), t64(sp + c)).item()
        assert shifted == pytest.approx(base, rel=1e-6, abs=1e-9)

    def test_gradient_tie_free(self, rng):
        x0 = rng.permutation(np.linspace(-3.0, 3.0, 10))
        other = t64(rng.permutation(np.linspace(-2.5, 3.5, 10)))
        assert_grad_matches_fd(lambda t: losses.sw1d(t, other), x0, tol=1e-6)


class TestSlicedWasserstein:
    CFG = losses.SWDConfig(num_projections=8)

    def test_identical_inputs_zero_for_any_projections(self, rng):
        f = t64(rng.normal(size=(2, 5, 4, 4)))
        for k in (1, 8, 33):
            cfg = losses.SWDConfig(num_projections=k)
            got = losses.sliced_wasserstein(f, f, cfg, np.random.default_rng(0))
            assert got.item() == 0.0

    def test_spatial_permutation_invariance(self, rng):
        f0 = rng.normal(size=(2, 4, 3, 5))
        perm = rng.permutation(15)
        shuffled = f0.reshape(2, 4, 15)[:, :, perm].reshape(2, 4, 3, 5)
        # same directions for both evaluations
        a = losses.sliced_wasserstein(t64(f0), t64(shuffled), self.CFG,
                                      np.random.default_rng(3)).item()
        assert a == pytest.approx(0.0, abs=1e-12)

    def test_single_channel_reduces_to_sw1d(self, rng):
        f = rng.normal(size=(1, 1, 3, 4))
        g = rng.normal(size=(1, 1, 3, 4))
        got = losses.sliced_wasserstein(t64(f), t64(g), self.CFG,
                                        np.random.default_rng(11)).item()
        want = losses.sw1d(t64(f.reshape(-1)), t64(g.reshape(-1))).item()
        assert got == pytest.approx(want, rel=1e-12)

    def test_unequal_pixel_counts_subsampled(self, rng):
        f = t64(rng.normal(size=(1, 3, 4, 4)))
        g = t64(rng.normal(size=(1, 3, 6, 6)))
        got = losses.sliced_wasserstein(f, g, self.CFG, np.random.default_rng(5))
        assert np.isfinite(got.item())
        # identical distributions still reach zero through the subsampler
        big = t64(np.tile(f.data[:, :, :1, :1], (1, 1, 5, 5)))
        small = t64(f.data[:, :, :1, :1].copy())
        zero = losses.sliced_wasserstein(big, small, self.CFG, np.random.default_rng(5))
        assert zero.item() == pytest.approx(0.0, abs=1e-12)

    def test_shape_contract(self, rng):
        f = t64(rng.normal(size=(1, 3, 4, 4)))
        with pytest.raises(ad.ShapeError):
            losses.sliced_wasserstein(f, t64(rng.normal(size=(1, 4, 4, 4))),
                                      self.CFG, np.random.default_rng(0))
        with pytest.raises(ad.ShapeError):
            losses.sliced_wasserstein(f, t64(rng.normal(size=(2, 3, 4, 4))),
                                      self.CFG, np.random.default_rng(0))

    def test_projection_directions_unit_norm(self):
        dirs = losses._unit_directions(17, 64, np.random.default_rng(8), np.float32)
        norms = np.linalg.norm(dirs.data.astype(np.float64), axis=0)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_channel_permutation_of_both_inputs_preserves_distribution(self, rng):
        f0 = rng.normal(size=(1, 6, 4, 4))
        g0 = rng.normal(size=(1, 6, 4, 4)) * 1.5 + 0.3
        perm = rng.permutation(6)
        cfg = losses.SWDConfig(num_projections=32)
        orig = np.array([
            losses.sliced_wasserstein(t64(f0), t64(g0), cfg,
                                      np.random.default_rng(1000 + i)).item()
            for i in range(100)])
        permuted = np.array([
            losses.sliced_wasserstein(t64(f0[:, perm]), t64(g0[:, perm]), cfg,
                                      np.random.default_rng(5000 + i)).item()
            for i in range(100)])
        se = math.sqrt(orig.var(ddof=1) / 100 + permuted.var(ddof=1) / 100)
        assert abs(orig.mean() - permuted.mean()) < 4.0 * se

    def test_gradient_with_fixed_directions(self, rng):
        g = t64(rng.normal(size=(1, 3, 3, 3)))
        dirs = replicate_directions(21, channels=3, k=self.CFG.num_projections)
        x0 = tie_free_input(100, (1, 3, 3, 3), dirs)

        def f(t):
            return losses.sliced_wasserstein(t, g, self.CFG, np.random.default_rng(21))

        assert_grad_matches_fd(f, x0, tol=1e-5)


class TestSwdStyleLoss:
    def test_identical_is_zero(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        got = losses.swd_style_loss(p, p, SPEC4, losses.SWDConfig(8),
                                    np.random.default_rng(0))
        assert got.item() == 0.0

    def test_symmetry(self, rng):
        a, b = feats(rng, FEATURE_SHAPES), feats(rng, FEATURE_SHAPES)
        cfg = losses.SWDConfig(num_projections=16)
        x = losses.swd_style_loss(a, b, SPEC4, cfg, np.random.default_rng(7)).item()
        y = losses.swd_style_loss(b, a, SPEC4, cfg, np.random.default_rng(7)).item()
        assert x == pytest.approx(y, rel=1e-12)

    def test_final_layer_ignored(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        q = list(p)
        q[-1] = ad.Tensor(p[-1].data + 50.0, dtype=np.float64)
        got = losses.swd_style_loss(p, q, SPEC4, losses.SWDConfig(8),
                                    np.random.default_rng(0))
        assert got.item() == 0.0

    def test_two_layer_spec_is_single_call(self, rng):
        spec = losses.PerceptualLayerSpec(num_layers=2)
        a = feats(rng, FEATURE_SHAPES[:2])
        b = feats(rng, FEATURE_SHAPES[:2])
        cfg = losses.SWDConfig(num_projections=8)
        got = losses.swd_style_loss(a, b, spec, cfg, np.random.default_rng(4)).item()
        want = losses.sliced_wasserstein(a[0], b[0], cfg,
                                         np.random.default_rng(4)).item()
        assert got == pytest.approx(want, rel=1e-12)

    def test_gradient(self, rng):
        p = feats(rng, FEATURE_SHAPES)
        # only layer 0 varies; its directions are the first draw from rng(31)
        dirs = replicate_directions(31, channels=FEATURE_SHAPES[0][1], k=6)
        x0 = tie_free_input(300, FEATURE_SHAPES[0], dirs)

        def f(t):
            q = [t, p[1], p[2], p[3]]
            return losses.swd_style_loss(p, q, SPEC4, losses.SWDConfig(6),
                                         np.random.default_rng(31))

        assert_grad_matches_fd(f, x0, tol=1e-5)


class TestCombinations:
    def test_perceptual_lambda_zero(self):
        got = losses.perceptual_loss(t64(3.0), t64(7.0), 0.0)
        assert got.item() == 3.0

    def test_perceptual_frozen_value(self):
        assert losses.perceptual_loss(t64(1.0), t64(2.0), 0.5).item() == 2.0

    def test_perceptual_linear_in_lambda(self, rng):
        c, s = float(rng.uniform(0, 2)), float(rng.uniform(0, 2))
        l1 = losses.perceptual_loss(t64(c), t64(s), 1.0).item()
        l2 = losses.perceptual_loss(t64(c), t64(s), 2.0).item()
        assert l2 - l1 == pytest.approx(s, rel=1e-9, abs=1e-12)

    def test_total_all_ones(self):
        w = losses.LossWeights(alpha_rec=1, alpha_con=1, alpha_gan=1,
                               alpha_per=1, lambda_style=1)
        got = losses.total_domain_loss(t64(1.0), t64(2.0), t64(3.0), t64(4.0), w)
        assert got.item() == 10.0

    def test_total_all_zero_weights_rejected_but_partial_ok(self):
        w = losses.LossWeights(alpha_rec=0, alpha_con=0, alpha_gan=1,
                               alpha_per=0, lambda_style=0)
        got = losses.total_domain_loss(t64(9.0), t64(9.0), t64(2.0), t64(9.0), w)
        assert got.item() == 2.0

    def test_partial_derivatives_equal_weights(self):
        w = losses.LossWeights(alpha_rec=2.0, alpha_con=1.0, alpha_gan=0.5,
                               alpha_per=1.5, lambda_style=1.0)
        parts = [ad.Tensor(np.asarray(v), requires_grad=True, dtype=np.float64)
                 for v in (1.0, 2.0, 3.0, 4.0)]
        with ad.Tape():
            ad.backward(losses.total_domain_loss(*parts, w))
        got = [float(p.grad) for p in parts]
        assert got == [2.0, 1.0, 0.5, 1.5]
