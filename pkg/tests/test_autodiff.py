"""Gradient and semantics checks for the tape engine.

Every primitive is checked against central finite differences through
fd_check, with a random cotangent so non-uniform adjoints are exercised.
"""

import math

import numpy as np
import pytest

from lexigraph import autodiff as ad
from lexigraph.autodiff import Tape


def weighted_loss(out, cotangent):
    return ad.sum_all(ad.mul(out, out.tape.constant(cotangent)))


class TestPrimitiveGradients:
    """Each op matches central differences to 1e-5 in isolation."""

    def check(self, loss_fn, params, seed=0):
        report = ad.fd_check(loss_fn, params, step=1e-5, tolerance=1e-5, num_samples=120, seed=seed)
        assert report.passed, report.failures[:3]
        assert report.num_checked >= min(
            120, sum(np.asarray(v).size for v in params.values())
        )

    def test_matmul(self):
        rng = np.random.default_rng(0)
        cot = rng.normal(size=(3, 4))

        def loss(tape, v):
            return weighted_loss(ad.matmul(v["a"], v["b"]), cot)

        self.check(loss, {"a": rng.normal(size=(3, 5)), "b": rng.normal(size=(5, 4))})

    def test_transpose(self):
        rng = np.random.default_rng(1)
        cot = rng.normal(size=(4, 3))

        def loss(tape, v):
            return weighted_loss(ad.transpose(v["a"]), cot)

        self.check(loss, {"a": rng.normal(size=(3, 4))})

    def test_add_broadcast(self):
        rng = np.random.default_rng(2)
        cot = rng.normal(size=(5, 4))

        def loss(tape, v):
            return weighted_loss(ad.add(v["a"], v["b"]), cot)

        self.check(loss, {"a": rng.normal(size=(5, 4)), "b": rng.normal(size=(1, 4))})

    def test_mul_broadcast(self):
        rng = np.random.default_rng(3)
        cot = rng.normal(size=(5, 4))

        def loss(tape, v):
            return weighted_loss(ad.mul(v["a"], v["b"]), cot)

        self.check(loss, {"a": rng.normal(size=(5, 4)), "b": rng.normal(size=(1, 4))})

    def test_scale(self):
        rng = np.random.default_rng(4)
        cot = rng.normal(size=(3, 3))

        def loss(tape, v):
            return weighted_loss(ad.scale(v["a"], -2.5), cot)

        self.check(loss, {"a": rng.normal(size=(3, 3))})

    def test_concat_cols(self):
        rng = np.random.default_rng(5)
        cot = rng.normal(size=(3, 7))

        def loss(tape, v):
            return weighted_loss(ad.concat_cols(v["a"], v["b"]), cot)

        self.check(loss, {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(3, 3))})

    def test_concat_rows(self):
        rng = np.random.default_rng(6)
        cot = rng.normal(size=(7, 3))

        def loss(tape, v):
            return weighted_loss(ad.concat_rows(v["a"], v["b"]), cot)

        self.check(loss, {"a": rng.normal(size=(4, 3)), "b": rng.normal(size=(3, 3))})

    def test_row_select_with_repeats(self):
        rng = np.random.default_rng(7)
        idx = np.array([0, 2, 2, 4, 1])
        cot = rng.normal(size=(5, 3))

        def loss(tape, v):
            return weighted_loss(ad.row_select(v["a"], idx), cot)

        self.check(loss, {"a": rng.normal(size=(5, 3))})

    def test_segment_weighted_sum(self):
        rng = np.random.default_rng(8)
        seg = np.array([0, 0, 2, 2, 2, 3])
        cot = rng.normal(size=(4, 3))

        def loss(tape, v):
            return weighted_loss(ad.segment_weighted_sum(v["vals"], v["w"], seg, 4), cot)

        self.check(loss, {"vals": rng.normal(size=(6, 3)), "w": rng.normal(size=(6, 1))})

    def test_masked_segment_softmax(self):
        rng = np.random.default_rng(9)
        seg = np.array([0, 0, 0, 1, 1, 3])
        cot = rng.normal(size=(6, 1))

        def loss(tape, v):
            return weighted_loss(ad.masked_segment_softmax(v["s"], seg, 4), cot)

        self.check(loss, {"s": rng.normal(size=(6, 1))})

    def test_leaky_relu(self):
        rng = np.random.default_rng(10)
        cot = rng.normal(size=(4, 4))

        def loss(tape, v):
            return weighted_loss(ad.leaky_relu(v["a"], 0.2), cot)

        self.check(loss, {"a": rng.normal(size=(4, 4))})

    def test_gelu(self):
        rng = np.random.default_rng(11)
        cot = rng.normal(size=(4, 4))

        def loss(tape, v):
            return weighted_loss(ad.gelu(v["a"]), cot)

        self.check(loss, {"a": rng.normal(size=(4, 4))})

    def test_layer_norm(self):
        rng = np.random.default_rng(12)
        cot = rng.normal(size=(4, 6))

        def loss(tape, v):
            return weighted_loss(ad.layer_norm(v["a"], 1e-5), cot)

        self.check(loss, {"a": rng.normal(size=(4, 6))})

    def test_log_softmax(self):
        rng = np.random.default_rng(13)
        cot = rng.normal(size=(4, 5))

        def loss(tape, v):
            return weighted_loss(ad.log_softmax(v["a"]), cot)

        self.check(loss, {"a": rng.normal(size=(4, 5))})

    def test_nll_loss(self):
        rng = np.random.default_rng(14)
        targets = np.array([1, 0, 3, 2])

        def loss(tape, v):
            return ad.nll_loss(ad.log_softmax(v["a"]), targets)

        self.check(loss, {"a": rng.normal(size=(4, 4))})

    def test_sum_all(self):
        def loss(tape, v):
            return ad.sum_all(v["a"])

        self.check(loss, {"a": np.random.default_rng(15).normal(size=(3, 4))})

    def test_rowwise_cosine(self):
        rng = np.random.default_rng(16)
        cot = rng.normal(size=(5, 1))

        def loss(tape, v):
            return weighted_loss(ad.rowwise_cosine(v["a"], v["b"]), cot)

        self.check(loss, {"a": rng.normal(size=(5, 4)), "b": rng.normal(size=(5, 4))})

    def test_composite_chain(self):
        """A stacked expression mixing most ops stays within tolerance."""
        rng = np.random.default_rng(17)
        seg = np.array([0, 0, 1, 2, 2, 2])
        idx = np.array([0, 1, 1, 2, 3, 3])
        targets = np.array([0, 2, 1])

        def loss(tape, v):
            h = ad.gelu(ad.matmul(v["x"], v["w"]))
            sel = ad.row_select(ad.layer_norm(h, 1e-5), idx)
            scores = ad.leaky_relu(ad.matmul(sel, v["a"]), 0.2)
            alpha = ad.masked_segment_softmax(scores, seg, 3)
            agg = ad.segment_weighted_sum(sel, alpha, seg, 3)
            return ad.nll_loss(ad.log_softmax(ad.matmul(agg, v["out"])), targets)

        self.check(
            loss,
            {
                "x": rng.normal(size=(4, 5)),
                "w": rng.normal(size=(5, 6)),
                "a": rng.normal(size=(6, 1)),
                "out": rng.normal(size=(6, 4)),
            },
        )


class TestOpSemantics:
    def test_gelu_values(self):
        """Tanh-approximation values at pinned points."""
        tape = Tape()
        x = tape.leaf([[0.0, 1.0, -1.0]])
        got = ad.gelu(x).value[0]
        expect = []
        for v in (0.0, 1.0, -1.0):
            inner = math.sqrt(2.0 / math.pi) * (v + 0.044715 * v**3)
            expect.append(0.5 * v * (1.0 + math.tanh(inner)))
        np.testing.assert_allclose(got, expect, rtol=0, atol=1e-15)

    def test_leaky_relu_values(self):
        tape = Tape()
        x = tape.leaf([[2.0, -1.0]])
        np.testing.assert_allclose(ad.leaky_relu(x, 0.2).value, [[2.0, -0.2]])

    def test_layer_norm_rows_standardized(self):
        rng = np.random.default_rng(20)
        tape = Tape()
        out = ad.layer_norm(tape.leaf(rng.normal(size=(10, 40)) * 3 + 1), 1e-10).value
        np.testing.assert_allclose(out.mean(axis=1), 0, atol=1e-9)
        np.testing.assert_allclose(out.var(axis=1), 1, atol=1e-9)

    def test_layer_norm_constant_row(self):
        tape = Tape()
        out = ad.layer_norm(tape.leaf([[3.0, 3.0, 3.0]]), 1e-5).value
        np.testing.assert_allclose(out, 0.0)

    def test_segment_softmax_sums_to_one(self):
        rng = np.random.default_rng(21)
        seg = np.repeat(np.arange(10), rng.integers(1, 6, size=10))
        tape = Tape()
        alpha = ad.masked_segment_softmax(tape.leaf(rng.normal(size=(len(seg), 1)) * 5), seg, 10)
        sums = np.zeros(10)
        np.add.at(sums, seg, alpha.value[:, 0])
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)

    def test_segment_softmax_singleton_and_tie(self):
        tape = Tape()
        alpha = ad.masked_segment_softmax(
            tape.leaf([[5.0], [1.5], [1.5]]), np.array([0, 1, 1]), 2
        )
        np.testing.assert_allclose(alpha.value[:, 0], [1.0, 0.5, 0.5], atol=1e-15)

    def test_segment_softmax_extreme_scores_stable(self):
        """Max subtraction keeps large scores finite."""
        tape = Tape()
        alpha = ad.masked_segment_softmax(
            tape.leaf([[1000.0], [999.0], [-1000.0]]), np.array([0, 0, 0]), 1
        )
        assert np.isfinite(alpha.value).all()
        np.testing.assert_allclose(alpha.value.sum(), 1.0, atol=1e-12)

    def test_log_softmax_normalized(self):
        tape = Tape()
        out = ad.log_softmax(tape.leaf([[100.0, 100.5, 99.0], [0.0, 0.0, 0.0]])).value
        np.testing.assert_allclose(np.exp(out).sum(axis=1), 1.0, atol=1e-12)

    def test_segment_weighted_sum_empty_segment_is_zero(self):
        tape = Tape()
        out = ad.segment_weighted_sum(
            tape.leaf([[1.0, 2.0]]), tape.leaf([[2.0]]), np.array([1]), 3
        )
        np.testing.assert_allclose(out.value, [[0.0, 0.0], [2.0, 4.0], [0.0, 0.0]])

    def test_non_finite_rejected(self):
        tape = Tape()
        big = tape.leaf([[1e308, 1e308]])
        with np.errstate(over="ignore"), pytest.raises(FloatingPointError):
            ad.add(big, big)

    def test_shape_mismatch_rejected(self):
        tape = Tape()
        with pytest.raises(ValueError):
            ad.matmul(tape.leaf(np.ones((2, 3))), tape.leaf(np.ones((2, 3))))

    def test_cross_tape_rejected(self):
        t1, t2 = Tape(), Tape()
        with pytest.raises(ValueError):
            ad.add(t1.leaf([[1.0]]), t2.leaf([[1.0]]))


class TestBackward:
    def test_linear_closed_form(self):
        """d(sum(x @ w))/dx is the broadcast row sum of w."""
        tape = Tape()
        x = tape.leaf(np.arange(6.0).reshape(2, 3))
        w = tape.leaf(np.arange(12.0).reshape(3, 4))
        grads = tape.backward(ad.sum_all(ad.matmul(x, w)))
        np.testing.assert_allclose(grads[x], np.tile(w.value.sum(axis=1), (2, 1)))
        np.testing.assert_allclose(grads[w], np.tile(x.value.sum(axis=0)[:, None], (1, 4)))

    def test_unused_leaf_gets_zeros(self):
        tape = Tape()
        used = tape.leaf([[2.0]])
        unused = tape.leaf(np.ones((3, 2)))
        grads = tape.backward(ad.sum_all(ad.scale(used, 3.0)))
        np.testing.assert_allclose(grads[unused], 0.0)
        np.testing.assert_allclose(grads[used], 3.0)

    def test_fanout_accumulates(self):
        tape = Tape()
        x = tape.leaf([[1.5]])
        y = ad.add(ad.scale(x, 2.0), ad.scale(x, 3.0))
        grads = tape.backward(ad.sum_all(y))
        np.testing.assert_allclose(grads[x], 5.0)

    def test_non_scalar_root_rejected(self):
        tape = Tape()
        x = tape.leaf(np.ones((2, 2)))
        with pytest.raises(ValueError):
            tape.backward(ad.scale(x, 1.0))

    def test_deterministic_rebuild(self):
        """The same seeded build gives bit-identical gradients."""

        def build():
            rng = np.random.default_rng(33)
            tape = Tape()
            x = tape.leaf(rng.normal(size=(4, 4)))
            w = tape.leaf(rng.normal(size=(4, 4)))
            loss = ad.nll_loss(
                ad.log_softmax(ad.gelu(ad.matmul(x, w))), np.array([0, 1, 2, 3])
            )
            grads = tape.backward(loss)
            return grads[x].copy(), grads[w].copy()

        gx1, gw1 = build()
        gx2, gw2 = build()
        assert np.array_equal(gx1, gx2)
        assert np.array_equal(gw1, gw2)


class TestFdCheck:
    def test_detects_wrong_gradient(self):
        """A deliberately broken gradient fails the check."""

        def loss(tape, v):
            x = v["x"]
            out = x.tape.emit(x.value**2, (x,), lambda g: (g * 3.0 * x.value,), "bad_square")
            return ad.sum_all(out)

        report = ad.fd_check(loss, {"x": np.array([[1.0, 2.0]])}, num_samples=2)
        assert not report.passed

    def test_reports_sample_count(self):
        def loss(tape, v):
            return ad.sum_all(ad.mul(v["x"], v["x"]))

        report = ad.fd_check(loss, {"x": np.random.default_rng(5).normal(size=(20, 30))})
        assert report.num_checked == 100
        assert report.passed
