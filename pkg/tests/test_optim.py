"""Adam update math and checkpoint round-trips."""

import numpy as np
import pytest

from lexigraph.optim import Adam, load_params, save_params


class TestAdam:
    def test_first_step_closed_form(self):
        """After one step the update is lr * m_hat / (sqrt(v_hat) + eps)."""
        p = np.array([[1.0, -2.0]])
        g = np.array([[0.5, -0.25]])
        opt = Adam({"p": p}, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8)
        opt.step({"p": g.copy()})
        m_hat = (0.1 * g) / (1 - 0.9)
        v_hat = (0.001 * g * g) / (1 - 0.999)
        expect = np.array([[1.0, -2.0]]) - 0.01 * m_hat / (np.sqrt(v_hat) + 1e-8)
        np.testing.assert_allclose(p, expect, rtol=0, atol=1e-15)

    def test_first_step_is_roughly_lr_times_sign(self):
        p = np.zeros((1, 3))
        opt = Adam({"p": p}, lr=0.01)
        opt.step({"p": np.array([[4.0, -0.3, 1e-4]])})
        np.testing.assert_allclose(p, [[-0.01, 0.01, -0.01]], rtol=1e-3)

    def test_zero_gradient_keeps_fresh_params(self):
        p = np.array([[3.0, 4.0]])
        opt = Adam({"p": p}, lr=0.1)
        opt.step({"p": np.zeros((1, 2))})
        assert opt.t == 1
        np.testing.assert_array_equal(p, [[3.0, 4.0]])

    def test_missing_gradient_treated_as_zero(self):
        p = np.array([[3.0]])
        q = np.array([[5.0]])
        opt = Adam({"p": p, "q": q}, lr=0.1)
        opt.step({"p": np.array([[1.0]])})
        assert p[0, 0] != 3.0
        assert q[0, 0] == 5.0

    def test_descends_quadratic(self):
        p = np.array([[5.0]])
        opt = Adam({"p": p}, lr=0.1)
        for _ in range(300):
            opt.step({"p": 2 * p})
        assert abs(p[0, 0]) < 1e-2

    def test_shape_mismatch_rejected(self):
        opt = Adam({"p": np.zeros((2, 2))})
        with pytest.raises(ValueError):
            opt.step({"p": np.zeros((1, 2))})

    def test_unknown_name_rejected(self):
        opt = Adam({"p": np.zeros((1, 1))})
        with pytest.raises(KeyError):
            opt.step({"q": np.zeros((1, 1))})


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        arrays = {
            "b.weights": rng.normal(size=(3, 5)),
            "a.bias": rng.normal(size=(1, 4)) * 1e-300,
            "z": np.array([[np.pi, -0.0]]),
        }
        path = tmp_path / "model.ckpt"
        save_params(path, arrays)
        loaded = load_params(path)
        assert sorted(loaded) == sorted(arrays)
        for name in arrays:
            assert loaded[name].dtype == np.float64
            assert np.array_equal(
                loaded[name].view(np.uint64), arrays[name].astype(np.float64).view(np.uint64)
            )

    def test_byte_stable(self, tmp_path):
        arrays = {"w": np.arange(6.0).reshape(2, 3)}
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_params(p1, arrays)
        save_params(p2, load_params(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "model.ckpt"
        save_params(path, {"w": np.ones((4, 4))})
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(ValueError):
            load_params(path)
