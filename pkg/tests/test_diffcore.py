"""Gradient, determinism and serialization tests for the autodiff layer."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mailab import diffcore as dc
from mailab.errors import ConfigError, FormatError, UsageError

EPS = 1e-5
REL_TOL = 1e-4


def fd_gradient(f, arrays, eps=EPS):
    """Central finite differences of a scalar function of float64 arrays.

    Independent oracle: evaluates f twice per entry, never touches the tape.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat, gf = a.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f(arrays)
            flat[i] = orig - eps
            fm = f(arrays)
            flat[i] = orig
            gf[i] = (fp - fm) / (2 * eps)
        grads.append(g)
    return grads


def check_gradients(build, arrays):
    """Compare tape gradients of scalar build(tensors) against fd_gradient."""
    tensors = [dc.parameter(a.copy()) for a in arrays]
    loss = build(tensors)
    loss.backward()

    def f(arrs):
        with dc.no_grad():
            return float(build([dc.as_tensor(a) for a in arrs]).data)

    fd = fd_gradient(f, [a.copy() for a in arrays])
    for t, g_fd in zip(tensors, fd):
        err = np.abs(t.grad - g_fd).max()
        scale = max(np.abs(g_fd).max(), 1e-6)
        assert err / scale < REL_TOL, f"rel err {err / scale:.3e}"


def projected(op, proj):
    """Scalarize an op output with a fixed random projection."""

    def build(tensors):
        return dc.tsum(dc.mul(op(*tensors), proj))

    return build


N_INSTANCES = 20


class TestGradientChecks:
    def test_dense(self):
        rng = np.random.default_rng(0)
        for _ in range(N_INSTANCES):
            x = rng.standard_normal((3, 4))
            w = rng.standard_normal((4, 2))
            b = rng.standard_normal(2)
            proj = rng.standard_normal((3, 2))
            check_gradients(projected(dc.dense, proj), [x, w, b])

    @pytest.mark.parametrize("stride", [1, 2])
    def test_conv2d(self, stride):
        rng = np.random.default_rng(stride)
        for _ in range(N_INSTANCES):
            x = rng.standard_normal((2, 3, 5, 4))
            k = rng.standard_normal((2, 3, 3, 3))
            ho = (5 - 1) // stride + 1
            wo = (4 - 1) // stride + 1
            proj = rng.standard_normal((2, 2, ho, wo))
            check_gradients(
                projected(lambda x_, k_: dc.conv2d(x_, k_, stride), proj), [x, k]
            )

    @pytest.mark.parametrize(
        "op", [dc.relu, dc.tanh, dc.sigmoid], ids=["relu", "tanh", "sigmoid"]
    )
    def test_elementwise(self, op):
        rng = np.random.default_rng(7)
        for _ in range(N_INSTANCES):
            # keep away from relu's kink at 0
            x = rng.standard_normal((4, 5))
            x[np.abs(x) < 1e-3] += 0.1
            proj = rng.standard_normal((4, 5))
            check_gradients(projected(op, proj), [x])

    def test_softmax(self):
        rng = np.random.default_rng(11)
        for _ in range(N_INSTANCES):
            x = rng.standard_normal((3, 6))
            proj = rng.standard_normal((3, 6))
            check_gradients(projected(dc.softmax, proj), [x])

    def test_log_softmax(self):
        rng = np.random.default_rng(12)
        for _ in range(N_INSTANCES):
            x = rng.standard_normal((3, 6))
            proj = rng.standard_normal((3, 6))
            check_gradients(projected(dc.log_softmax, proj), [x])

    def test_cross_entropy(self):
        rng = np.random.default_rng(13)
        for _ in range(N_INSTANCES):
            x = rng.standard_normal((5, 4))
            labels = rng.integers(0, 4, size=5)
            check_gradients(lambda ts: dc.cross_entropy(ts[0], labels), [x])

    def test_gaussian_kl(self):
        rng = np.random.default_rng(14)
        for _ in range(N_INSTANCES):
            mu = rng.standard_normal((3, 5))
            log_sigma = rng.standard_normal((3, 5)) * 0.5
            proj = rng.standard_normal(3)
            check_gradients(
                projected(dc.gaussian_kl, proj), [mu, log_sigma]
            )

    def test_two_layer_net(self):
        # spec-level check: a random 2-layer net, all parameters at once
        rng = np.random.default_rng(15)
        x = rng.standard_normal((4, 6))
        w1 = rng.standard_normal((6, 5))
        b1 = rng.standard_normal(5)
        w2 = rng.standard_normal((5, 2))
        b2 = rng.standard_normal(2)
        labels = rng.integers(0, 2, size=4)

        def build(ts):
            x_, w1_, b1_, w2_, b2_ = ts
            h = dc.tanh(dc.dense(x_, w1_, b1_))
            return dc.cross_entropy(dc.dense(h, w2_, b2_), labels)

        check_gradients(build, [x, w1, b1, w2, b2])


class TestTrivialCases:
    def test_dense_identity(self):
        y = dc.dense([[1.0, 0.0]], np.eye(2), np.zeros(2))
        assert np.allclose(y.data, [[1.0, 0.0]])

    def test_dense_scalar_affine(self):
        y = dc.dense(np.array([2.0]), np.array([[3.0]]), np.array([1.0]))
        assert np.allclose(y.data, [7.0])

    def test_dense_shape_mismatch(self):
        with pytest.raises(ConfigError):
            dc.dense(np.zeros((1, 3)), np.zeros((4, 2)), np.zeros(2))

    def test_conv_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((1, 6, 6))
        k = np.zeros((1, 1, 3, 3))
        k[0, 0, 1, 1] = 1.0
        y = dc.conv2d(x, k, stride=1)
        assert np.array_equal(y.data, x)

    def test_conv_zero_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 5, 5))
        y = dc.conv2d(x, np.zeros((3, 2, 3, 3)), stride=1)
        assert np.array_equal(y.data, np.zeros((3, 5, 5)))

    def test_conv_channel_mismatch(self):
        with pytest.raises(ConfigError):
            dc.conv2d(np.zeros((2, 5, 5)), np.zeros((3, 4, 3, 3)), stride=1)

    def test_conv_matches_naive_loops_exactly(self):
        # integer-valued inputs make every partial sum exact, so any
        # summation order gives bit-identical results
        rng = np.random.default_rng(42)
        x = rng.integers(-4, 5, size=(2, 3, 4, 4)).astype(np.float64)
        k = rng.integers(-3, 4, size=(2, 3, 3, 3)).astype(np.float64)
        for stride in (1, 2):
            got = dc.conv2d(x, k, stride=stride).data
            expect = naive_conv(x, k, stride)
            assert np.array_equal(got, expect)

    def test_conv_output_size(self):
        for h in (3, 4, 5, 7, 32):
            x = np.zeros((1, 1, h, h))
            for stride in (1, 2):
                y = dc.conv2d(x, np.zeros((1, 1, 3, 3)), stride=stride)
                expect = -(-h // stride)  # ceil
                assert y.shape == (1, 1, expect, expect)

    def test_sigmoid_zero(self):
        assert dc.sigmoid(np.array(0.0)).item() == 0.5

    def test_softmax_uniform(self):
        y = dc.softmax(np.zeros(4))
        assert np.allclose(y.data, 0.25)

    def test_relu_values(self):
        assert dc.relu(np.array(-3.0)).item() == 0.0
        assert dc.relu(np.array(3.0)).item() == 3.0

    def test_square_gradient(self):
        x = dc.parameter(np.array(3.0))
        loss = dc.mul(x, x)
        loss.backward()
        assert np.isclose(x.grad, 6.0)

    def test_sigmoid_cross_entropy_gradient_at_zero(self):
        # loss = -log(sigmoid(logit)) at logit 0, label 1 -> dlogit = -0.5
        logit = dc.parameter(np.array(0.0))
        loss = dc.neg(dc.log(dc.sigmoid(logit)))
        loss.backward()
        assert np.isclose(logit.grad, -0.5)

    def test_backward_requires_scalar(self):
        x = dc.parameter(np.zeros(3))
        with pytest.raises(UsageError):
            dc.relu(x).backward()


def naive_conv(x, k, stride):
    """Six-loop reference convolution (zero padding 1), test-local oracle."""
    n, c, h, w = x.shape
    ko = k.shape[0]
    ho = -(-h // stride)
    wo = -(-w // stride)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, ko, ho, wo), dtype=x.dtype)
    for b in range(n):
        for o in range(ko):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for di in range(3):
                        for dj in range(3):
                            for ch in range(c):
                                acc += (
                                    xp[b, ch, i * stride + di, j * stride + dj]
                                    * k[o, ch, di, dj]
                                )
                    out[b, o, i, j] = acc
    return out


class TestInvariants:
    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((50, 7))  # float64
        y = dc.softmax(x).data
        assert np.abs(y.sum(axis=-1) - 1.0).max() < 1e-9

    def test_log_softmax_consistency(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((50, 7))
        ls = dc.log_softmax(x).data
        ref = np.log(dc.softmax(x).data)
        assert np.abs(ls - ref).max() < 1e-9

    @given(st.lists(st.floats(-30, 30), min_size=2, max_size=8))
    @settings(max_examples=50, deadline=None)
    def test_sigmoid_strictly_inside_unit_interval(self, xs):
        y = dc.sigmoid(np.array(xs, dtype=np.float64)).data
        assert np.all(y > 0) and np.all(y < 1)

    def test_forward_backward_bitwise_deterministic(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((4, 3, 6, 6)).astype(np.float32)
        k = rng.standard_normal((2, 3, 3, 3)).astype(np.float32)
        w = rng.standard_normal((2 * 6 * 6, 3)).astype(np.float32)
        b = rng.standard_normal(3).astype(np.float32)
        labels = rng.integers(0, 3, size=4)

        def run():
            kp = dc.parameter(k.copy())
            wp = dc.parameter(w.copy())
            bp = dc.parameter(b.copy())
            h = dc.relu(dc.conv2d(x, kp, stride=1))
            flat = dc.reshape(h, (4, -1))
            loss = dc.cross_entropy(dc.dense(flat, wp, bp), labels)
            loss.backward()
            return loss.data.tobytes(), kp.grad.tobytes(), wp.grad.tobytes()

        assert run() == run()

    def test_backward_rerun_after_zeroing_is_identical(self):
        rng = np.random.default_rng(6)
        x = dc.parameter(rng.standard_normal((3, 4)))
        w = dc.parameter(rng.standard_normal((4, 2)))
        loss = dc.tsum(dc.tanh(dc.matmul(x, w)))
        loss.backward()
        first = (x.grad.copy(), w.grad.copy())
        for t in (x, w, loss):
            t.zero_grad()
        loss.backward()
        assert np.array_equal(first[0], x.grad)
        assert np.array_equal(first[1], w.grad)

    def test_finite_outputs_on_finite_inputs(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((16, 10)).astype(np.float32) * 50
        w = dc.parameter(rng.standard_normal((10, 4)).astype(np.float32))
        b = dc.parameter(np.zeros(4, dtype=np.float32))
        probs = dc.softmax(dc.dense(x, w, b))
        loss = dc.tmean(dc.neg(dc.log(dc.clip(probs, 1e-7, 1 - 1e-7))))
        loss.backward()
        assert np.isfinite(probs.data).all()
        assert np.isfinite(w.grad).all()


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        ps = dc.ParamSet("net")
        p = ps.add("w", dc.parameter(np.array([1.0, -2.0])))
        p.grad = np.zeros(2)
        opt = dc.Adam([ps], lr=0.1)
        opt.step()
        assert np.array_equal(p.data, [1.0, -2.0])

    def test_first_step_magnitude(self):
        ps = dc.ParamSet("net")
        p = ps.add("w", dc.parameter(np.array(5.0)))
        p.grad = np.array(1.0)
        opt = dc.Adam([ps], lr=0.1)
        opt.step()
        assert np.isclose(p.data, 5.0 - 0.1, atol=1e-6)

    def test_missing_gradient_raises(self):
        ps = dc.ParamSet("net")
        ps.add("w", dc.parameter(np.array(1.0)))
        opt = dc.Adam([ps], lr=0.1)
        with pytest.raises(UsageError):
            opt.step()

    def test_frozen_group_bitwise_invariant(self):
        frozen = dc.ParamSet("enc", frozen=True)
        fp = frozen.add("w", dc.parameter(np.array([1.0, 2.0, 3.0])))
        fp.grad = np.array([10.0, 10.0, 10.0])
        live = dc.ParamSet("head")
        lp = live.add("w", dc.parameter(np.array([1.0])))
        before = frozen.byte_digest()
        opt = dc.Adam([frozen, live], lr=0.5)
        rng = np.random.default_rng(0)
        for _ in range(100):
            lp.grad = rng.standard_normal(1)
            fp.grad = rng.standard_normal(3)
            opt.step()
        assert frozen.byte_digest() == before

    def test_step_count_increments(self):
        ps = dc.ParamSet("net")
        p = ps.add("w", dc.parameter(np.array(0.0)))
        opt = dc.Adam([ps], lr=0.1)
        for expected in (1, 2, 3):
            p.grad = np.array(1.0)
            opt.step()
            assert opt.t == expected


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        arrays = {
            "enc/conv_w": rng.standard_normal((4, 2, 3, 3)).astype(np.float32),
            "enc/fc_b": rng.standard_normal(7).astype(np.float64),
            "head/w": rng.standard_normal((3, 2)).astype(np.float32),
        }
        path = tmp_path / "params.mailparm"
        dc.save_params(path, arrays)
        loaded = dc.load_params(path)
        assert list(loaded) == list(arrays)
        for k, v in arrays.items():
            assert loaded[k].dtype == v.dtype
            assert loaded[k].tobytes() == v.tobytes()

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.mailparm"
        path.write_bytes(b"NOTPARAM" + b"\x00" * 16)
        with pytest.raises(FormatError, match="MAILPARM"):
            dc.load_params(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "params.mailparm"
        dc.save_params(path, {"w": np.ones((4, 4), dtype=np.float32)})
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 9])
        with pytest.raises(FormatError) as err:
            dc.load_params(path)
        assert err.value.offset is not None
