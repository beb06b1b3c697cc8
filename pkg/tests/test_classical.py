import numpy as np
import pytest

from hqnn import classical as cl
from hqnn.exceptions import ParameterError, ShapeError, TapeError

from oracles import gru_reference, lstm_reference, rnn_reference

FORWARD = {"RNN": cl.rnn_forward, "LSTM": cl.lstm_forward,
           "GRU": cl.gru_forward}
REFERENCE = {"RNN": rnn_reference, "LSTM": lstm_reference,
             "GRU": gru_reference}


def finite_difference_check(loss, arrays, grads, h=1e-5, rtol=1e-5):
    """Assert every analytic gradient matches central differences."""
    for name, arr in arrays.items():
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            lp = loss()
            arr[idx] = orig - h
            lm = loss()
            arr[idx] = orig
            fd = (lp - lm) / (2 * h)
            got = grads[name][idx]
            assert got == pytest.approx(fd, abs=rtol * max(1.0, abs(fd))), \
                f"{name}{idx}: analytic {got} vs fd {fd}"


class TestForwardExamples:
    def test_rnn_zero_weights_fixed_point(self):
        cell = cl.RecurrentCell("RNN", 2, 3, {"W_x": np.zeros((3, 2)),
                                              "W_h": np.zeros((3, 3)),
                                              "b": np.zeros(3)})
        h, _ = cl.rnn_forward(cell, np.ones((4, 2)))
        np.testing.assert_array_equal(h, np.zeros(3))

    def test_rnn_single_step_closed_form(self):
        cell = cl.RecurrentCell("RNN", 1, 1, {"W_x": np.array([[1.0]]),
                                              "W_h": np.array([[0.0]]),
                                              "b": np.array([0.0])})
        h, _ = cl.rnn_forward(cell, np.array([[0.5]]))
        assert h[0] == pytest.approx(np.tanh(0.5), abs=1e-15)

    @pytest.mark.parametrize("kind", ["RNN", "LSTM", "GRU"])
    def test_matches_recursion_oracle(self, kind):
        rng = np.random.default_rng(13)
        cell = cl.RecurrentCell.initialize(kind, 4, 3, rng)
        window = rng.uniform(-1, 1, (2, 4))
        h, _ = FORWARD[kind](cell, window)
        ref = REFERENCE[kind](cell.params, window)
        np.testing.assert_allclose(h, ref, atol=1e-12)

    def test_lstm_zero_everything_fixed_point(self):
        cell = cl.RecurrentCell("LSTM", 2, 2,
                                {"W_x": np.zeros((8, 2)),
                                 "W_h": np.zeros((8, 2)),
                                 "b": np.zeros(8)})
        h, _ = cl.lstm_forward(cell, np.zeros((3, 2)))
        np.testing.assert_array_equal(h, np.zeros(2))

    def test_lstm_forget_bias_saturates_gate(self):
        b = np.zeros(8)
        b[2:4] = 10.0                      # forget-gate slice for hidden 2
        cell = cl.RecurrentCell("LSTM", 2, 2,
                                {"W_x": np.zeros((8, 2)),
                                 "W_h": np.zeros((8, 2)), "b": b})
        _, tape = cl.lstm_forward(cell, np.ones((3, 2)))
        for _, f, _, _ in tape.stash["gates"]:
            np.testing.assert_allclose(f, 1.0 / (1.0 + np.exp(-10.0)),
                                       atol=1e-12)
            assert np.all(f > 0.9999)

    def test_bilstm_palindrome_symmetry(self):
        rng = np.random.default_rng(21)
        cell = cl.RecurrentCell.initialize("LSTM", 3, 4, rng)
        shared = cl.RecurrentCell("LSTM", 3, 4,
                                  {k: v.copy() for k, v in cell.params.items()})
        row = rng.uniform(-1, 1, 3)
        window = np.stack([row, rng.uniform(-1, 1, 3), row])
        window[1] = window[1]
        palindrome = np.stack([window[0], window[1], window[0]])
        h, _ = cl.bilstm_forward(cell, shared, palindrome)
        np.testing.assert_allclose(h[:4], h[4:], atol=1e-12)

    def test_bilstm_zero_weights(self):
        zeros = {"W_x": np.zeros((8, 2)), "W_h": np.zeros((8, 2)),
                 "b": np.zeros(8)}
        a = cl.RecurrentCell("LSTM", 2, 2, {k: v.copy() for k, v in zeros.items()})
        b = cl.RecurrentCell("LSTM", 2, 2, {k: v.copy() for k, v in zeros.items()})
        h, _ = cl.bilstm_forward(a, b, np.ones((3, 2)))
        np.testing.assert_array_equal(h, np.zeros(4))

    def test_bilstm_matches_two_lstm_oracles(self):
        rng = np.random.default_rng(34)
        fwd = cl.RecurrentCell.initialize("LSTM", 3, 2, rng)
        bwd = cl.RecurrentCell.initialize("LSTM", 3, 2, rng)
        window = rng.uniform(-1, 1, (4, 3))
        h, _ = cl.bilstm_forward(fwd, bwd, window)
        want = np.concatenate([lstm_reference(fwd.params, window),
                               lstm_reference(bwd.params, window[::-1])])
        np.testing.assert_allclose(h, want, atol=1e-12)

    def test_shape_errors(self):
        cell = cl.RecurrentCell.initialize("RNN", 3, 4,
                                           np.random.default_rng(0))
        with pytest.raises(ShapeError):
            cl.rnn_forward(cell, np.ones((2, 5)))
        with pytest.raises(ShapeError):
            cl.lstm_forward(cell, np.ones((2, 3)))

    def test_bad_kind_rejected(self):
        with pytest.raises(ParameterError):
            cl.RecurrentCell.initialize("ESN", 2, 2, np.random.default_rng(0))


class TestBackward:
    def test_one_dim_rnn_vs_fd(self):
        rng = np.random.default_rng(2)
        cell = cl.RecurrentCell.initialize("RNN", 1, 1, rng)
        window = rng.uniform(-1, 1, (3, 1))
        h, tape = cl.rnn_forward(cell, window)
        grads, _ = cl.backward(tape, np.ones(1))

        def loss():
            hh, _ = cl.rnn_forward(cell, window)
            return float(hh[0])

        finite_difference_check(loss, cell.params, grads, rtol=1e-6)

    def test_zero_upstream_zero_grads(self):
        rng = np.random.default_rng(3)
        cell = cl.RecurrentCell.initialize("LSTM", 2, 3, rng)
        _, tape = cl.lstm_forward(cell, rng.uniform(-1, 1, (2, 2)))
        grads, dx = cl.backward(tape, np.zeros(3))
        assert all(np.all(g == 0) for g in grads.values())
        assert np.all(dx == 0)

    @pytest.mark.parametrize("kind", ["RNN", "LSTM", "GRU"])
    def test_recurrent_gradients_vs_fd(self, kind):
        rng = np.random.default_rng(7)
        cell = cl.RecurrentCell.initialize(kind, 2, 3, rng)
        window = rng.uniform(-1, 1, (2, 2))
        up = rng.normal(size=3)
        h, tape = cl.backward.__self__ if False else FORWARD[kind](cell, window)
        grads, dx = cl.backward(tape, up)

        def loss():
            hh, _ = FORWARD[kind](cell, window)
            return float(np.dot(up, hh))

        finite_difference_check(loss, cell.params, grads)
        for i in range(window.shape[0]):
            for j in range(window.shape[1]):
                orig = window[i, j]
                window[i, j] = orig + 1e-5
                lp = loss()
                window[i, j] = orig - 1e-5
                lm = loss()
                window[i, j] = orig
                fd = (lp - lm) / 2e-5
                assert dx[i, j] == pytest.approx(fd, abs=1e-5 * max(1, abs(fd)))

    def test_bilstm_gradients_vs_fd(self):
        rng = np.random.default_rng(8)
        fwd = cl.RecurrentCell.initialize("LSTM", 2, 2, rng)
        bwd = cl.RecurrentCell.initialize("LSTM", 2, 2, rng)
        window = rng.uniform(-1, 1, (2, 2))
        up = rng.normal(size=4)
        _, tape = cl.bilstm_forward(fwd, bwd, window)
        grads, _ = cl.backward(tape, up)

        def loss():
            hh, _ = cl.bilstm_forward(fwd, bwd, window)
            return float(np.dot(up, hh))

        finite_difference_check(
            loss, {f"fwd.{k}": v for k, v in fwd.params.items()}, grads)
        finite_difference_check(
            loss, {f"bwd.{k}": v for k, v in bwd.params.items()}, grads)

    def test_dense_gradients_vs_fd(self):
        rng = np.random.default_rng(9)
        for act in ("identity", "tanh", "sigmoid", "relu"):
            layer = cl.DenseLayer.initialize(3, 2, rng, act)
            layer.bias[:] = rng.normal(size=2)   # exercise nonzero bias
            x = rng.uniform(-1, 1, 3)
            up = rng.normal(size=2)
            _, tape = cl.dense_forward(layer, x)
            grads, dx = cl.backward(tape, up)

            def loss():
                y, _ = cl.dense_forward(layer, x)
                return float(np.dot(up, y))

            finite_difference_check(loss, {"weights": layer.weights,
                                           "bias": layer.bias}, grads)

    def test_stale_tape_rejected(self):
        rng = np.random.default_rng(10)
        cell = cl.RecurrentCell.initialize("RNN", 2, 2, rng)
        _, tape = cl.rnn_forward(cell, rng.uniform(-1, 1, (2, 2)))
        cell.params["W_x"] = cell.params["W_x"].copy()   # replaced array
        with pytest.raises(TapeError):
            cl.backward(tape, np.ones(2))

    def test_wrong_upstream_shape_rejected(self):
        rng = np.random.default_rng(11)
        cell = cl.RecurrentCell.initialize("RNN", 2, 3, rng)
        _, tape = cl.rnn_forward(cell, rng.uniform(-1, 1, (2, 2)))
        with pytest.raises(TapeError):
            cl.backward(tape, np.ones(4))


class TestProperties:
    def test_hidden_states_bounded_and_finite(self):
        rng = np.random.default_rng(12)
        for kind in ("RNN", "LSTM", "GRU"):
            cell = cl.RecurrentCell.initialize(kind, 3, 5, rng)
            h, _ = FORWARD[kind](cell, rng.uniform(-100, 100, (6, 3)))
            assert np.all(np.isfinite(h))
            assert np.all(np.abs(h) <= 1.0)   # tanh-bounded outputs

    def test_forward_deterministic(self):
        rng = np.random.default_rng(14)
        cell = cl.RecurrentCell.initialize("GRU", 2, 3, rng)
        window = rng.uniform(-1, 1, (3, 2))
        h1, _ = cl.gru_forward(cell, window)
        h2, _ = cl.gru_forward(cell, window)
        np.testing.assert_array_equal(h1, h2)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(15)
        for kind in ("RNN", "LSTM", "GRU"):
            cell = cl.RecurrentCell.initialize(kind, 3, 4, rng)
            batch = rng.uniform(-1, 1, (5, 2, 3))
            hb, _ = FORWARD[kind](cell, batch)
            for i in range(5):
                hi, _ = FORWARD[kind](cell, batch[i])
                np.testing.assert_array_equal(hb[i], hi)
