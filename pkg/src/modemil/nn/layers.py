"""Neural-network layers for the mode-recognition encoders.

Layout conventions: images are channels-last ``(batch, height, width,
channels)``, sequences are ``(batch, time, features)``, dense activations are
``(batch, features)``. Batch normalization always normalizes the trailing
axis over all leading axes.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, concat, make_node, sigmoid, tanh

__all__ = [
    "Module",
    "Dense",
    "Conv2D",
    "BatchNorm",
    "Dropout",
    "BiLSTM",
    "conv2d",
    "max_pool",
    "glorot_uniform",
]


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Base container: parameter/buffer discovery, freezing, state export.

    Parameters are ``Tensor`` attributes with ``requires_grad=True``; buffers
    (batch-norm running statistics) are registered explicitly. Traversal is
    sorted by attribute name, so parameter order is stable across runs.
    """

    def __init__(self):
        self._buffers: dict[str, np.ndarray] = {}
        self._frozen = False

    # -- traversal -------------------------------------------------------------

    def _children(self):
        for name in sorted(vars(self)):
            value = vars(self)[name]
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = ""):
        for name in sorted(vars(self)):
            value = vars(self)[name]
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_tensors(self, prefix: str = ""):
        """All stored arrays: parameters (frozen or not) plus buffers."""
        for name in sorted(vars(self)):
            value = vars(self)[name]
            if isinstance(value, Tensor):
                yield prefix + name, value.data
        for name, array in sorted(self._buffers.items()):
            yield prefix + name, array
        for name, child in self._children():
            yield from child.named_tensors(prefix=f"{prefix}{name}.")

    # -- freezing ----------------------------------------------------------------

    def freeze(self):
        """Exclude this subtree from training: no gradients, no stat updates."""
        self._frozen = True
        for name in sorted(vars(self)):
            value = vars(self)[name]
            if isinstance(value, Tensor):
                value.requires_grad = False
        for _, child in self._children():
            child.freeze()
        return self

    def unfreeze(self):
        self._frozen = False
        for name in sorted(vars(self)):
            value = vars(self)[name]
            if isinstance(value, Tensor):
                value.requires_grad = True
        for _, child in self._children():
            child.unfreeze()
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    # -- state -----------------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: array.copy() for name, array in self.named_tensors()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_tensors())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ValueError(f"state mismatch: missing={missing}, unexpected={unexpected}")
        for name, array in own.items():
            incoming = np.asarray(state[name], dtype=np.float64)
            if incoming.shape != array.shape:
                raise ValueError(f"shape mismatch for {name}: {incoming.shape} vs {array.shape}")
            array[...] = incoming


class Dense(Module):
    """Affine map ``x @ weight + bias`` with Glorot-uniform initialization."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.n_in = n_in
        self.n_out = n_out
        self.weight = Tensor(glorot_uniform(rng, (n_in, n_out), n_in, n_out), requires_grad=True)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.n_in:
            raise ValueError(f"expected {self.n_in} input features, got {x.shape[-1]}")
        return x @ self.weight + self.bias


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Same-padded stride-1 cross-correlation.

    ``x`` is (batch, H, W, c_in), ``kernel`` is (k, k, c_in, c_out) with odd k,
    ``bias`` is (c_out,). Output spatial size equals input spatial size.
    """
    batch, height, width, c_in = x.shape
    k_h, k_w, kc_in, c_out = kernel.shape
    if k_h != k_w or k_h % 2 == 0:
        raise ValueError("only odd square kernels are supported")
    if kc_in != c_in:
        raise ValueError(f"kernel expects {kc_in} input channels, input has {c_in}")
    if height < k_h or width < k_w:
        raise ValueError("spatial extent smaller than the kernel")
    pad = k_h // 2
    padded = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    cols = np.empty((batch, height, width, k_h, k_w, c_in))
    for i in range(k_h):
        for j in range(k_w):
            cols[:, :, :, i, j, :] = padded[:, i : i + height, j : j + width, :]
    cols_flat = cols.reshape(batch * height * width, k_h * k_w * c_in)
    k_flat = kernel.data.reshape(k_h * k_w * c_in, c_out)
    out_data = (cols_flat @ k_flat + bias.data).reshape(batch, height, width, c_out)

    def backward(grad):
        grad_flat = grad.reshape(batch * height * width, c_out)
        if kernel.requires_grad:
            kernel._accumulate((cols_flat.T @ grad_flat).reshape(kernel.shape))
        if bias.requires_grad:
            bias._accumulate(grad_flat.sum(axis=0))
        if x.requires_grad:
            # Input gradient tap by tap: one gemm per kernel offset, added
            # into the clipped region the padded slice actually overlaps.
            dx = np.zeros_like(x.data)
            tap = np.empty((batch * height * width, c_in))
            for i in range(k_h):
                for j in range(k_w):
                    np.matmul(grad_flat, kernel.data[i, j].T, out=tap)
                    di, dj = i - pad, j - pad
                    src = tap.reshape(batch, height, width, c_in)[
                        :, max(0, -di) : height - max(0, di), max(0, -dj) : width - max(0, dj), :
                    ]
                    dx[:, max(0, di) : height - max(0, -di), max(0, dj) : width - max(0, -dj), :] += src
            x._accumulate(dx)

    return make_node(out_data, (x, kernel, bias), backward)


class Conv2D(Module):
    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, kernel_size: int = 3):
        super().__init__()
        fan_in = kernel_size * kernel_size * c_in
        fan_out = kernel_size * kernel_size * c_out
        self.kernel = Tensor(
            glorot_uniform(rng, (kernel_size, kernel_size, c_in, c_out), fan_in, fan_out),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(c_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.kernel, self.bias)


def max_pool(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; a trailing odd row/column is dropped."""
    batch, height, width, channels = x.shape
    if height < 2 or width < 2:
        raise ValueError("max_pool needs spatial extents >= 2")
    h2, w2 = height // 2, width // 2
    blocks = x.data[:, : h2 * 2, : w2 * 2, :].reshape(batch, h2, 2, w2, 2, channels)
    quads = blocks.transpose(0, 1, 3, 5, 2, 4).reshape(batch, h2, w2, channels, 4)
    winners = quads.argmax(axis=-1)
    out_data = np.take_along_axis(quads, winners[..., None], axis=-1)[..., 0]

    def backward(grad):
        if not x.requires_grad:
            return
        dquads = np.zeros_like(quads)
        np.put_along_axis(dquads, winners[..., None], grad[..., None], axis=-1)
        dx = np.zeros_like(x.data)
        dx[:, : h2 * 2, : w2 * 2, :] = (
            dquads.reshape(batch, h2, w2, channels, 2, 2)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(batch, h2 * 2, w2 * 2, channels)
        )
        x._accumulate(dx)

    return make_node(out_data, (x,), backward)


class BatchNorm(Module):
    """Normalize the trailing axis over all leading axes.

    Training mode uses batch statistics and updates running estimates with a
    keep rate of ``momentum``; inference mode (and frozen subtrees) use the
    running estimates only.
    """

    def __init__(self, n_channels: int, eps: float = 1e-5, momentum: float = 0.9):
        super().__init__()
        self.n_channels = n_channels
        self.eps = eps
        self.momentum = momentum
        self.gain = Tensor(np.ones(n_channels), requires_grad=True)
        self.bias = Tensor(np.zeros(n_channels), requires_grad=True)
        self._buffers["running_mean"] = np.zeros(n_channels)
        self._buffers["running_var"] = np.ones(n_channels)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        if x.shape[-1] != self.n_channels:
            raise ValueError(f"expected {self.n_channels} channels, got {x.shape[-1]}")
        if training and not self._frozen:
            if x.shape[0] < 2:
                raise ValueError("batch normalization needs a batch size >= 2 in training mode")
            return self._train_forward(x)
        inv = Tensor(1.0 / np.sqrt(self._buffers["running_var"] + self.eps))
        mean = Tensor(self._buffers["running_mean"])
        return (x - mean) * inv * self.gain + self.bias

    def _train_forward(self, x: Tensor) -> Tensor:
        axes = tuple(range(x.ndim - 1))
        count = int(np.prod([x.shape[a] for a in axes]))
        mean = x.data.mean(axis=axes)
        var = np.maximum((x.data * x.data).mean(axis=axes) - mean * mean, 0.0)
        inv = 1.0 / np.sqrt(var + self.eps)
        scale = self.gain.data * inv
        out_data = x.data * scale
        out_data += self.bias.data - scale * mean
        keep = self.momentum
        self._buffers["running_mean"] = keep * self._buffers["running_mean"] + (1.0 - keep) * mean
        self._buffers["running_var"] = keep * self._buffers["running_var"] + (1.0 - keep) * var
        gain, bias = self.gain, self.bias

        def backward(grad):
            grad_sum = grad.sum(axis=axes)
            grad_gain = inv * ((grad * x.data).sum(axis=axes) - mean * grad_sum)
            if bias.requires_grad:
                bias._accumulate(grad_sum)
            if gain.requires_grad:
                gain._accumulate(grad_gain)
            if x.requires_grad:
                # dx = A*g + B*x + C per channel, the closed form of the
                # batch-statistics gradient.
                a_coef = gain.data * inv
                b_coef = -a_coef * inv * grad_gain / count
                c_coef = -a_coef * grad_sum / count - b_coef * mean
                dx = grad * a_coef
                dx += x.data * b_coef
                dx += c_coef
                x._accumulate(dx)

        return make_node(out_data, (x, gain, bias), backward)


class Dropout(Module):
    """Inverted dropout: scaled masking in training, identity at inference."""

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate

    def __call__(self, x: Tensor, training: bool, rng: np.random.Generator | None) -> Tensor:
        if not training or self._frozen or self.rate == 0.0:
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)

        def backward(grad):
            if x.requires_grad:
                x._accumulate(grad * mask)

        return make_node(x.data * mask, (x,), backward)


class _LSTMDirection(Module):
    """One direction of an LSTM; only the final hidden state is exposed.

    Gate layout along the packed weight axis is (input, forget, candidate,
    output); sigmoid gates, tanh candidate and output squashing.
    """

    def __init__(self, n_in: int, n_cells: int, rng: np.random.Generator):
        super().__init__()
        self.n_cells = n_cells
        self.w_input = Tensor(glorot_uniform(rng, (n_in, 4 * n_cells), n_in, 4 * n_cells), requires_grad=True)
        self.w_state = Tensor(glorot_uniform(rng, (n_cells, 4 * n_cells), n_cells, 4 * n_cells), requires_grad=True)
        self.bias = Tensor(np.zeros(4 * n_cells), requires_grad=True)

    def final_state(self, x: Tensor, reverse: bool) -> Tensor:
        batch, steps, _ = x.shape
        n = self.n_cells
        h = Tensor(np.zeros((batch, n)))
        c = Tensor(np.zeros((batch, n)))
        order = range(steps - 1, -1, -1) if reverse else range(steps)
        for t in order:
            step = x[:, t, :]
            gates = step @ self.w_input + h @ self.w_state + self.bias
            gate_in = sigmoid(gates[:, 0 * n : 1 * n])
            gate_forget = sigmoid(gates[:, 1 * n : 2 * n])
            candidate = tanh(gates[:, 2 * n : 3 * n])
            gate_out = sigmoid(gates[:, 3 * n : 4 * n])
            c = gate_forget * c + gate_in * candidate
            h = gate_out * tanh(c)
        return h


class BiLSTM(Module):
    """Bi-directional LSTM returning the concatenated final states.

    The result is (batch, 2 * cells): the forward pass state aligned with the
    last time step followed by the backward pass state aligned with the first.
    """

    def __init__(self, n_in: int, n_cells: int, rng: np.random.Generator):
        super().__init__()
        self.forward_dir = _LSTMDirection(n_in, n_cells, rng)
        self.backward_dir = _LSTMDirection(n_in, n_cells, rng)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3:
            raise ValueError("BiLSTM expects (batch, time, features)")
        if x.shape[1] < 1:
            raise ValueError("empty sequence")
        return concat(
            [self.forward_dir.final_state(x, reverse=False), self.backward_dir.final_state(x, reverse=True)],
            axis=1,
        )
