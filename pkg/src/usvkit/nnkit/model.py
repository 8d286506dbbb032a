"""Model container: an ordered layer stack with mode, parameter registry
and reverse-mode differentiation down to the input."""

from __future__ import annotations

import numpy as np

from .layers import BatchNorm, Conv2d, Dense, Layer, ReLU


class Model:
    """Sequential stack of layers (layers may nest sub-layers).

    Train mode applies dropout masks from the supplied generator and batch
    statistics; eval mode is deterministic and uses running statistics.
    `backward` must follow a `forward` with matching mode and input.
    """

    def __init__(self, layers: list[Layer]):
        self.layers = layers
        self.training = False
        self._ran_forward = False

    def train_mode(self) -> "Model":
        self.training = True
        return self

    def eval_mode(self) -> "Model":
        self.training = False
        return self

    def forward(self, x: np.ndarray, gen: np.random.Generator | None = None) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, self.training, gen)
        self._ran_forward = True
        return x

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Propagate an output gradient back to the input; parameter
        gradients land on each layer's `grads` dict."""
        if not self._ran_forward:
            raise RuntimeError("backward called before forward")
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def __call__(self, x, gen=None):
        return self.forward(x, gen)

    # -- parameter registry --------------------------------------------------

    def _walk(self, layer: Layer, prefix: str, out: list[tuple[str, Layer]]) -> None:
        out.append((prefix, layer))
        for i, child in enumerate(layer.children()):
            self._walk(child, f"{prefix}.{i}", out)

    def named_layers(self) -> list[tuple[str, Layer]]:
        out: list[tuple[str, Layer]] = []
        for i, layer in enumerate(self.layers):
            self._walk(layer, str(i), out)
        return out

    def named_params(self) -> dict[str, np.ndarray]:
        return {
            f"{name}.{pname}": arr
            for name, layer in self.named_layers()
            for pname, arr in layer.params().items()
        }

    def named_grads(self) -> dict[str, np.ndarray]:
        grads: dict[str, np.ndarray] = {}
        for name, layer in self.named_layers():
            layer_grads = getattr(layer, "grads", {})
            for pname in layer.params():
                if pname not in layer_grads:
                    raise RuntimeError(f"no gradient for {name}.{pname}; run backward first")
                grads[f"{name}.{pname}"] = layer_grads[pname]
        return grads

    def named_buffers(self) -> dict[str, np.ndarray]:
        return {
            f"{name}.{bname}": arr
            for name, layer in self.named_layers()
            for bname, arr in layer.buffers().items()
        }

    def set_param(self, name: str, value: np.ndarray) -> None:
        layer_name, _, pname = name.rpartition(".")
        for lname, layer in self.named_layers():
            if lname == layer_name and pname in layer.params():
                setattr(layer, pname, np.asarray(value))
                return
        raise KeyError(name)

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        layer_name, _, bname = name.rpartition(".")
        for lname, layer in self.named_layers():
            if lname == layer_name and bname in layer.buffers():
                setattr(layer, bname, np.asarray(value))
                return
        raise KeyError(name)

    def astype(self, dtype) -> "Model":
        for name, value in self.named_params().items():
            self.set_param(name, value.astype(dtype))
        return self

    def truncate(self, layer_index: int) -> "Model":
        """Sub-model of the top-level layers 0..layer_index (shared weights)."""
        if not 0 <= layer_index < len(self.layers):
            raise IndexError(f"layer index {layer_index} out of range")
        sub = Model(self.layers[: layer_index + 1])
        sub.training = False
        return sub

    def relu_layers(self) -> list[ReLU]:
        """All rectifiers in execution order, including nested ones."""
        return [layer for _, layer in self.named_layers() if isinstance(layer, ReLU)]


def param_count(model: Model) -> int:
    """Total number of trainable weights (batchnorm scale/shift included,
    running statistics excluded)."""
    return sum(arr.size for arr in model.named_params().values())


def init_weights(model: Model, seed: int = 0) -> Model:
    """He-normal initialization for dense/conv weights, deterministic per seed."""
    gen = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(seed)))
    for _, layer in model.named_layers():
        if isinstance(layer, Dense):
            layer.weight = gen.normal(0.0, np.sqrt(2.0 / layer.n_in), layer.weight.shape)
            layer.bias = np.zeros_like(layer.bias)
        elif isinstance(layer, Conv2d):
            fan_in = layer.c_in * layer.kh * layer.kw
            layer.weight = gen.normal(0.0, np.sqrt(2.0 / fan_in), layer.weight.shape)
            layer.bias = np.zeros_like(layer.bias)
        elif isinstance(layer, BatchNorm):
            layer.gamma = np.ones_like(layer.gamma)
            layer.beta = np.zeros_like(layer.beta)
    return model
