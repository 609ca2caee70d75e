"""Declarative network descriptions and whole-network execution.

A network is a ``NetworkSpec``: an ordered tuple of layer descriptions that
always ends in a 2-way softmax.  Parameters live outside the spec in a
``ModelParams`` value, so specs are immutable and shareable while training
owns a private parameter copy.

Three builders are provided: two CPU-scale nets for 64x64-ish inputs (a
plain five-conv/three-fc stack and a deeper one with inception blocks) and a
full-size five-conv/three-fc shape at 224x224 used only for parameter
accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import layers as L
from .layers import LayerGrad, ScorePair
from .labels import label_index


# ---------------------------------------------------------------------------
# layer and network descriptions


@dataclass(frozen=True)
class Conv:
    name: str
    out_channels: int
    kernel: int
    stride: int = 1
    pad: int = 0
    trainable: bool = True


@dataclass(frozen=True)
class ReLU:
    name: str


@dataclass(frozen=True)
class MaxPool:
    name: str
    k: int
    stride: int


@dataclass(frozen=True)
class Flatten:
    name: str


@dataclass(frozen=True)
class FullyConnected:
    name: str
    width: int
    trainable: bool = True


@dataclass(frozen=True)
class InceptionBlock:
    """Four parallel branches concatenated along channels, spatial size kept.

    Branches: 1x1 conv; 1x1 reduce then 3x3 conv; 1x1 reduce then 5x5 conv;
    3x3 stride-1 max-pool then 1x1 conv.  Every internal conv is followed by
    a ReLU.
    """

    name: str
    out1x1: int
    reduce3x3: int
    out3x3: int
    reduce5x5: int
    out5x5: int
    pool_proj: int
    trainable: bool = True

    @property
    def out_channels(self) -> int:
        return self.out1x1 + self.out3x3 + self.out5x5 + self.pool_proj


@dataclass(frozen=True)
class Softmax2:
    name: str


LayerSpec = Union[Conv, ReLU, MaxPool, Flatten, FullyConnected, InceptionBlock, Softmax2]

PARAMETERIZED = (Conv, FullyConnected, InceptionBlock)


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_shape: tuple[int, ...]  # [C,H,W], or already-flat [N]
    layers: tuple[LayerSpec, ...]


@dataclass
class ModelParams:
    spec_name: str
    seed: int
    tensors: dict[str, np.ndarray]


@dataclass
class ForwardCache:
    """Per-layer activations saved by forward for the matching backward."""

    spec_name: str
    records: list = field(default_factory=list)
    scores: ScorePair | None = None


# ---------------------------------------------------------------------------
# shape chain and parameter accounting


def output_shapes(spec: NetworkSpec) -> list[tuple[int, ...]]:
    """Output shape of every layer; raises if the chain does not fit together."""
    shape: tuple[int, ...] = tuple(spec.input_shape)
    shapes = []
    for i, layer in enumerate(spec.layers):
        try:
            shape = _layer_out_shape(layer, shape)
        except ValueError as err:
            raise ValueError(f"{spec.name}: layer {layer.name!r}: {err}") from None
        shapes.append(shape)
    if not spec.layers or not isinstance(spec.layers[-1], Softmax2):
        raise ValueError(f"{spec.name}: final layer must be a 2-way softmax")
    return shapes


def _layer_out_shape(layer: LayerSpec, shape: tuple[int, ...]) -> tuple[int, ...]:
    if isinstance(layer, Conv):
        c, h, w = _expect_3d(shape)
        if layer.kernel > h + 2 * layer.pad or layer.kernel > w + 2 * layer.pad:
            raise ValueError(f"kernel {layer.kernel} exceeds padded input {h}x{w}")
        ho = (h + 2 * layer.pad - layer.kernel) // layer.stride + 1
        wo = (w + 2 * layer.pad - layer.kernel) // layer.stride + 1
        return (layer.out_channels, ho, wo)
    if isinstance(layer, ReLU):
        return shape
    if isinstance(layer, MaxPool):
        c, h, w = _expect_3d(shape)
        if layer.k > h or layer.k > w:
            raise ValueError(f"pool window {layer.k} exceeds input {h}x{w}")
        return (c, (h - layer.k) // layer.stride + 1, (w - layer.k) // layer.stride + 1)
    if isinstance(layer, Flatten):
        return (int(np.prod(shape)),)
    if isinstance(layer, FullyConnected):
        if len(shape) != 1:
            raise ValueError(f"fully connected input must be flat, got {shape}")
        return (layer.width,)
    if isinstance(layer, InceptionBlock):
        c, h, w = _expect_3d(shape)
        return (layer.out_channels, h, w)
    if isinstance(layer, Softmax2):
        if shape != (2,):
            raise ValueError(f"softmax input must be exactly 2 logits, got {shape}")
        return (2,)
    raise ValueError(f"unknown layer kind {type(layer).__name__}")


def _expect_3d(shape):
    if len(shape) != 3:
        raise ValueError(f"expected [C,H,W] input, got {shape}")
    return shape


def param_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    """Named parameter shapes for every parameterized layer, in layer order."""
    shapes: dict[str, tuple[int, ...]] = {}
    in_shape: tuple[int, ...] = tuple(spec.input_shape)
    for layer in spec.layers:
        if isinstance(layer, Conv):
            c = in_shape[0]
            shapes[f"{layer.name}.kernels"] = (layer.out_channels, c, layer.kernel, layer.kernel)
            shapes[f"{layer.name}.bias"] = (layer.out_channels,)
        elif isinstance(layer, FullyConnected):
            shapes[f"{layer.name}.weights"] = (layer.width, in_shape[0])
            shapes[f"{layer.name}.bias"] = (layer.width,)
        elif isinstance(layer, InceptionBlock):
            c = in_shape[0]
            for prefix, (k, cin, cout) in _inception_convs(layer, c).items():
                shapes[f"{prefix}.kernels"] = (cout, cin, k, k)
                shapes[f"{prefix}.bias"] = (cout,)
        in_shape = _layer_out_shape(layer, in_shape)
    return shapes


def _inception_convs(block: InceptionBlock, in_channels: int) -> dict[str, tuple[int, int, int]]:
    """Internal convs of a block as prefix -> (kernel, in, out), fixed order."""
    n = block.name
    return {
        f"{n}.b1": (1, in_channels, block.out1x1),
        f"{n}.b2r": (1, in_channels, block.reduce3x3),
        f"{n}.b2": (3, block.reduce3x3, block.out3x3),
        f"{n}.b3r": (1, in_channels, block.reduce5x5),
        f"{n}.b3": (5, block.reduce5x5, block.out5x5),
        f"{n}.b4": (1, in_channels, block.pool_proj),
    }


def count_parameters(spec: NetworkSpec, trainable_only: bool = False) -> int:
    shapes = param_shapes(spec)
    if trainable_only:
        keep = set(trainable_param_names(spec))
        return sum(int(np.prod(s)) for k, s in shapes.items() if k in keep)
    return sum(int(np.prod(s)) for s in shapes.values())


def count_layers(spec: NetworkSpec) -> int:
    """Primitive layer count, with inception blocks expanded into their
    internal convolutions, activations and pooling."""
    total = 0
    for layer in spec.layers:
        if isinstance(layer, InceptionBlock):
            total += 2 * 6 + 1  # six convs each with a relu, one pool branch
        else:
            total += 1
    return total


def trainable_param_names(spec: NetworkSpec) -> list[str]:
    names = []
    all_shapes = param_shapes(spec)
    for layer in spec.layers:
        if isinstance(layer, PARAMETERIZED) and layer.trainable:
            names.extend(k for k in all_shapes if k.split(".")[0] == layer.name)
    return names


def init_params(spec: NetworkSpec, seed: int) -> ModelParams:
    """Fan-in-scaled gaussian kernels/weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(spec).items():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            tensors[name] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
    return ModelParams(spec.name, seed, tensors)


def freeze_trunk(spec: NetworkSpec) -> NetworkSpec:
    """Copy of the spec with only the final fully connected layer trainable."""
    fc_indices = [i for i, l in enumerate(spec.layers) if isinstance(l, FullyConnected)]
    if not fc_indices:
        raise ValueError(f"{spec.name}: no fully connected layer to keep trainable")
    last_fc = fc_indices[-1]
    new_layers = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, PARAMETERIZED):
            layer = replace(layer, trainable=(i == last_fc))
        new_layers.append(layer)
    return replace(spec, layers=tuple(new_layers))


def head_layer(spec: NetworkSpec) -> FullyConnected:
    """The final fully connected layer (the classifier head)."""
    for layer in reversed(spec.layers):
        if isinstance(layer, FullyConnected):
            return layer
    raise ValueError(f"{spec.name}: no fully connected layer")


def default_feature_layer(spec: NetworkSpec) -> int:
    """Index of the layer whose output feeds the classifier head."""
    for i in reversed(range(len(spec.layers))):
        if isinstance(spec.layers[i], FullyConnected):
            if i == 0:
                raise ValueError(f"{spec.name}: head has no preceding layer")
            return i - 1
    raise ValueError(f"{spec.name}: no fully connected layer")


# ---------------------------------------------------------------------------
# builders


def build_anet_mini(input_shape: tuple[int, int, int] = (3, 64, 64)) -> NetworkSpec:
    """Five conv layers (pools after 1, 2 and 5) then three fully connected."""
    side = input_shape[1]
    spec = NetworkSpec(
        name=f"anet-mini-{side}",
        input_shape=tuple(input_shape),
        layers=(
            Conv("conv1", 12, kernel=5, stride=2, pad=2),
            ReLU("relu1"),
            MaxPool("pool1", k=2, stride=2),
            Conv("conv2", 24, kernel=3, pad=1),
            ReLU("relu2"),
            MaxPool("pool2", k=2, stride=2),
            Conv("conv3", 32, kernel=3, pad=1),
            ReLU("relu3"),
            Conv("conv4", 32, kernel=3, pad=1),
            ReLU("relu4"),
            Conv("conv5", 24, kernel=3, pad=1),
            ReLU("relu5"),
            MaxPool("pool5", k=2, stride=2),
            Flatten("flatten"),
            FullyConnected("fc6", 128),
            ReLU("relu6"),
            FullyConnected("fc7", 64),
            ReLU("relu7"),
            FullyConnected("fc8", 2),
            Softmax2("softmax"),
        ),
    )
    output_shapes(spec)
    return spec


def build_gnet_mini(input_shape: tuple[int, int, int] = (3, 64, 64)) -> NetworkSpec:
    """Three conv layers, three inception blocks, global pooling, one fc."""
    side = input_shape[1]
    stem_out = side // 8  # after the two stem pools and stride-2 conv1
    spec = NetworkSpec(
        name=f"gnet-mini-{side}",
        input_shape=tuple(input_shape),
        layers=(
            Conv("conv1", 12, kernel=5, stride=2, pad=2),
            ReLU("relu1"),
            MaxPool("pool1", k=2, stride=2),
            Conv("conv2", 16, kernel=1),
            ReLU("relu2"),
            Conv("conv3", 24, kernel=3, pad=1),
            ReLU("relu3"),
            MaxPool("pool2", k=2, stride=2),
            InceptionBlock("inc_a", out1x1=8, reduce3x3=8, out3x3=12, reduce5x5=4, out5x5=6, pool_proj=6),
            InceptionBlock("inc_b", out1x1=10, reduce3x3=10, out3x3=16, reduce5x5=4, out5x5=8, pool_proj=6),
            MaxPool("pool3", k=2, stride=2),
            InceptionBlock("inc_c", out1x1=12, reduce3x3=12, out3x3=20, reduce5x5=6, out5x5=10, pool_proj=8),
            MaxPool("gpool", k=stem_out // 2, stride=1),
            Flatten("flatten"),
            FullyConnected("fc", 2),
            Softmax2("softmax"),
        ),
    )
    output_shapes(spec)
    return spec


def build_anet_full_spec() -> NetworkSpec:
    """The standard single-tower five-conv/three-fc shape at 224x224, with a
    2-way output layer; used for parameter accounting only."""
    spec = NetworkSpec(
        name="anet-full-224",
        input_shape=(3, 224, 224),
        layers=(
            Conv("conv1", 96, kernel=11, stride=4, pad=2),
            ReLU("relu1"),
            MaxPool("pool1", k=3, stride=2),
            Conv("conv2", 256, kernel=5, pad=2),
            ReLU("relu2"),
            MaxPool("pool2", k=3, stride=2),
            Conv("conv3", 384, kernel=3, pad=1),
            ReLU("relu3"),
            Conv("conv4", 384, kernel=3, pad=1),
            ReLU("relu4"),
            Conv("conv5", 256, kernel=3, pad=1),
            ReLU("relu5"),
            MaxPool("pool5", k=3, stride=2),
            Flatten("flatten"),
            FullyConnected("fc6", 4096),
            ReLU("relu6"),
            FullyConnected("fc7", 4096),
            ReLU("relu7"),
            FullyConnected("fc8", 2),
            Softmax2("softmax"),
        ),
    )
    output_shapes(spec)
    return spec


SPEC_BUILDERS = {"anet": build_anet_mini, "gnet": build_gnet_mini}


def spec_from_name(name: str) -> NetworkSpec:
    """Rebuild a spec from the name stored in a parameter file."""
    try:
        kind, variant, side = name.split("-")
        if variant != "mini":
            raise KeyError(name)
        return SPEC_BUILDERS[kind]((3, int(side), int(side)))
    except (ValueError, KeyError):
        raise ValueError(f"unknown network spec name {name!r}") from None


# ---------------------------------------------------------------------------
# execution


def forward(spec: NetworkSpec, params: ModelParams, input: np.ndarray) -> tuple[ScorePair, ForwardCache]:
    """Run all layers in order; returns normalized scores plus the
    activation cache consumed by backward."""
    if params.spec_name != spec.name:
        raise ValueError(f"params built for {params.spec_name!r}, spec is {spec.name!r}")
    x = np.asarray(input, dtype=np.float64)
    if x.shape != tuple(spec.input_shape):
        raise ValueError(
            f"{spec.name}: input shape {tuple(x.shape)} does not match {tuple(spec.input_shape)}"
        )
    cache = ForwardCache(spec.name)
    for layer in spec.layers:
        try:
            x = _layer_forward(layer, params.tensors, x, cache.records)
        except ValueError as err:
            raise ValueError(f"{spec.name}: layer {layer.name!r}: {err}") from None
    cache.scores = ScorePair(float(x[0]), float(x[1]))
    return cache.scores, cache


def _layer_forward(layer, tensors, x, records):
    if isinstance(layer, Conv):
        records.append(x)
        return L.conv2d_forward(
            x, tensors[f"{layer.name}.kernels"], tensors[f"{layer.name}.bias"], layer.stride, layer.pad
        )
    if isinstance(layer, ReLU):
        records.append(x)
        return L.relu_forward(x)
    if isinstance(layer, MaxPool):
        out, idx = L.maxpool_forward(x, layer.k, layer.stride)
        records.append((idx, x.shape))
        return out
    if isinstance(layer, Flatten):
        records.append(x.shape)
        return x.reshape(-1)
    if isinstance(layer, FullyConnected):
        records.append(x)
        return L.fc_forward(x, tensors[f"{layer.name}.weights"], tensors[f"{layer.name}.bias"])
    if isinstance(layer, InceptionBlock):
        out, rec = _inception_forward(layer, tensors, x)
        records.append(rec)
        return out
    if isinstance(layer, Softmax2):
        s = L.softmax2(x)
        records.append(np.array([s.benign, s.porn]))
        return np.array([s.benign, s.porn])
    raise ValueError(f"unknown layer kind {type(layer).__name__}")


def _conv_relu_forward(tensors, prefix, x, kernel_pad, stride=1):
    pre = L.conv2d_forward(x, tensors[f"{prefix}.kernels"], tensors[f"{prefix}.bias"], stride, kernel_pad)
    return L.relu_forward(pre), pre


def _inception_forward(block: InceptionBlock, tensors, x):
    n = block.name
    rec = {"input": x}
    y1, rec["b1_pre"] = _conv_relu_forward(tensors, f"{n}.b1", x, 0)
    r2, rec["b2r_pre"] = _conv_relu_forward(tensors, f"{n}.b2r", x, 0)
    rec["b2_in"] = r2
    y2, rec["b2_pre"] = _conv_relu_forward(tensors, f"{n}.b2", r2, 1)
    r3, rec["b3r_pre"] = _conv_relu_forward(tensors, f"{n}.b3r", x, 0)
    rec["b3_in"] = r3
    y3, rec["b3_pre"] = _conv_relu_forward(tensors, f"{n}.b3", r3, 2)
    pooled, idx, padded_shape = _padded_maxpool_forward(x, 3, 1, 1)
    rec["pool"] = (idx, padded_shape)
    rec["b4_in"] = pooled
    y4, rec["b4_pre"] = _conv_relu_forward(tensors, f"{n}.b4", pooled, 0)
    return np.concatenate([y1, y2, y3, y4], axis=0), rec


def _padded_maxpool_forward(x, k, stride, pad):
    # -inf padding keeps window maxima inside the real data
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    out, idx = L.maxpool_forward(xp, k, stride)
    return out, idx, xp.shape


def _padded_maxpool_backward(idx, upstream, padded_shape, orig_shape, pad):
    g = L.maxpool_backward(idx, upstream, padded_shape)
    return g[:, pad : pad + orig_shape[1], pad : pad + orig_shape[2]]


def backward(spec: NetworkSpec, params: ModelParams, cache: ForwardCache, label: str) -> dict[str, np.ndarray]:
    """Gradients of the cross-entropy loss for every trainable parameter.

    Frozen layers still propagate input gradients (so trainable layers below
    them receive theirs) but contribute no parameter gradients.  The walk
    stops early once no trainable layer remains below.
    """
    if cache.spec_name != spec.name or len(cache.records) != len(spec.layers):
        raise ValueError(
            f"cache does not match spec {spec.name!r} (built for {cache.spec_name!r})"
        )
    trainable_idx = [
        i for i, l in enumerate(spec.layers) if isinstance(l, PARAMETERIZED) and l.trainable
    ]
    if not trainable_idx:
        return {}
    lowest = trainable_idx[0]

    if not isinstance(spec.layers[-1], Softmax2):
        raise ValueError(f"{spec.name}: final layer must be a 2-way softmax")
    scores = cache.records[-1]
    grad = scores.copy()
    grad[label_index(label)] -= 1.0

    grads: dict[str, np.ndarray] = {}
    for i in range(len(spec.layers) - 2, lowest - 1, -1):
        layer = spec.layers[i]
        rec = cache.records[i]
        grad = _layer_backward(layer, params.tensors, rec, grad, grads)
    return grads


def _layer_backward(layer, tensors, rec, grad, grads):
    if isinstance(layer, Conv):
        g = L.conv2d_backward(rec, tensors[f"{layer.name}.kernels"], layer.stride, layer.pad, grad)
        if layer.trainable:
            grads[f"{layer.name}.kernels"] = g.param_grads["kernels"]
            grads[f"{layer.name}.bias"] = g.param_grads["bias"]
        return g.input_grad
    if isinstance(layer, ReLU):
        return L.relu_backward(rec, grad)
    if isinstance(layer, MaxPool):
        idx, in_shape = rec
        return L.maxpool_backward(idx, grad, in_shape)
    if isinstance(layer, Flatten):
        return grad.reshape(rec)
    if isinstance(layer, FullyConnected):
        g = L.fc_backward(rec, tensors[f"{layer.name}.weights"], grad)
        if layer.trainable:
            grads[f"{layer.name}.weights"] = g.param_grads["weights"]
            grads[f"{layer.name}.bias"] = g.param_grads["bias"]
        return g.input_grad
    if isinstance(layer, InceptionBlock):
        return _inception_backward(layer, tensors, rec, grad, grads)
    raise ValueError(f"no backward for layer kind {type(layer).__name__}")


def _conv_relu_backward(tensors, prefix, conv_in, pre, upstream, pad, grads, trainable):
    g_pre = L.relu_backward(pre, upstream)
    g = L.conv2d_backward(conv_in, tensors[f"{prefix}.kernels"], 1, pad, g_pre)
    if trainable:
        grads[f"{prefix}.kernels"] = g.param_grads["kernels"]
        grads[f"{prefix}.bias"] = g.param_grads["bias"]
    return g.input_grad


def _inception_backward(block: InceptionBlock, tensors, rec, grad, grads):
    n = block.name
    x = rec["input"]
    c1, c2, c3 = block.out1x1, block.out1x1 + block.out3x3, block.out1x1 + block.out3x3 + block.out5x5
    g1, g2, g3, g4 = grad[:c1], grad[c1:c2], grad[c2:c3], grad[c3:]

    gx = _conv_relu_backward(tensors, f"{n}.b1", x, rec["b1_pre"], g1, 0, grads, block.trainable)
    t = _conv_relu_backward(tensors, f"{n}.b2", rec["b2_in"], rec["b2_pre"], g2, 1, grads, block.trainable)
    gx += _conv_relu_backward(tensors, f"{n}.b2r", x, rec["b2r_pre"], t, 0, grads, block.trainable)
    t = _conv_relu_backward(tensors, f"{n}.b3", rec["b3_in"], rec["b3_pre"], g3, 2, grads, block.trainable)
    gx += _conv_relu_backward(tensors, f"{n}.b3r", x, rec["b3r_pre"], t, 0, grads, block.trainable)
    t = _conv_relu_backward(tensors, f"{n}.b4", rec["b4_in"], rec["b4_pre"], g4, 0, grads, block.trainable)
    idx, padded_shape = rec["pool"]
    gx += _padded_maxpool_backward(idx, t, padded_shape, x.shape, 1)
    return gx


def extract_features(spec: NetworkSpec, params: ModelParams, input: np.ndarray, layer_index: int) -> np.ndarray:
    """Activation after the layer at ``layer_index`` (0-based)."""
    if not 0 <= layer_index < len(spec.layers):
        raise ValueError(
            f"layer index {layer_index} out of range for {len(spec.layers)} layers"
        )
    if params.spec_name != spec.name:
        raise ValueError(f"params built for {params.spec_name!r}, spec is {spec.name!r}")
    x = np.asarray(input, dtype=np.float64)
    if x.shape != tuple(spec.input_shape):
        raise ValueError(
            f"{spec.name}: input shape {tuple(x.shape)} does not match {tuple(spec.input_shape)}"
        )
    records: list = []
    for layer in spec.layers[: layer_index + 1]:
        x = _layer_forward(layer, params.tensors, x, records)
    return np.asarray(x, dtype=np.float64).copy()


# ---------------------------------------------------------------------------
# batched inference
#
# Same arithmetic as the single-input path, with a leading batch axis folded
# into the matrix products so many windows amortize one pass.  Used for
# feature extraction and scoring only; training gradients always go through
# the canonical per-input path.


def batch_activations(
    spec: NetworkSpec, params: ModelParams, inputs: np.ndarray, layer_index: int
) -> np.ndarray:
    """Activations after ``layer_index`` for a [N, ...input_shape] stack."""
    if not 0 <= layer_index < len(spec.layers):
        raise ValueError(f"layer index {layer_index} out of range for {len(spec.layers)} layers")
    if params.spec_name != spec.name:
        raise ValueError(f"params built for {params.spec_name!r}, spec is {spec.name!r}")
    x = np.ascontiguousarray(inputs, dtype=np.float64)
    if x.shape[1:] != tuple(spec.input_shape):
        raise ValueError(
            f"{spec.name}: batch item shape {tuple(x.shape[1:])} does not match "
            f"{tuple(spec.input_shape)}"
        )
    for layer in spec.layers[: layer_index + 1]:
        x = _batch_layer_forward(layer, params.tensors, x)
    return x


def batch_scores(spec: NetworkSpec, params: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """ScorePairs for a stack of inputs, as an [N, 2] array."""
    return batch_activations(spec, params, inputs, len(spec.layers) - 1)


def _batch_layer_forward(layer, tensors, x):
    if isinstance(layer, Conv):
        return _batch_conv(
            x, tensors[f"{layer.name}.kernels"], tensors[f"{layer.name}.bias"], layer.stride, layer.pad
        )
    if isinstance(layer, ReLU):
        return np.maximum(x, 0.0)
    if isinstance(layer, MaxPool):
        return _batch_maxpool(x, layer.k, layer.stride)
    if isinstance(layer, Flatten):
        return x.reshape(x.shape[0], -1)
    if isinstance(layer, FullyConnected):
        w = tensors[f"{layer.name}.weights"]
        return x @ w.T + tensors[f"{layer.name}.bias"]
    if isinstance(layer, InceptionBlock):
        return _batch_inception(layer, tensors, x)
    if isinstance(layer, Softmax2):
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    raise ValueError(f"unknown layer kind {type(layer).__name__}")


def _batch_conv(x, kernels, bias, stride, pad, fill=0.0):
    n, c, h, w = x.shape
    k, _, kh, kw = kernels.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=fill)
    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (w + 2 * pad - kw) // stride + 1
    acc = np.zeros((k, n, h_out, w_out))
    for di in range(kh):
        rows = slice(di, di + (h_out - 1) * stride + 1, stride)
        for dj in range(kw):
            cols = slice(dj, dj + (w_out - 1) * stride + 1, stride)
            acc += np.tensordot(kernels[:, :, di, dj], x[:, :, rows, cols], axes=([1], [1]))
    acc += bias[:, None, None, None]
    return np.ascontiguousarray(np.moveaxis(acc, 0, 1))


def _batch_maxpool(x, k, stride, pad=0):
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    n, c, h, w = x.shape
    h_out = (h - k) // stride + 1
    w_out = (w - k) // stride + 1
    out = np.full((n, c, h_out, w_out), -np.inf)
    for di in range(k):
        rows = slice(di, di + (h_out - 1) * stride + 1, stride)
        for dj in range(k):
            cols = slice(dj, dj + (w_out - 1) * stride + 1, stride)
            np.maximum(out, x[:, :, rows, cols], out=out)
    return out


def _batch_inception(block: InceptionBlock, tensors, x):
    n = block.name
    relu = lambda v: np.maximum(v, 0.0)
    y1 = relu(_batch_conv(x, tensors[f"{n}.b1.kernels"], tensors[f"{n}.b1.bias"], 1, 0))
    r2 = relu(_batch_conv(x, tensors[f"{n}.b2r.kernels"], tensors[f"{n}.b2r.bias"], 1, 0))
    y2 = relu(_batch_conv(r2, tensors[f"{n}.b2.kernels"], tensors[f"{n}.b2.bias"], 1, 1))
    r3 = relu(_batch_conv(x, tensors[f"{n}.b3r.kernels"], tensors[f"{n}.b3r.bias"], 1, 0))
    y3 = relu(_batch_conv(r3, tensors[f"{n}.b3.kernels"], tensors[f"{n}.b3.bias"], 1, 2))
    pooled = _batch_maxpool(x, 3, 1, pad=1)
    y4 = relu(_batch_conv(pooled, tensors[f"{n}.b4.kernels"], tensors[f"{n}.b4.bias"], 1, 0))
    return np.concatenate([y1, y2, y3, y4], axis=1)
