"""1D residual network builder over three arithmetic modes.

Modes:
  * ``complex``  - tied complex convolutions (2 real parameters per tap),
    split ReLU / split batch norm, head on concatenated plane features;
  * ``iq-2ch``   - real network with I and Q as two input channels (4 real
    parameters per tap pair, untied);
  * ``real-1ch`` - real network that consumes only the in-phase component.

The stage map is fixed: stem = conv(first_kernel, stride 2) + BN + ReLU +
maxpool(3, stride 2), then four stages of basic blocks (two 3-tap convs
plus identity shortcut; stage transitions double the channels and halve
the length through a strided 1-tap projection), then global average pool
and an affine head to `num_classes` logits.
"""
import dataclasses
import json

import numpy as np

from . import autodiff as ad
from . import nn
from .seeding import rng_from, INIT

ARITHMETIC_MODES = ("complex", "iq-2ch", "real-1ch")
HEADS = ("softmax-ce", "sigmoid-bce")

# blocks per stage for each supported depth; depth = 2 + 2 * sum(blocks)
STAGE_BLOCKS = {
    22: (2, 2, 3, 3),
    26: (3, 3, 3, 3),
    30: (3, 4, 4, 3),
    34: (4, 4, 4, 4),
    38: (4, 5, 5, 4),
}


@dataclasses.dataclass
class ModelConfig:
    arithmetic: str
    depth: int
    base_width: int
    first_kernel: int
    input_length: int
    num_classes: int
    head: str = "softmax-ce"

    def validate(self):
        if self.arithmetic not in ARITHMETIC_MODES:
            raise ValueError(
                f"arithmetic={self.arithmetic!r}: expected one of {ARITHMETIC_MODES}"
            )
        if self.depth not in STAGE_BLOCKS:
            raise ValueError(
                f"depth={self.depth}: supported depths are {sorted(STAGE_BLOCKS)}"
            )
        if self.head not in HEADS:
            raise ValueError(f"head={self.head!r}: expected one of {HEADS}")
        if self.first_kernel % 2 != 1 or self.first_kernel < 1:
            raise ValueError("first_kernel must be odd and positive")
        if self.base_width < 1:
            raise ValueError("base_width must be >= 1")
        if self.input_length < 32:
            raise ValueError("input_length must be >= 32 (stem + 3 stage strides)")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d).validate()

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def stage_channels(base_width):
    return (base_width, 2 * base_width, 4 * base_width, 8 * base_width)


# ---------------------------------------------------------------------------
# building blocks


class _BasicBlock(nn.Module):
    def __init__(self, make, in_ch, out_ch, stride, rng):
        self.conv1 = make.conv(in_ch, out_ch, 3, stride=stride, rng=rng)
        self.bn1 = make.bn(out_ch)
        self.conv2 = make.conv(out_ch, out_ch, 3, stride=1, rng=rng)
        self.bn2 = make.bn(out_ch)
        if stride != 1 or in_ch != out_ch:
            self.proj_conv = make.conv(in_ch, out_ch, 1, stride=stride, pad=0, rng=rng)
            self.proj_bn = make.bn(out_ch)
        else:
            self.proj_conv = None
            self.proj_bn = None
        self._relu = make.relu()

    def __call__(self, x, train=False):
        out = self._relu(self.bn1(self.conv1(x), train))
        out = self.bn2(self.conv2(out), train)
        if self.proj_conv is not None:
            shortcut = self.proj_bn(self.proj_conv(x), train)
        else:
            shortcut = x
        return self._relu(_residual_add(out, shortcut))


def _residual_add(a, b):
    if isinstance(a, nn.ComplexTensor):
        return nn.ComplexTensor(ad.add(a.re, b.re), ad.add(a.im, b.im))
    return ad.add(a, b)


class _ComplexHead(nn.Module):
    """Global average pool each plane, concatenate, one real affine map."""

    def __init__(self, ch, num_classes, rng):
        self.fc = nn.Linear(2 * ch, num_classes, rng=rng)

    def __call__(self, x, train=False):
        feats = ad.concat([ad.global_avg_pool(x.re), ad.global_avg_pool(x.im)], axis=1)
        return self.fc(feats)


class _RealHead(nn.Module):
    def __init__(self, ch, num_classes, rng):
        self.fc = nn.Linear(ch, num_classes, rng=rng)

    def __call__(self, x, train=False):
        return self.fc(ad.global_avg_pool(x))


class _ComplexLayers:
    conv = staticmethod(nn.ComplexConv1d)
    bn = staticmethod(nn.SplitBatchNorm)
    relu = staticmethod(nn.SplitReLU)
    pool = staticmethod(nn.SplitMaxPool1d)
    head = staticmethod(_ComplexHead)


class _RealLayers:
    conv = staticmethod(nn.Conv1d)
    bn = staticmethod(nn.BatchNorm1d)
    relu = staticmethod(nn.ReLU)
    pool = staticmethod(nn.MaxPool1d)
    head = staticmethod(_RealHead)


class ResNet1D(nn.Module):
    def __init__(self, cfg, seed=0):
        cfg.validate()
        self.cfg = cfg
        make = _ComplexLayers if cfg.arithmetic == "complex" else _RealLayers
        rng = rng_from(seed, INIT)
        in_ch = {"complex": 1, "iq-2ch": 2, "real-1ch": 1}[cfg.arithmetic]
        chans = stage_channels(cfg.base_width)

        self.stem_conv = make.conv(in_ch, chans[0], cfg.first_kernel, stride=2, rng=rng)
        self.stem_bn = make.bn(chans[0])
        self.stem_pool = make.pool(3, 2, 1)
        self._relu = make.relu()

        blocks = STAGE_BLOCKS[cfg.depth]
        prev = chans[0]
        for si, (ch, n_blocks) in enumerate(zip(chans, blocks), start=1):
            stage = []
            for bi in range(n_blocks):
                stride = 2 if (si > 1 and bi == 0) else 1
                stage.append(_BasicBlock(make, prev, ch, stride, rng))
                prev = ch
            setattr(self, f"stage{si}", stage)
        self.head = make.head(chans[3], cfg.num_classes, rng)

    # -- forward -----------------------------------------------------------

    def adapt_input(self, batch):
        """Complex (B, D) array -> the mode's network input."""
        batch = np.asarray(batch)
        if batch.ndim != 2:
            raise ValueError(f"expected (batch, length) input, got shape {batch.shape}")
        if batch.shape[1] != self.cfg.input_length:
            raise ValueError(
                f"input length (axis 1) is {batch.shape[1]}, model expects "
                f"{self.cfg.input_length}"
            )
        re = np.ascontiguousarray(batch.real[:, None, :], dtype=np.float32)
        im = np.ascontiguousarray(batch.imag[:, None, :], dtype=np.float32)
        if self.cfg.arithmetic == "complex":
            return nn.ComplexTensor(ad.Tensor(re), ad.Tensor(im))
        if self.cfg.arithmetic == "iq-2ch":
            return ad.Tensor(np.concatenate([re, im], axis=1))
        return ad.Tensor(re)

    def forward(self, batch, train=False):
        """Raw complex batch (B, D) -> logits Tensor (B, num_classes)."""
        x = self.adapt_input(batch)
        x = self._relu(self.stem_bn(self.stem_conv(x), train))
        x = self.stem_pool(x)
        for si in range(1, 5):
            for block in getattr(self, f"stage{si}"):
                x = block(x, train)
        return self.head(x)

    def predict_logits(self, batch):
        with ad.no_grad():
            return self.forward(batch, train=False).data

    # -- state -------------------------------------------------------------

    def snapshot(self):
        return [(name, arr.copy()) for name, arr in self.state_arrays()]

    def restore(self, snap):
        current = dict(self.state_arrays())
        if set(current) != {name for name, _ in snap}:
            raise ValueError("snapshot does not match model structure")
        for name, arr in snap:
            current[name][...] = arr


def build_resnet(cfg, seed=0):
    return ResNet1D(cfg, seed=seed)


def count_parameters(model):
    """Exact number of real scalars with gradients."""
    return int(sum(p.data.size for p in model.parameters()))


# ---------------------------------------------------------------------------
# closed-form accounting (independent of the built model)


def _geometry(cfg):
    """Yield ('conv', ci, co, m) / ('bn', ch) / ('linear', fi, fo) entries
    for the fixed stage map, from the config alone."""
    chans = stage_channels(cfg.base_width)
    in_ch = 2 if cfg.arithmetic == "iq-2ch" else 1
    yield ("conv", in_ch, chans[0], cfg.first_kernel)
    yield ("bn", chans[0])
    prev = chans[0]
    for si, (ch, n_blocks) in enumerate(zip(chans, STAGE_BLOCKS[cfg.depth]), start=1):
        for bi in range(n_blocks):
            transition = si > 1 and bi == 0
            yield ("conv", prev, ch, 3)
            yield ("bn", ch)
            yield ("conv", ch, ch, 3)
            yield ("bn", ch)
            if transition:
                yield ("conv", prev, ch, 1)
                yield ("bn", ch)
            prev = ch
    feat = 2 * chans[3] if cfg.arithmetic == "complex" else chans[3]
    yield ("linear", feat, cfg.num_classes)


def parameter_count_formula(cfg):
    """Closed-form real-parameter total: complex convs cost 2*Co*Ci*M, real
    convs Co*Ci*M; batch norm costs 2 reals per channel per plane."""
    cfg.validate()
    cplx = cfg.arithmetic == "complex"
    total = 0
    for entry in _geometry(cfg):
        if entry[0] == "conv":
            _, ci, co, m = entry
            total += co * ci * m * (2 if cplx else 1)
        elif entry[0] == "bn":
            total += 2 * entry[1] * (2 if cplx else 1)
        else:
            _, fi, fo = entry
            total += fi * fo + fo
    return total


def receptive_field(cfg):
    """Receptive field (input samples) of one head feature, main path."""
    rf, jump = 1, 1
    rf += (cfg.first_kernel - 1) * jump
    jump *= 2
    rf += 2 * jump  # maxpool(3, stride 2)
    jump *= 2
    for si, n_blocks in enumerate(STAGE_BLOCKS[cfg.depth], start=1):
        for bi in range(n_blocks):
            if si > 1 and bi == 0:
                rf += 2 * jump
                jump *= 2
                rf += 2 * jump
            else:
                rf += 2 * jump
                rf += 2 * jump
    return rf


@dataclasses.dataclass
class ModelSummary:
    real_parameter_count: int
    receptive_field: int
    layers: list

    def format(self):
        lines = [f"{'layer':<18}{'geometry':<26}{'params':>10}"]
        for kind, desc, count in self.layers:
            lines.append(f"{kind:<18}{desc:<26}{count:>10}")
        lines.append(f"{'total':<44}{self.real_parameter_count:>10}")
        lines.append(f"receptive field: {self.receptive_field} samples")
        return "\n".join(lines)


def summarize(cfg):
    cfg.validate()
    cplx = cfg.arithmetic == "complex"
    layers = []
    for entry in _geometry(cfg):
        if entry[0] == "conv":
            _, ci, co, m = entry
            n = co * ci * m * (2 if cplx else 1)
            layers.append(("conv", f"{ci}->{co} x{m}" + (" (complex)" if cplx else ""), n))
        elif entry[0] == "bn":
            n = 2 * entry[1] * (2 if cplx else 1)
            layers.append(("batchnorm", f"{entry[1]} ch" + (" (split)" if cplx else ""), n))
        else:
            _, fi, fo = entry
            layers.append(("linear", f"{fi}->{fo}", fi * fo + fo))
    return ModelSummary(
        real_parameter_count=parameter_count_formula(cfg),
        receptive_field=receptive_field(cfg),
        layers=layers,
    )


def find_matched_width(arithmetic, target_params, cfg_like, max_width=256):
    """Smallest-gap base_width for `arithmetic` whose parameter count best
    matches `target_params`, holding the rest of the config fixed."""
    best = None
    for w in range(1, max_width + 1):
        cand = dataclasses.replace(cfg_like, arithmetic=arithmetic, base_width=w)
        n = parameter_count_formula(cand)
        gap = abs(n - target_params)
        if best is None or gap < best[0]:
            best = (gap, w, n)
    return best[1], best[2]


# ---------------------------------------------------------------------------
# tied-weight conversion (equivalence oracle between arithmetics)


def tie_complex_to_iq(model):
    """Build the untied 2-channel real network that computes exactly the
    same function as `model` by tying its weights to the complex kernels:
    each complex channel c maps to real channels (2c, 2c+1) = (re, im) and
    every tap becomes the 2x2 block [[k_r, -k_i], [k_i, k_r]]."""
    cfg = model.cfg
    if cfg.arithmetic != "complex":
        raise ValueError("tie_complex_to_iq expects a complex-arithmetic model")
    iq_cfg = dataclasses.replace(cfg, arithmetic="iq-2ch", base_width=2 * cfg.base_width)
    iq = ResNet1D(iq_cfg)

    def tie_conv(c_conv, r_conv):
        kr, ki = c_conv.k_real.data, c_conv.k_imag.data
        co, ci, m = kr.shape
        w = r_conv.weight.data
        w[0::2, 0::2] = kr
        w[0::2, 1::2] = -ki
        w[1::2, 0::2] = ki
        w[1::2, 1::2] = kr

    def tie_bn(c_bn, r_bn):
        for field in ("gamma", "beta"):
            tgt = getattr(r_bn, field).data
            tgt[0::2] = getattr(c_bn.bn_re, field).data
            tgt[1::2] = getattr(c_bn.bn_im, field).data
        for field in ("running_mean", "running_var"):
            tgt = getattr(r_bn, field)
            tgt[0::2] = getattr(c_bn.bn_re, field)
            tgt[1::2] = getattr(c_bn.bn_im, field)

    tie_conv(model.stem_conv, iq.stem_conv)
    tie_bn(model.stem_bn, iq.stem_bn)
    for si in range(1, 5):
        for cb, rb in zip(getattr(model, f"stage{si}"), getattr(iq, f"stage{si}")):
            tie_conv(cb.conv1, rb.conv1)
            tie_bn(cb.bn1, rb.bn1)
            tie_conv(cb.conv2, rb.conv2)
            tie_bn(cb.bn2, rb.bn2)
            if cb.proj_conv is not None:
                tie_conv(cb.proj_conv, rb.proj_conv)
                tie_bn(cb.proj_bn, rb.proj_bn)
    # complex head sees [re_0..re_C, im_0..im_C]; the tied net pools
    # interleaved channels [re_0, im_0, re_1, ...]
    ch = stage_channels(cfg.base_width)[3]
    wc = model.head.fc.weight.data
    wi = iq.head.fc.weight.data
    wi[0::2, :] = wc[:ch, :]
    wi[1::2, :] = wc[ch:, :]
    iq.head.fc.bias.data[:] = model.head.fc.bias.data
    return iq
