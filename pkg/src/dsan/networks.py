"""Network zoo: shared encoder, private translation decoders, deeply-supervised
classifiers, and the three discriminator families.

All parameter sharing is explicit: shared components are the *same* module
object under several names, so storage identity is testable. Every network is
fully convolutional and batch-independent (instance normalization, no stochastic
layers), so forward passes are pure functions of parameters and inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ExperimentConfig

# stem is stride 1, then three stride-2 residual stages
STRIDE_PRODUCT = 8
# classifier level 2 taps the second stage output
AUX_STRIDE = 4

_INIT_TAG = 2


def _norm(ch: int) -> nn.InstanceNorm2d:
    return nn.InstanceNorm2d(ch, affine=True, track_running_stats=False)


class DownStage(nn.Module):
    """Stride-2 residual stage: two 3x3 convs plus a 1x1 strided skip."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1)
        self.norm1 = _norm(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.norm2 = _norm(out_ch)
        self.skip = nn.Conv2d(in_ch, out_ch, 1, stride=2)
        self.skip_norm = _norm(out_ch)

    def forward(self, x):
        h = F.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return F.relu(h + self.skip_norm(self.skip(x)))


class ResidualEncoder(nn.Module):
    """Stem conv + three stride-2 residual stages; returns final and stage-2 features."""

    def __init__(self, stem_channels: int, feature_channels: int):
        super().__init__()
        c0 = stem_channels
        self.stem_conv = nn.Conv2d(1, c0, 7, padding=3)
        self.stem_norm = _norm(c0)
        self.stage1 = DownStage(c0, 2 * c0)
        self.stage2 = DownStage(2 * c0, 4 * c0)
        self.stage3 = DownStage(4 * c0, feature_channels)
        self.aux_channels = 4 * c0

    def forward(self, x):
        h = F.relu(self.stem_norm(self.stem_conv(x)))
        h = self.stage1(h)
        aux = self.stage2(h)
        features = self.stage3(aux)
        return features, aux


class ResBlock(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.norm1 = _norm(ch)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
        self.norm2 = _norm(ch)

    def forward(self, x):
        h = F.relu(self.norm1(self.conv1(x)))
        return x + self.norm2(self.conv2(h))


class TranslationDecoder(nn.Module):
    """Three residual blocks, then three 2x deconvolutions back to image size, tanh output."""

    def __init__(self, feature_channels: int, decoder_channels: int):
        super().__init__()
        dc = decoder_channels
        self.proj = nn.Conv2d(feature_channels, dc, 1)
        self.proj_norm = _norm(dc)
        self.blocks = nn.Sequential(ResBlock(dc), ResBlock(dc), ResBlock(dc))
        ups = []
        ch = dc
        for _ in range(3):
            ups += [nn.ConvTranspose2d(ch, ch // 2, 4, stride=2, padding=1), _norm(ch // 2), nn.ReLU()]
            ch //= 2
        self.up = nn.Sequential(*ups)
        self.out_conv = nn.Conv2d(ch, 1, 7, padding=3)

    def forward(self, z):
        h = F.relu(self.proj_norm(self.proj(z)))
        h = self.up(self.blocks(h))
        return torch.tanh(self.out_conv(h))


class LevelClassifier(nn.Module):
    """Pixel classifier head; emits logits upsampled to label resolution."""

    def __init__(self, in_ch: int, num_classes: int, upscale: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, max(in_ch // 2, num_classes), 3, padding=1)
        self.norm1 = _norm(max(in_ch // 2, num_classes))
        self.conv2 = nn.Conv2d(max(in_ch // 2, num_classes), num_classes, 1)
        self.upscale = upscale

    def forward(self, z):
        h = F.relu(self.norm1(self.conv1(z)))
        logits = self.conv2(h)
        return F.interpolate(logits, scale_factor=self.upscale, mode="bilinear", align_corners=False)


class PatchDiscriminator(nn.Module):
    """Four stride-2 convolutions; outputs a grid of realness logits."""

    def __init__(self, in_ch: int, base: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_ch, base, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(base, 2 * base, 4, stride=2, padding=1),
            _norm(2 * base),
            nn.LeakyReLU(0.2),
            nn.Conv2d(2 * base, 4 * base, 4, stride=2, padding=1),
            _norm(4 * base),
            nn.LeakyReLU(0.2),
            nn.Conv2d(4 * base, 1, 4, stride=2, padding=1),
        )
        self.in_channels = in_ch

    def forward(self, x):
        if x.shape[1] != self.in_channels:
            raise ValueError(f"expected {self.in_channels} input channels, got {x.shape[1]}")
        return self.net(x)


@dataclass
class Embedding:
    """Encoder output: final features plus the stage-2 block consumed by classifier 2."""

    features: torch.Tensor
    aux: torch.Tensor


class ModelState:
    """All component networks plus the sharing topology that ties them together.

    Component names are stable and used as checkpoint keys. Aliased names
    (e.g. encoder_trans when the encoder is shared) point at the same module
    object; `unique_components` deduplicates by identity.
    """

    COMPONENT_ORDER = (
        "encoder", "encoder_trans",
        "decoder_source", "decoder_target",
        "classifier_1", "classifier_2",
        "disc_img_source", "disc_img_target",
        "disc_sem_1", "disc_sem_2", "disc_sem_gen_1", "disc_sem_gen_2",
    )

    def __init__(self, cfg: ExperimentConfig, components: dict[str, nn.Module]):
        self.cfg = cfg
        self.sharing = cfg.sharing
        self.components = components

    def __getitem__(self, name: str) -> nn.Module:
        return self.components[name]

    def unique_components(self) -> dict[str, nn.Module]:
        """First name wins for each distinct module object."""
        seen: dict[int, str] = {}
        out: dict[str, nn.Module] = {}
        for name in self.COMPONENT_ORDER:
            mod = self.components[name]
            if id(mod) not in seen:
                seen[id(mod)] = name
                out[name] = mod
        return out

    def parameter_count(self) -> int:
        return sum(p.numel() for m in self.unique_components().values() for p in m.parameters())

    def state_dicts(self) -> dict[str, dict]:
        return {name: mod.state_dict() for name, mod in self.unique_components().items()}

    def load_state_dicts(self, dicts: dict[str, dict]) -> None:
        unique = self.unique_components()
        if set(dicts) != set(unique):
            raise ValueError(f"checkpoint components {sorted(dicts)} != model components {sorted(unique)}")
        for name, mod in unique.items():
            mod.load_state_dict(dicts[name])


def _init_gan(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, 0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.InstanceNorm2d) and m.affine:
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def _init_seg(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.kaiming_normal_(m.weight, nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.InstanceNorm2d) and m.affine:
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def init_networks(cfg: ExperimentConfig) -> ModelState:
    """Build all networks with the sharing topology materialized under cfg.seed."""
    if cfg.image_size % STRIDE_PRODUCT != 0:
        raise ValueError(f"image_size {cfg.image_size} not divisible by stride product {STRIDE_PRODUCT}")

    dims = cfg.network
    seed = int(np.random.SeedSequence([cfg.seed, _INIT_TAG]).generate_state(1)[0])
    with torch.random.fork_rng():
        torch.manual_seed(seed)

        encoder = ResidualEncoder(dims.stem_channels, dims.feature_channels)
        _init_seg(encoder)
        if cfg.sharing.share_encoder:
            encoder_trans = encoder
        else:
            encoder_trans = ResidualEncoder(dims.stem_channels, dims.feature_channels)
            _init_seg(encoder_trans)

        decoder_source = TranslationDecoder(dims.feature_channels, dims.decoder_channels)
        _init_gan(decoder_source)
        if cfg.sharing.share_decoders:
            decoder_target = decoder_source
        else:
            decoder_target = TranslationDecoder(dims.feature_channels, dims.decoder_channels)
            _init_gan(decoder_target)

        classifier_1 = LevelClassifier(dims.feature_channels, cfg.num_classes, STRIDE_PRODUCT)
        classifier_2 = LevelClassifier(encoder.aux_channels, cfg.num_classes, AUX_STRIDE)
        _init_seg(classifier_1)
        _init_seg(classifier_2)

        disc_img_source = PatchDiscriminator(1, dims.disc_channels)
        disc_img_target = PatchDiscriminator(1, dims.disc_channels)
        disc_sem_1 = PatchDiscriminator(cfg.num_classes, dims.disc_channels)
        disc_sem_2 = PatchDiscriminator(cfg.num_classes, dims.disc_channels)
        for d in (disc_img_source, disc_img_target, disc_sem_1, disc_sem_2):
            _init_gan(d)
        if cfg.sharing.share_semantic_discriminators:
            disc_sem_gen_1, disc_sem_gen_2 = disc_sem_1, disc_sem_2
        else:
            disc_sem_gen_1 = PatchDiscriminator(cfg.num_classes, dims.disc_channels)
            disc_sem_gen_2 = PatchDiscriminator(cfg.num_classes, dims.disc_channels)
            _init_gan(disc_sem_gen_1)
            _init_gan(disc_sem_gen_2)

    return ModelState(cfg, {
        "encoder": encoder,
        "encoder_trans": encoder_trans,
        "decoder_source": decoder_source,
        "decoder_target": decoder_target,
        "classifier_1": classifier_1,
        "classifier_2": classifier_2,
        "disc_img_source": disc_img_source,
        "disc_img_target": disc_img_target,
        "disc_sem_1": disc_sem_1,
        "disc_sem_2": disc_sem_2,
        "disc_sem_gen_1": disc_sem_gen_1,
        "disc_sem_gen_2": disc_sem_gen_2,
    })


def encoder_forward(state: ModelState, images: torch.Tensor, path: str = "seg") -> Embedding:
    """Run the segmentation-path ("seg") or translation-path ("trans") encoder."""
    if images.dim() != 4 or images.shape[1] != 1:
        raise ValueError(f"expected images shaped B x 1 x H x W, got {tuple(images.shape)}")
    if images.shape[2] % STRIDE_PRODUCT or images.shape[3] % STRIDE_PRODUCT:
        raise ValueError(f"spatial size {tuple(images.shape[2:])} not divisible by {STRIDE_PRODUCT}")
    enc = state["encoder" if path == "seg" else "encoder_trans"]
    features, aux = enc(images)
    return Embedding(features=features, aux=aux)


def decoder_forward(state: ModelState, z: Embedding, domain: str) -> torch.Tensor:
    if domain not in ("source", "target"):
        raise ValueError(f"domain must be source or target, got {domain!r}")
    return state[f"decoder_{domain}"](z.features)


def classifier_forward(state: ModelState, z: Embedding, level: int) -> torch.Tensor:
    """Per-pixel class probabilities at label resolution (softmax applied)."""
    if level == 1:
        logits = state["classifier_1"](z.features)
    elif level == 2:
        logits = state["classifier_2"](z.aux)
    else:
        raise ValueError(f"level must be 1 or 2, got {level}")
    return torch.softmax(logits, dim=1)


def discriminator_forward(state: ModelState, x: torch.Tensor, kind: str) -> torch.Tensor:
    """Realness logit grid (no sigmoid); kind selects the discriminator."""
    name = {
        "img_source": "disc_img_source",
        "img_target": "disc_img_target",
        "sem_1": "disc_sem_1",
        "sem_2": "disc_sem_2",
        "sem_gen_1": "disc_sem_gen_1",
        "sem_gen_2": "disc_sem_gen_2",
    }.get(kind)
    if name is None:
        raise ValueError(f"unknown discriminator kind {kind!r}")
    return state[name](x)


def translate(state: ModelState, x: torch.Tensor, direction: str) -> torch.Tensor:
    """s_to_t: decode source embeddings with the target decoder; t_to_s symmetric."""
    if direction == "s_to_t":
        return decoder_forward(state, encoder_forward(state, x, path="trans"), "target")
    if direction == "t_to_s":
        return decoder_forward(state, encoder_forward(state, x, path="trans"), "source")
    raise ValueError(f"direction must be s_to_t or t_to_s, got {direction!r}")


def set_requires_grad(modules, flag: bool) -> None:
    for mod in modules:
        for p in mod.parameters():
            p.requires_grad_(flag)
