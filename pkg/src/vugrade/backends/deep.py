"""Deep backend: a 152-layer residual network fine-tuned per stage.

The final fully connected layer is replaced by one producing all head
logits; by default only that layer trains and the ImageNet-pretrained
backbone stays frozen (set ``train_all_layers`` to unfreeze it). Needs
the ``deep`` extra (torch + torchvision).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import TrainingError
from ..preprocessing import PreprocessConfig, VUImage
from .base import (
    ClassifierSpec,
    TrainedClassifier,
    check_images,
    class_weights,
    read_model_metadata,
    validate_training_inputs,
    write_model_metadata,
)

BATCH_SIZE = 16


def _build_network(spec: ClassifierSpec, preprocess: PreprocessConfig, load_weights: bool):
    import torch
    import torch.nn as nn
    from torchvision.models import ResNet152_Weights, resnet152

    if load_weights and spec.pretrained:
        try:
            net = resnet152(weights=ResNet152_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise TrainingError(
                f"could not fetch pretrained backbone weights ({exc}); "
                "set pretrained=False to train from scratch"
            ) from exc
    else:
        net = resnet152(weights=None)

    if not preprocess.channel_replication:
        old = net.conv1
        conv = nn.Conv2d(
            1, old.out_channels, kernel_size=old.kernel_size,
            stride=old.stride, padding=old.padding, bias=False,
        )
        if load_weights and spec.pretrained:
            with torch.no_grad():
                conv.weight.copy_(old.weight.sum(dim=1, keepdim=True))
        net.conv1 = conv

    if not spec.train_all_layers:
        for p in net.parameters():
            p.requires_grad = False
    net.fc = nn.Linear(net.fc.in_features, spec.n_outputs)
    return net


def _to_tensor(images: Sequence[VUImage], preprocess: PreprocessConfig):
    import torch

    arr = np.stack([img.pixels for img in images]).astype(np.float32)
    x = torch.from_numpy(arr).unsqueeze(1)
    if preprocess.channel_replication:
        x = x.repeat(1, 3, 1, 1)
    return x


class DeepClassifier(TrainedClassifier):
    def __init__(self, spec: ClassifierSpec, preprocess: PreprocessConfig, net):
        self.spec = spec
        self.preprocess = preprocess
        self._net = net
        self._net.eval()

    @classmethod
    def train(
        cls,
        images: Sequence[VUImage],
        targets: np.ndarray,
        spec: ClassifierSpec,
        preprocess: PreprocessConfig,
    ) -> "DeepClassifier":
        import torch
        import torch.nn.functional as F

        targets = validate_training_inputs(images, targets, spec, preprocess)
        torch.manual_seed(spec.seed)
        net = _build_network(spec, preprocess, load_weights=True)
        x = _to_tensor(images, preprocess)
        y = torch.from_numpy(targets)

        n_classes = spec.classes_per_head
        head_weights = []
        for h in range(spec.n_heads):
            present = targets[:, h] >= 0
            w = class_weights(targets[present, h], n_classes, spec.class_weighting, h)
            head_weights.append(torch.from_numpy(w.astype(np.float32)))

        params = [p for p in net.parameters() if p.requires_grad]
        optimizer = torch.optim.Adam(params, lr=spec.learning_rate)
        order_rng = torch.Generator().manual_seed(spec.seed)

        net.train()
        for _ in range(spec.iterations):
            perm = torch.randperm(len(images), generator=order_rng)
            for start in range(0, len(images), BATCH_SIZE):
                idx = perm[start : start + BATCH_SIZE]
                logits = net(x[idx])
                loss = logits.new_zeros(())
                for h in range(spec.n_heads):
                    yh = y[idx, h]
                    mask = yh >= 0
                    if mask.any():
                        head_logits = logits[:, h * n_classes : (h + 1) * n_classes]
                        loss = loss + F.cross_entropy(
                            head_logits[mask], yh[mask], weight=head_weights[h]
                        )
                if loss.requires_grad:
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()
        net.eval()
        return cls(spec, preprocess, net)

    def predict_dist(self, images: Sequence[VUImage]) -> np.ndarray:
        import torch

        check_images(images, self.preprocess)
        n_classes = self.spec.classes_per_head
        out = np.empty((len(images), self.spec.n_heads, n_classes))
        with torch.no_grad():
            for start in range(0, len(images), BATCH_SIZE):
                batch = images[start : start + BATCH_SIZE]
                logits = self._net(_to_tensor(batch, self.preprocess))
                for h in range(self.spec.n_heads):
                    head_logits = logits[:, h * n_classes : (h + 1) * n_classes]
                    probs = torch.softmax(head_logits.double(), dim=1)
                    out[start : start + len(batch), h, :] = probs.numpy()
        return out

    def save(self, model_dir: Path) -> None:
        import torch

        model_dir = Path(model_dir)
        write_model_metadata(model_dir, self.spec, self.preprocess)
        torch.save(self._net.state_dict(), model_dir / "params.pt")

    @classmethod
    def load(cls, model_dir: Path) -> "DeepClassifier":
        import torch

        model_dir = Path(model_dir)
        spec, preprocess = read_model_metadata(model_dir)
        net = _build_network(spec, preprocess, load_weights=False)
        state = torch.load(model_dir / "params.pt", map_location="cpu", weights_only=True)
        net.load_state_dict(state)
        return cls(spec, preprocess, net)
