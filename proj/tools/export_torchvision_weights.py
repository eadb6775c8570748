#!/usr/bin/env python3
# Copyright 2026 The lesionfuse Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Convert torchvision ImageNet weights into lesionfuse tensor archives.

Usage: export_torchvision_weights.py NAME [--out DIR] [--random-init]

NAME is one of resnet50, resnet101, googlenet, vgg13bn, vgg19bn. The archive
is written to DIR/NAME.lfw (DIR defaults to $LESIONFUSE_CACHE, then
~/.cache/lesionfuse). MobileNet v1 has no torchvision release; supply its
archive yourself with the same tensor names.

--random-init skips the download and exports a randomly initialized network
with the same tensor names and shapes, which is enough to check that an
archive loads.
"""

import argparse
import json
import os
import struct
import sys
from pathlib import Path

MAGIC = b"LFTA"
VERSION = 1

MODELS = {
    "resnet50": ("resnet50", "ResNet50_Weights"),
    "resnet101": ("resnet101", "ResNet101_Weights"),
    "googlenet": ("googlenet", "GoogLeNet_Weights"),
    "vgg13bn": ("vgg13_bn", "VGG13_BN_Weights"),
    "vgg19bn": ("vgg19_bn", "VGG19_BN_Weights"),
}


def default_cache() -> Path:
    env = os.environ.get("LESIONFUSE_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "lesionfuse"


def write_archive(path: Path, tensors: dict, meta: dict) -> None:
    import numpy as np

    entries, payload, offset = [], [], 0
    for name in sorted(tensors):
        array = np.ascontiguousarray(tensors[name], dtype="<f8")
        entries.append({"name": name, "shape": list(array.shape), "offset": offset})
        payload.append(array.tobytes())
        offset += array.size
    header = json.dumps({"meta": meta, "tensors": entries}).encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(header)))
        f.write(header)
        for chunk in payload:
            f.write(chunk)
    tmp.replace(path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("name", choices=sorted(MODELS))
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--random-init", action="store_true")
    args = parser.parse_args(argv)

    import torch
    import torchvision

    factory, weights_enum = MODELS[args.name]
    if args.random_init:
        torch.manual_seed(0)
        weights = None
        extra = {"aux_logits": False, "init_weights": True} if args.name == "googlenet" else {}
        model = getattr(torchvision.models, factory)(weights=None, **extra)
    else:
        weights = getattr(torchvision.models, weights_enum).IMAGENET1K_V1
        model = getattr(torchvision.models, factory)(weights=weights)
    state = {
        key: value.detach().double().numpy()
        for key, value in model.state_dict().items()
        if not key.endswith("num_batches_tracked")
    }
    out = (args.out or default_cache()) / f"{args.name}.lfw"
    write_archive(out, state, {"kind": "pretrained-backbone", "source": f"torchvision {weights or 'random init'}"})
    print(f"wrote {len(state)} tensors to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
