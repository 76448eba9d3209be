# Exporting and importing frozen backbone weights through the binary checkpoint format.
import tempfile
from pathlib import Path

import numpy as np

from tsc_hybrid import BackboneConfig, Tensor, build_backbone
from tsc_hybrid.checkpoint import load_checkpoint

cfg = BackboneConfig(layers=2, hidden=32, heads=4, max_len=64)
source = build_backbone(cfg)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "backbone.tsc"
    source.save(path)
    tensors = load_checkpoint(path)
    print(f"{path.stat().st_size:,} bytes, {len(tensors)} tensors, first few:")
    for name in list(tensors)[:4]:
        print(f"  {name:32s} {tensors[name].shape}")

    # a differently seeded backbone becomes identical after loading
    target = build_backbone(BackboneConfig(**{**cfg.to_dict(), "seed": 123}))
    print("same before load:", target.checksum() == source.checksum())
    target.load(path)
    print("same after load: ", target.checksum() == source.checksum())

x = Tensor(np.random.default_rng(0).normal(size=(1, 10, 32)))
print("identical outputs:", np.array_equal(source(x).data, target(x).data))
print("every parameter frozen:", not any(p.requires_grad for p in target.parameters()))
