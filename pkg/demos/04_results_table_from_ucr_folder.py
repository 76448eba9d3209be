"""Drive a small experiment matrix from a folder of UCR-format files.

Writes two synthetic datasets in the usual ``Name/Name_TRAIN.tsv`` layout, runs
every encoder family in plain and hybrid mode for a few epochs, and prints the
markdown table.  Re-running the script resumes: finished runs are not repeated.
The same thing from a shell:

    tsc run --data-dir demo_out/data --datasets Sines,Bursts --encoder all --mode both --epochs 3
"""
import sys
from dataclasses import replace
from pathlib import Path

from tsc_hybrid.encoders import EncoderConfig
from tsc_hybrid.experiment import ExperimentSpec, run_matrix
from tsc_hybrid.presets import DESK_BACKBONE
from tsc_hybrid.synthetic import multiscale_task, two_sines, write_dataset
from tsc_hybrid.trainer import TrainConfig

root = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
write_dataset(root / "data", *two_sines(n_train=60, n_test=60, seed=1), name="Sines")
write_dataset(root / "data", *multiscale_task(n_train=60, n_test=60, T=64, seed=1), name="Bursts")

small = EncoderConfig(family="inception", depth=2, cnn_channels=(16, 32, 16), resnet_channels=(16, 16),
                      mlp_widths=(64,))
spec = ExperimentSpec(
    data_dir=root / "data",
    datasets=["Sines", "Bursts"],
    families=["mlp", "cnn", "resnet", "inception", "transformer"],
    modes=["plain", "hybrid"],
    train=TrainConfig(epochs=3, batch_size=16),
    encoder=small,
    backbone=replace(DESK_BACKBONE, layers=1),
    out_dir=root / "results",
)
run_matrix(spec)
print((root / "results" / "results.md").read_text())
