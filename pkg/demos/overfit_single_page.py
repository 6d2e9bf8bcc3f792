"""Overfit the small model on one synthetic degraded page and watch the
reconstruction sharpen.  Takes a few seconds on a laptop CPU.
"""

import numpy as np

from docbinformer.data import synthetic_pair, tile
from docbinformer.metrics import f_measure, psnr
from docbinformer.model import tiny_config
from docbinformer.training import TrainConfig, train


def main():
    pair = synthetic_pair(256, 256, seed=0, ink_factor=0.3,
                          gradient_depth=0.3, noise_level=0.0,
                          stain_count=0, stroke_thickness=(4, 6))
    ink_share = float((pair.ground_truth == 0).mean())
    print(f"page: 256x256, ink share {ink_share:.3f}")

    config = tiny_config()     # 16x16 tiles -> 256 training tiles
    schedule = TrainConfig(learning_rate=1.5e-2, batch_size=128,
                           beta2=0.99, weight_decay=0.0,
                           epochs=10**6, max_steps=500, seed=0)
    result = train([pair], config, schedule)

    losses = result.step_losses
    print("loss curve (every 50th step):")
    for i in range(0, len(losses), 50):
        print(f"  step {i:3d}  mse {losses[i]:.4f}")
    print(f"  step {len(losses) - 1:3d}  mse {losses[-1]:.4f}")

    tiles = np.stack(tile(pair.degraded, config.height).tiles)
    truth = np.stack(tile(pair.ground_truth, config.height).tiles)
    final_mse = float(np.mean((result.model.forward(tiles) - truth) ** 2))
    print(f"final mse over the whole page: {final_mse:.4f}")

    binary = result.model.binarize_image(pair.degraded)
    print(f"psnr {psnr(binary, pair.ground_truth):.2f} dB, "
          f"f-measure {f_measure(binary, pair.ground_truth):.1f}%")


if __name__ == "__main__":
    main()
