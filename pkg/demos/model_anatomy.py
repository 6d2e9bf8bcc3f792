"""Tour of the two-level binarization transformer: how a tile is cut into
patches and sub-patches, what flows through each branch, and how the
pieces are sized.  Uses the small test configuration so everything is
instant.
"""

import numpy as np

from docbinformer.autodiff import Tensor
from docbinformer.model import (
    DocBinFormer,
    default_config,
    parameter_count,
    patchify,
    stitch,
    subpatchify,
    tiny_config,
)


def main():
    rng = np.random.default_rng(0)
    config = tiny_config()
    print(f"tile {config.height}x{config.width}, patch {config.patch_size}, "
          f"sub-patch {config.subpatch_size}")
    print(f"patch tokens: {config.n_patch} of dim {config.global_dim}; "
          f"sub-patch tokens per patch: {config.n_subpatch_per_patch} "
          f"of dim {config.local_dim}")

    # Patch decomposition is a pure reshape: reassembly is exact.
    page = rng.random((config.height, config.width))
    patches = patchify(Tensor(page), config.patch_size)
    print("patchify:", page.shape, "->", patches.shape)
    rebuilt = stitch(patches, config.height, config.width, config.patch_size)
    print("stitch restores the page exactly:",
          bool(np.array_equal(rebuilt.data, page)))

    subs = subpatchify(Tensor(page), config.patch_size, config.subpatch_size)
    print("subpatchify:", page.shape, "->", subs.shape,
          "(patch, sub-patch, pixels)")

    # A forward pass maps a grayscale tile to per-pixel ink probabilities.
    model = DocBinFormer(config, seed=0)
    out = model.forward(page.astype(np.float32))
    print("forward:", page.shape, "->", out.shape,
          f"values in ({out.min():.3f}, {out.max():.3f})")

    batch = rng.random((5, config.height, config.width)).astype(np.float32)
    print("batched forward:", batch.shape, "->", model.forward(batch).shape)

    # Where the parameters live, for the full-size configuration.
    print()
    print("full-size parameter budget:")
    print(parameter_count(default_config()).describe())


if __name__ == "__main__":
    main()
