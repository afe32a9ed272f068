"""
Edge masks and pixel warps
==========================

The edge term only looks at pixels with a strong Laplace response.  We
build a synthetic texture, extract its edge mask and follow a few pixels
through a camera motion.
"""

from pathlib import Path

import numpy as np

from snippet_vo.camera import warp_field, warp_pixel
from snippet_vo.geometry import euler_to_se3
from snippet_vo.image import edge_mask, laplace
from snippet_vo.io_formats import write_image_pgm, write_mask_pgm
from snippet_vo.synthetic import SinusoidTexture, kitti_like_intrinsics, render_plane_view

out = Path("demo_output")
out.mkdir(exist_ok=True)

K = kitti_like_intrinsics()
texture = SinusoidTexture.random(np.random.default_rng(0))
img, depth = render_plane_view(euler_to_se3(np.zeros(6)), K, (128, 416), texture)

###############################################################################
# Laplace response and the top-10% mask.  The four-neighbour kernel is the
# default; the eight-neighbour one marks slightly more diagonal structure.

for kernel in ("four", "eight"):
    mask = edge_mask(laplace(img, kernel), 90)
    print(f"{kernel:5s} kernel marks {mask.mean():.1%} of pixels")

(out / "frame.pgm").write_bytes(write_image_pgm(img))
(out / "edges.pgm").write_bytes(write_mask_pgm(edge_mask(laplace(img))))

###############################################################################
# A pure sideways translation of d/fx moves every pixel on a plane at
# depth d by one column.

d = 10.0
step = euler_to_se3([0, 0, 0, d / K.fx, 0, 0])
print("pixel (100, 60) lands at", warp_pixel((100, 60), d, K, step))

wf = warp_field(depth, K, step)
print("valid after the move:", wf.valid.sum(), "of", wf.valid.size)
