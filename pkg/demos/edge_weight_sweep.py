"""
How the edge weight affects accuracy
====================================

A small sequence with whole-pixel camera shifts is saved to disk, then the
edge weight is swept from 1 to 100 through the command line, exactly as a
user would run it.  On noiseless data every setting should recover the
motion.
"""

import subprocess
import sys
from pathlib import Path

from snippet_vo.io_formats import save_sequence
from snippet_vo.synthetic import sweep_sequence

seq = Path("demo_output/sweep_sequence")
images, depths, world, K = sweep_sequence()
save_sequence(seq, images, depths, world, K)
print("saved", len(images), "frames to", seq)

cmd = [
    sys.executable, "-m", "snippet_vo.cli", "sweep",
    "--seq", str(seq), "--intrinsics", str(seq / "intrinsics.txt"),
    "--size", "64x208", "--method", "gauss_newton", "--lambdas", "1,20,80,100",
]
print(" ".join(cmd[2:]))
print(subprocess.run(cmd, capture_output=True, text=True, check=True).stdout)
