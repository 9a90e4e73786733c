"""
Why a scalar angle target is brittle
====================================

Each codec turns an angle into a training target. Sweeping the angle across
the 0/360 seam shows which targets move smoothly and which jump.
"""

import numpy as np

from circrot import decode, encode, make_codec

# angles just either side of the seam
theta = np.array([359.99, 359.999, 0.001, 0.01])

for method in ("da", "uv", "psc", "cgd"):
    spec = make_codec(method)
    targets = encode(spec, theta)
    step = np.abs(np.diff(targets, axis=0)).max(axis=-1) if targets.ndim > 1 else np.abs(np.diff(targets))
    print(f"{method:4s} largest target step across the seam: {step.max():.4f}")

# the direct-angle target jumps by almost a full turn, the others barely move.
# every codec still decodes back to the right angle:
for method in ("da", "uv", "psc", "cls", "cgd"):
    spec = make_codec(method)
    print(method, np.round(decode(spec, encode(spec, theta)), 3))
