"""Covariance eigenvalue ratio of ideal curves, frozen into the vision tests."""
import numpy as np

t = np.linspace(0, np.pi / 2, 200001)
pts = np.stack([np.cos(t), np.sin(t)], axis=1)
ev = np.linalg.eigvalsh(np.cov(pts.T))
print(f"quarter arc linearity {ev[0] / ev[1]:.6f}")

# Quarter arc of radius 200 px stamped as 1-px pixels, as the unit test draws it.
img = set()
for a in np.linspace(0, np.pi / 2, 20000):
    img.add((int(round(300 + 200 * np.cos(a))), int(round(300 - 200 * np.sin(a)))))
p = np.array(sorted(img), dtype=float)
ev = np.linalg.eigvalsh(np.cov(p.T, bias=True))
print(f"pixel quarter arc linearity {ev[0] / ev[1]:.6f} ({len(p)} px)")
