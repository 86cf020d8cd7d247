"""Projected commutator positivity on two rays for a small-amplitude profile.

On the diagonal ray ``Re z^2 = 0`` and the margin approaches ``-|z|^2/2``;
on the ray ``arg z = pi/12`` the margin is positive.
"""

import numpy as np

from dampwave import build_profile
from dampwave.mourre import eta_scan, hypothesis_report, mourre_grid


def main():
    profile = build_profile(3, 1.0, g_amp=0.1, w_amp=0.1, a_amp=0.1)
    for phi in (np.pi / 4, np.pi / 12):
        for r in (0.05, 0.1, 0.2):
            z = r * np.exp(1j * phi)
            grid = mourre_grid(profile, z)
            best, _ = eta_scan(profile, grid, z)
            print(f"arg z={phi:.4f} |z|={r:4.2f}  eta={best.eta:.4f}  margin/|z|^2={best.relative_margin:7.3f}  "
                  f"range dim {best.range_dim:3d}  {best.status}")
        rep = hypothesis_report(profile, grid, z)
        print("   ", ", ".join(f"{it.name} {it.status}" for it in rep.items))


if __name__ == "__main__":
    main()
