"""Damped solution versus free profile in d = 4 with a small metric perturbation.

The data have ``g = 0``; the ratio ``||u - u0|| / ||u0||`` in the
weighted norm should decrease like ``t^{-rho1}``.  Takes several minutes.
"""

import numpy as np

from dampwave import SectorGrid, build_profile, poly_bump, profile_comparison


def main():
    profile = build_profile(4, 1.0, g_amp=0.1)
    grid = SectorGrid(4, 0, 100.0, 16383)
    f = poly_bump(grid.r, 1.0, 6)
    rep = profile_comparison(profile, grid, f, None, dt=0.005)
    m = rep.window_mask()
    for t, d, r in zip(rep.times[m][::10], rep.series["diff"][m][::10], rep.series["ratio"][m][::10]):
        print(f"t={t:5.1f}  diff={d:.3e}  ratio={r:.3e}")
    for key in ("local", "diff", "ratio"):
        print(f"{key:6s} predicted {rep.predicted[key]:6.2f}  slope {rep.slopes[key]:6.2f}  {rep.verdicts[key]}")
    print("ratio monotone:", rep.ratio_monotone)


if __name__ == "__main__":
    main()
