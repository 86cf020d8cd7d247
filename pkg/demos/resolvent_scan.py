"""Weighted norms of R^(n)(z) and R^(n) - R0^(n) along the elliptic ray, d = 3.

Prints one line per scan: predicted exponent, fitted slope and verdict.
Takes a few minutes.
"""

import numpy as np

from dampwave import build_profile, scan_resolvent, theorem_scans
from dampwave.scaling import TruncationPolicy


def main(d=3, n_values=(0, 1, 2)):
    profile = build_profile(d, 1.0, g_amp=0.3, w_amp=0.2, a_amp=0.3)
    for scan in theorem_scans(d, profile.rho0 / 2, n_values):
        rep = scan_resolvent(profile, scan, TruncationPolicy())
        print(f"{rep.label:34s} predicted {rep.predicted_exponent:6.2f}  slope {rep.slope:6.2f}  "
              f"growth {rep.growth:5.2f}  {rep.verdict}")
        for s in rep.samples:
            print(f"    r={s.r:.2e}  norm={s.norm:.4e}")


if __name__ == "__main__":
    np.set_printoptions(precision=4)
    main()
