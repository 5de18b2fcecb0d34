"""How many circular harmonics does a plane wave across a surface need?

The angle search inside the localizer factors the far-field response into a
Bessel-function basis (elevation only) times complex exponentials of the
azimuth.  The factorization is exact in the limit; truncating it at order N
trades accuracy for speed.  This script measures the worst-case entry error
of the truncated factorization against the direct steering vector and shows
where the error collapses: just past the rule-of-thumb order k * q_max * sin
(elevation), the usual onset of convergence for Bessel functions J_n(x) with
n > x.
"""

import numpy as np

from risloc.geometry import far_field_steering, planar_array
from risloc.jacobi import bessel_orders, jacobi_basis, min_expansion_order

GRID = 16
ELEVATION = 0.9553  # rad

wavelength = 299792458.0 / 28e9
geom = planar_array(GRID, GRID, wavelength=wavelength)
azimuths = np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False)
onset = min_expansion_order(geom, ELEVATION)

exact = np.stack([far_field_steering(geom, ELEVATION, az) for az in azimuths])

print(f"surface {GRID}x{GRID}, elevation {ELEVATION:.3f} rad, "
      f"onset order {onset}")
print(f"{'order':>6} {'max entry error':>16}")
for order in (onset // 2, onset, onset + 8, onset + 16, onset + 24):
    basis = jacobi_basis(geom, ELEVATION, order)
    harmonics = np.exp(1j * np.outer(azimuths, bessel_orders(order)))
    approx = harmonics @ basis
    worst = np.max(np.abs(approx - exact))
    print(f"{order:>6} {worst:>16.3e}")
