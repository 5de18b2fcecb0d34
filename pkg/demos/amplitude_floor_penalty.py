"""What an unmodeled amplitude floor costs a near-field localizer.

The reflection amplitude of each surface element depends on the phase it
applies.  A receiver that assumes unit amplitudes everywhere is working with
a misspecified model: its achievable accuracy is no longer the classical CRB
but the misspecified bound plus a bias floor that does not shrink with SNR.

This script sweeps the amplitude floor beta_min at a desk-scale setup and
prints the three bounds side by side.  Watch the last column: once the SNR
is high enough, the mismatched lower bound stops improving while the
matched CRB keeps falling.
"""

import numpy as np

from risloc.bounds import fim, mcrb_matrices, pseudo_true
from risloc.geometry import planar_array, unit_direction
from risloc.ris import RisAmplitudeParams, profile_matrix, random_phase_schedule
from risloc.signal import ParamVector, solve_noise_for_snr

GRID = 16           # 16 x 16 surface
T = 50              # snapshots
CARRIER_HZ = 28e9
SNRS_DB = (20.0, 40.0)
FLOORS = (0.0, 0.25, 0.5, 0.75, 1.0)

wavelength = 299792458.0 / CARRIER_HZ
geom = planar_array(GRID, GRID, wavelength=wavelength)
p_ue = 0.60 * unit_direction(0.9553, 0.7854)
p_bs = 1.20 * unit_direction(0.6, 2.4)
phases = random_phase_schedule(GRID * GRID, T, seed=7)

print(f"surface {GRID}x{GRID}, T={T}, user at {np.round(p_ue, 3)} m")
print(f"{'beta_min':>8} {'SNR':>5} {'CRB':>10} {'MCRB':>10} {'LB':>10} {'LB/CRB':>8}")
for floor in FLOORS:
    zeta = RisAmplitudeParams(beta_min=floor, kappa=1.5, phi=0.0)
    truth = ParamVector(gain=1.0 + 0.0j, position=p_ue, zeta=zeta)
    true_w = profile_matrix(phases, zeta)
    model_w = profile_matrix(phases, zeta, ideal=True)
    pseudo = pseudo_true(truth, true_w, model_w, geom, p_bs)
    for snr in SNRS_DB:
        noise = solve_noise_for_snr(snr, truth, true_w, geom, p_bs, 1.0)
        crb = fim(truth, phases, geom, p_bs, 1.0, noise).pos_rmse_bound
        report = mcrb_matrices(pseudo.params, truth, true_w, model_w,
                               geom, p_bs, 1.0, noise)
        print(f"{floor:>8.2f} {snr:>5.0f} {crb:>10.4f} "
              f"{report.mcrb_pos_rmse:>10.4f} {report.lb_pos_rmse:>10.4f} "
              f"{report.lb_pos_rmse / crb:>8.1f}")
print("beta_min = 1 recovers the matched model: the penalty vanishes.")
