"""How much DC link voltage does sign coverage need?

Compares the closed-form sufficient bound with the exact per-state minimum
over sampled near-aligned flux states.
"""
# %%
import numpy as np

from minswitch.core import solvability_scan
from minswitch.motor import (
    DEFAULT_PARAMS,
    REFERENCE_PARAMS,
    min_vdc_for_sign_coverage,
    motor_system,
    region_states,
    vdc_lower_bound,
)

print(f"sufficient bound: {vdc_lower_bound(REFERENCE_PARAMS):.1f} V")

states = region_states(2000, omega_max=50.0, flux_max=5.0, seed=1)
need = np.array([min_vdc_for_sign_coverage(REFERENCE_PARAMS, s) for s in states])
print(f"exact minimum over samples: max {need.max():.1f} V, median {np.median(need):.1f} V")

# %%
report = solvability_scan(motor_system(DEFAULT_PARAMS), None, states)
print(f"sign coverage at {DEFAULT_PARAMS.V_DC:.0f} V:", report.n_pass, "/", report.n_samples)
