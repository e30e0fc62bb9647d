"""Speed has relative degree two, so its sign cannot be steered directly.

Tracking y = omega + a * domega instead restores sign coverage, and a bound on
the filtered error carries over to speed through the impulse-response norm.
"""
# %%
from minswitch.core import check_sign_coverage, modified_output_build, modified_output_error_bound
from minswitch.motor import DEFAULT_PARAMS, initial_state_for_targets, speed_modified_output, speed_output_system

xi = initial_state_for_targets(DEFAULT_PARAMS, 50.0, 2.0).to_vector()
print("omega alone covered:", check_sign_coverage(speed_output_system(DEFAULT_PARAMS), xi)[0])
system, mo = speed_modified_output(DEFAULT_PARAMS, 1.0)
print("omega + domega covered:", check_sign_coverage(system, xi)[0])

# %%
for coeffs in ([1.0, 1.0], [1.0, 0.2], [2.0, 3.0, 1.0]):
    bound = modified_output_error_bound(modified_output_build(coeffs), 0.1)
    print(coeffs, "speed error bound for eps = 0.1:", round(bound, 6))
