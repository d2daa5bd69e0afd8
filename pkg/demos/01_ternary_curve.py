"""The uniform-ternary worked example, end to end.

A uniform ternary source, a guarded guessing payoff (the adversary's
guess scores only when the three legitimate symbols are distinct), and
identity disclosure.  The optimal adversary error as a function of the
key rate has a closed form: linear up to R0 = 1, a gentler linear climb
up to log2(3), flat at 2/3 beyond.  This script evaluates the
time-shared achievability candidates along the curve and checks them
against that closed form.
"""

from cascade_secrecy import analytic_pi, corner_candidate, eval_inner_tuple, verify_example
from cascade_secrecy.ternary import LOG2_3, ternary_example, time_shared_candidate

ex = ternary_example()

print("key rate   analytic    evaluated")
for r0 in (0.0, 0.25, 0.5, 0.75, 1.0, 1.2, 1.4, LOG2_3, 1.8, 2.0):
    cand = time_shared_candidate(r0)
    t = eval_inner_tuple(cand, ex.side, ex.payoff, p_x=ex.p_x)
    print(f"{r0:8.4f}   {analytic_pi(r0):.6f}    {t.pi:.6f}")

# the two corners anchor the curve's upper segment: full hiding of one
# action at unit key, full hiding of both at log2(3)
for i in (1, 2):
    t = eval_inner_tuple(corner_candidate(i), ex.side, ex.payoff, p_x=ex.p_x)
    print(f"corner {i}: R0={t.r0:.6f}  R1={t.r1:.6f}  R2={t.r2:.6f}  Pi={t.pi:.6f}")

report = verify_example()
print("verification:", "PASS" if report.passed else "FAIL")
