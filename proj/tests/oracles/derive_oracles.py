"""Independent high-precision evaluation of the closed-form test oracles.

Run once with `python3 tests/oracles/derive_oracles.py > tests/oracle_values.hpp`.
The output is checked in; the C++ tests never call this script.
"""

from mpmath import mp, mpf, sqrt, log

mp.dps = 40

values = {}

# One step on L = theta^2 with c = 1 from theta = 1, eta = 0.1, T = I.
theta0, c, eta = mpf(1), mpf(1), mpf("0.1")
l0 = sqrt(theta0**2 + c)
v = 2 * theta0 / (2 * l0)
r1 = l0 / (1 + 2 * eta * v**2)
values["kStepR1"] = r1
values["kStepTheta1"] = theta0 - 2 * eta * r1 * v

# Step bounds for alpha = 2, lambda1 = 1, l* = 1, r0 = 2, l(theta0) = 1.5.
alpha, lam1, lstar, r0, lth0 = mpf(2), mpf(1), mpf(1), mpf(2), mpf("1.5")
eta_s = 4 * lstar * lam1 / (alpha * r0**2) * (r0 - (lth0 - lstar) / lam1)
values["kBoundsEtaS"] = eta_s
values["kBoundsEta0"] = lam1 * lstar / (alpha * r0)
values["kBoundsFloorAtHalf"] = alpha * r0**2 / (4 * lstar * lam1) * (eta_s - mpf("0.5"))

# Bregman divergence of K(s) = s ln s - s between xi = 1 and theta = 2.
K = lambda s: s * log(s) - s
dK = lambda s: log(s)
values["kBregmanEntropy12"] = K(mpf(1)) - K(mpf(2)) - dK(mpf(2)) * (1 - 2)

# Rosenbrock gradient at (-0.5, 2) with alpha = 100.
x1, x2, a = mpf("-0.5"), mpf(2), mpf(100)
values["kRosenGrad0"] = 2 * (x1 - 1) - 4 * a * x1 * (x2 - x1**2)
values["kRosenGrad1"] = 2 * a * (x2 - x1**2)
values["kRosenL0"] = (x1 - 1) ** 2 + a * (x2 - x1**2) ** 2

# Shift rule at the Rosenbrock start: lambda1 = min(1/0.5, 1/2), margin 2.
lam = min(1 / (-x1), 1 / x2)
q = 2 / lam
values["kRosenShift"] = (q - 1) ** 2 / (2 * q - 1) * (values["kRosenL0"] - 1) - 1

# Feasibility line search on U(theta) = theta from theta = 1, v = 1, r = 1, eps = 1/2:
# 1 / (1 + 2 eta) = 1/2.
values["kLineSearchSup"] = mpf(1) / 2

# Scalar D-optimal design with u = (1), (2) at theta = (0.3, 0.7).
s = mpf("0.3") + 4 * mpf("0.7")
values["kDoptScalarL"] = -log(s)
values["kDoptScalarG0"] = -1 / s
values["kDoptScalarG1"] = -4 / s

# Projection with G = diag(1, 4), B = (1, 1).
Ginv_Bt = (mpf(1), mpf(1) / 4)
schur = Ginv_Bt[0] + Ginv_Bt[1]
P = [[(1 if i == j else 0) - Ginv_Bt[i] / schur for j in range(2)] for i in range(2)]
for i in range(2):
    for j in range(2):
        values[f"kProjP{i}{j}"] = P[i][j]

# Projected PL example, a = b = 1, alpha = beta = 1, theta = (1, 0).
values["kPlPgradSq"] = mpf(1) / 2
values["kPlGap"] = mpf(1) / 2 - mpf(1) / 4
values["kPlMu"] = mpf(1)

print("#pragma once")
print("// Generated by tests/oracles/derive_oracles.py (40 significant digits, printed to 20).")
print("namespace oracle {")
for k, val in values.items():
    print(f"inline constexpr double {k} = {mp.nstr(val, 20, strip_zeros=False)};")
print("}  // namespace oracle")
