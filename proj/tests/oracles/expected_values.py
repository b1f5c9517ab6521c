"""Independent high-precision computation of the frozen expected values used
by the unit tests. Run with `python3 expected_values.py`; nothing here imports
the C++ code."""
from itertools import product

from mpmath import mp, mpf, sqrt, erfc, ceil, floor

mp.dps = 40


def phi(x):
    return erfc(-mpf(x) / sqrt(2)) / 2


print("Phi(0)    =", mp.nstr(phi(0), 20))
print("Phi(1)    =", mp.nstr(phi(1), 20))
print("Phi(3)    =", mp.nstr(phi(3), 20))
print("Phi(-3)   =", mp.nstr(phi(-3), 20))
print("Phi(-8)   =", mp.nstr(phi(-8), 20))
print("Phi(-2.315)=", mp.nstr(phi(-2.315), 20))
print("2Phi(3)-1 =", mp.nstr(2 * phi(3) - 1, 20))

# generalized Friis, S=4, alpha=0.5, m=4, d=2
print("ideal(4,0.5,4,2) =", mp.nstr(4 * (mpf("0.5") / 2) ** 4, 20))

# acceptance interval factors for ratio 0.5 and 1.2 at d=1
print("interval r=0.5 :", mp.nstr(1 / sqrt(mpf("1.5")), 20), mp.nstr(1 / sqrt(mpf("0.5")), 20))
print("interval r=1.2 lower:", mp.nstr(1 / sqrt(mpf("2.2")), 20))

# Genuine acceptance example n=100, n0=52, theta=2, p=0.9973
n, n0, th, p = 100, 52, 2, mpf("0.9973")
tau = (n + th - 2 * n0 * p) / (2 * sqrt(p * (1 - p) * (n0 - 1)))
print("tau =", mp.nstr(tau, 20), " 1-Phi(tau) =", mp.nstr(1 - phi(tau), 20))

# noise scale, unit square, alpha=1, S=1, m=2
print("SS unit square =", mp.nstr((1 / sqrt(2)) ** 2 / 3, 20))

# 5-node filter fixpoint traced by brute force. M[j][i] = node j accuses i.
M = [
    [0, 0, 1, 1, 1],
    [0, 0, 1, 1, 1],
    [0, 0, 0, 1, 1],
    [1, 1, 0, 0, 0],
    [1, 1, 0, 0, 0],
]
theta = 0
active = set(range(5))
rnd = 0
while True:
    k = len(active)
    thr = mpf(k + theta) / 2
    appr = {r: sum(1 for i in active if not M[i][r]) for r in active}
    removed = sorted(r for r in active if appr[r] < thr)
    print(f"5-node pass {rnd}: k={k} threshold={thr} approvals={appr} removed={removed}")
    active -= set(removed)
    rnd += 1
    if not removed:
        break
print("5-node survivors:", sorted(active))
