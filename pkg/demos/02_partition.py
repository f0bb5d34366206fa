"""Build an equal-volume transport partition and check it exactly."""

import math

from dyadic_transport import build_partition, verify_partition, winfty_upper

N, d = 100, 2
P = build_partition(N, d)
report = verify_partition(P)
print(f"N = {N}, d = {d}, L = {P.L}, fallback = {P.fallback}")
for line in report.lines():
    print(" ", line)

cert = winfty_upper(P, report)
print(f"largest squared point-to-corner distance: {cert.radius_sq}")
print(f"certificate {cert.radius:.6f} <= 6 sqrt(d) N^(-1/d) = {6 * math.sqrt(d) * N ** (-1 / d):.6f}")

c = P.cell(37)
print(f"cell 37: point {tuple(map(str, c.point))}, box {tuple(map(str, c.rect.lo))} .. {tuple(map(str, c.rect.hi))}")
