"""Sandwich the grid bottleneck oracle between the volumetric bound and the certificate."""

from dyadic_transport import build_partition, volumetric_lower_winfty, winfty_oracle_grid, winfty_upper

d = 2
print(f"{'N':>5} {'lower':>8} {'oracle':>8} {'+/-':>7} {'certificate':>11}")
for N in (4, 16, 100):
    P = build_partition(N, d)
    cert = winfty_upper(P)
    value, error = winfty_oracle_grid([c.point for c in P.cells], 40)
    print(f"{N:>5} {volumetric_lower_winfty(N, d):8.4f} {value:8.4f} {error:7.4f} {cert.radius:11.4f}")
