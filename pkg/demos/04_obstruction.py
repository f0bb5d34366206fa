"""In one dimension N * W_1 returns to 1/2 at powers of two but its block maxima keep rising."""

from dyadic_transport import obstruction_scan

table = obstruction_scan(2**14 - 1)
for blk in table.blocks:
    print(f"[2^{blk.j}, 2^{blk.j + 1}): max N*W_1 = {float(blk.value):.4f} at N = {blk.argmax}")
