"""The first points of the sequence and how evenly they fill dyadic cubes."""

from dyadic_transport import DigitWord, count_in_cube, prefix

d = 2
print("first eight points, d = 2")
for p in prefix(8, d):
    print(f"  x_{p.n} = ({', '.join(str(v) for v in p.coords)})")

# every level-l cube receives floor(N / 4^l) or ceil(N / 4^l) of the first N points
N = 1000
for level in range(4):
    counts = [count_in_cube(N, DigitWord.from_residue(r, level, d)) for r in range(4**level)]
    print(f"N = {N}, level {level}: counts in [{min(counts)}, {max(counts)}], target {N / 4**level:g}")
