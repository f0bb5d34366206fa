"""Shared fixtures and independent reference implementations used as test oracles.

The oracles below deliberately avoid the package's bit tricks: digits are
obtained by repeated division and coordinates are summed as Fractions.
"""

from fractions import Fraction

import pytest

ACCEPTANCE_LINES = []


def oracle_digits(m, base, count=None):
    """Base-``base`` digits of ``m``, least significant first; exactly ``count`` of them if given."""
    digits = []
    while (m if count is None else len(digits) < count):
        digits.append(m % base)
        m //= base
    return digits


def oracle_point(n, d):
    """x_n by the defining digit sum."""
    b = 2**d
    coords = []
    for j in range(d):
        total = Fraction(0)
        for k, a in enumerate(oracle_digits(n - 1, b)):
            bit = (a // 2**j) % 2
            total += Fraction(bit, 2 ** (k + 1))
        coords.append(total)
    return tuple(coords)


def oracle_cube(digits, d):
    """Lower and upper corners of the dyadic cube of a word."""
    level = len(digits)
    lo = []
    for j in range(d):
        lo.append(sum(Fraction((u // 2**j) % 2, 2 ** (k + 1)) for k, u in enumerate(digits)))
    side = Fraction(1, 2**level)
    return tuple(lo), tuple(a + side for a in lo)


def in_half_open(x, lo, hi):
    return all(a <= v < b for v, a, b in zip(x, lo, hi))


@pytest.fixture
def record_acceptance():
    def record(number, passed, text):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {text}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
