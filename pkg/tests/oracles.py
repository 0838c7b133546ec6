"""
Independent reference computations used by the tests
"""


def count_points(p: int) -> int:
    """Projective points of y^2 + y = x^3 - x^2 - 10x - 20 over F_p"""
    count = 1
    for x in range(p):
        rhs = (x**3 - x**2 - 10 * x - 20) % p
        count += sum(1 for y in range(p) if (y * y + y - rhs) % p == 0)
    return count


def genus_by_counting(q: int) -> int:
    """Genus of X_0(q) with the elliptic points counted as roots mod q"""
    nu2 = sum(1 for x in range(q) if (x * x + 1) % q == 0)
    nu3 = sum(1 for x in range(q) if (x * x + x + 1) % q == 0)
    twelve_g = (q + 1) - 3 * nu2 - 4 * nu3
    assert twelve_g % 12 == 0
    return twelve_g // 12
