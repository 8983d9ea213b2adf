"""Reference critical masses and Gagliardo-Nirenberg constants on the line and half-line."""

import math

MU_R = math.pi * math.sqrt(3.0) / 2.0
MU_R_PLUS = MU_R / 2.0
C_R = 3.0 / MU_R**2  # = 4 / pi^2
C_R_PLUS = 3.0 / MU_R_PLUS**2  # = 16 / pi^2
SQRT3 = math.sqrt(3.0)


def reference_constants():
    """Return ``(mu_R, mu_R_plus, C_R, C_R_plus, sqrt(3))``."""
    return MU_R, MU_R_PLUS, C_R, C_R_PLUS, SQRT3
