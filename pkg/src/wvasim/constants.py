"""Physical constants (CODATA exact values) and unit helpers."""

import math

SPEED_OF_LIGHT = 299_792_458.0
PLANCK = 6.626_070_15e-34

ATTOSECOND = 1e-18
DEG = math.pi / 180.0
