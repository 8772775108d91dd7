"""Shared physical constants."""

# Propagation speed used for every delay/range conversion. The delay-bin
# width c/f_s must come out at exactly 19.5313 m for the default 15.36 MHz
# rate, which pins c to the round radar value, not the CODATA one.
SPEED_OF_LIGHT = 3.0e8
