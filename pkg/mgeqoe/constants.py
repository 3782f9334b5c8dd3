# km^3/s^2 and km, DE440-consistent
MU_EARTH_KM3S2 = 398600.435507
MU_MOON_KM3S2 = 4902.800118
MU_SUN_KM3S2 = 1.32712440041e11
L_STAR_KM = 384400.0
AU_KM = 149597870.7

SECONDS_PER_DAY = 86400.0

RETROGRADE_TOLERANCE = 1e-10
ECCENTRICITY_SINGULARITY_TOLERANCE = 1e-12
DEGENERATE_TOLERANCE = 1e-14
PROXIMITY_TOLERANCE = 1e-12
DEFAULT_OFFSET_MARGIN = 1e-10
DEFAULT_ALPHA = 0.05
