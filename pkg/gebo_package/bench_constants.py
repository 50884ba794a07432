"""
Constants of the benchmark objectives.

Sources:
    Ackley: Ackley (1987), "A connectionist machine for genetic hillclimbing".
    Beale, six-hump camel, Rosenbrock: Surjanovic & Bingham, Virtual Library of
        Simulation Experiments (canonical domains).
    Pressure vessel: Kannan & Kramer (1994); Tanabe & Ishibuchi (2020).
    Speed reducer: Golinski (1973); Cagnina, Esquivel & Coello (2008).
    Environment calibration: Bliznyuk et al. (2008); Astudillo & Frazier (2019).
"""

import math

PENALTY_COEFFICIENT = 1e4

# Ackley
ACKLEY_A = 20.0
ACKLEY_B = 0.2
ACKLEY_C = 2.0 * math.pi

# Func2C, canonical domains the [-1, 1]^2 inputs are mapped onto
BEALE_DOMAIN = ((-4.5, 4.5), (-4.5, 4.5))
CAMEL_DOMAIN = ((-3.0, 3.0), (-2.0, 2.0))
ROSENBROCK_DOMAIN = ((-2.048, 2.048), (-2.048, 2.048))
CAMEL_MINIMUM = -1.0316284534898774

# Pressure vessel
VESSEL_THICKNESS_STEP = 0.0625
VESSEL_THICKNESS_LEVELS = 100
VESSEL_RADIUS_BOUNDS = (10.0, 200.0)
VESSEL_LENGTH_BOUNDS = (10.0, 200.0)
VESSEL_COST = (0.6224, 1.7781, 3.1661, 19.84)
VESSEL_SHELL_RATIO = 0.0193
VESSEL_HEAD_RATIO = 0.00954
VESSEL_MIN_VOLUME = 1_296_000.0
VESSEL_MAX_LENGTH = 240.0

# Speed reducer
REDUCER_TEETH = tuple(range(17, 29))
REDUCER_FACE_WIDTH = (2.6, 3.6)
REDUCER_MODULE = (0.7, 0.8)
REDUCER_SHAFT1_LENGTH = (7.3, 8.3)
REDUCER_SHAFT2_LENGTH = (7.3, 8.3)
REDUCER_SHAFT1_DIAMETER = (2.9, 3.9)
REDUCER_SHAFT2_DIAMETER = (5.0, 5.5)
REDUCER_LITERATURE_OPTIMUM = (3.5, 0.7, 17, 7.3, 7.715320, 3.350215, 5.286654)
REDUCER_LITERATURE_WEIGHT = 2994.4711

# Environment calibration: two-source diffusion model of a chemical spill
ENV_MASS_BOUNDS = (7.0, 13.0)
ENV_DIFFUSION_BOUNDS = (0.02, 0.12)
ENV_LOCATION_BOUNDS = (0.01, 3.0)
ENV_TAU_START = 30.0105
ENV_TAU_STEP = 0.001
ENV_TAU_LEVELS = 285
ENV_TRUE_PARAMETERS = {"mass": 10.0, "diffusion": 0.07, "location": 1.505, "tau": 30.1525}
ENV_SPACE_GRID = (0.0, 1.0, 2.5)
ENV_TIME_GRID = (15.0, 30.0, 45.0, 60.0)
