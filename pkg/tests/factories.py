import math

import factory
import numpy as np

from core.grid import Field, Grid
from core.integrator import StepControl
from core.models import Params, State


class GridFactory(factory.Factory):
    class Meta:
        model = Grid

    n = 64
    length = 2.0 * math.pi
    dealias = False


class ParamsFactory(factory.Factory):
    class Meta:
        model = Params

    gamma = 1.5
    b0 = 1.0
    epsilon = 0.0


class StepControlFactory(factory.Factory):
    class Meta:
        model = StepControl

    cfl = 0.9
    dt_min = 1e-12
    dt_max = 1.0
    t_end = 0.5
    record_interval = 0.1
    snapshot_times = ()


def make_state(grid, rho_mean=1.0, b_mean=0.0, rho_amp=0.01, b_amp=0.01, time=0.0):
    """rho = rho_mean + rho_amp·cos x, B = b_mean + b_amp·sin 2x"""
    x = grid.x
    rho = rho_mean + rho_amp * np.cos(x)
    b = b_mean + b_amp * np.sin(2.0 * x)
    return State(Field(grid, rho), Field(grid, b), time)
