"""
Загрузка конфигурации запуска из INI-файла или встроенного сценария
и сборка объектов расчета: сетки, параметров, начального состояния.
"""
import configparser
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
from pydantic import ValidationError

from core.diagnostics import Reference
from core.exceptions import ConfigError, RelaxationError
from core.grid import Field, Grid, make_grid
from core.integrator import StepControl
from core.models import Params, State
from core.schemas import KernelSchema, ModeSchema, RunConfig

logger = logging.getLogger(__name__)

SECTIONS = ('grid', 'params', 'initial', 'control', 'diagnostics', 'output', 'converge')

SCENARIOS = {
    'relax-b0': """
        [scenario]
        tag = relax-b0
        [grid]
        n = 128
        [params]
        gamma = 1.5
        b0 = 1.0
        [initial]
        rho_mean = 1.0
        b_mean = 0.0
        rho_modes = 1:0.01:cos
        b_modes = 2:0.01:sin
        [control]
        cfl = 0.9
        t_end = 20.0
        [diagnostics]
        record_interval = 0.1
        sobolev_orders = 1, 2
        snapshot_times = 0, 10, 20
    """,
    'relax-bbar': """
        [scenario]
        tag = relax-bbar
        [grid]
        n = 128
        [params]
        gamma = 1.5
        b0 = 1.0
        [initial]
        rho_mean = 1.0
        b_mean = 0.5
        rho_modes = 1:0.01:cos
        b_modes = 2:0.01:sin
        [control]
        cfl = 0.9
        t_end = 20.0
        [diagnostics]
        record_interval = 0.1
        sobolev_orders = 1, 2
        snapshot_times = 0, 10, 20
    """,
    'vacuum-stress': """
        [scenario]
        tag = vacuum-stress
        [grid]
        n = 128
        [params]
        gamma = 1.5
        b0 = 1.0
        [initial]
        rho_mean = 1.0
        b_mean = 0.0
        rho_modes = 1:0.95:cos
        b_modes = 1:1.5:sin, 3:0.5:cos
        [control]
        cfl = 0.5
        t_end = 2.0
        [diagnostics]
        record_interval = 0.1
        sobolev_orders = 1
    """,
    'converge-base': """
        [scenario]
        tag = converge-base
        [grid]
        n = 64
        [params]
        gamma = 1.5
        b0 = 1.0
        [initial]
        rho_mean = 1.0
        b_mean = 0.0
        rho_kernel = 0.85:0.1
        b_modes = 1:0.1:sin, 2:0.05:cos
        [control]
        cfl = 0.9
        t_end = 1.0
        [converge]
        resolutions = 32, 64, 128, 256
        epsilons = 0, 1e-4, 1e-3
        reference_n = 512
        t_end = 1.0
        temporal_n = 16
        temporal_dt = 0.005
        temporal_t_end = 1.0
    """,
}


@dataclass(frozen=True)
class RunSetup:
    """Все, что нужно integrator.run, собранное из RunConfig"""

    config: RunConfig
    grid: Grid
    params: Params
    state: State
    control: StepControl
    reference: Optional[Reference]


def _parse_ini(text: str, source: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: cannot parse config: {exc}") from exc

    unknown = set(parser.sections()) - set(SECTIONS) - {'scenario'}
    if unknown:
        raise ConfigError(f"{source}: unknown sections {sorted(unknown)}")

    data = {section: dict(parser[section]) for section in SECTIONS if parser.has_section(section)}
    if parser.has_section('scenario'):
        data['scenario'] = parser['scenario'].get('tag', 'custom')
    return validate_config(data, source)


def validate_config(data: dict, source: str = 'config') -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        problems = '; '.join(
            f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}" for error in exc.errors()
        )
        raise ConfigError(f"{source}: {problems}") from exc


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return _parse_ini(text, str(path))


def scenario_config(tag: str) -> RunConfig:
    if tag not in SCENARIOS:
        raise ConfigError(f"unknown scenario {tag!r}; known: {', '.join(sorted(SCENARIOS))}")
    lines = (line.strip() for line in SCENARIOS[tag].splitlines())
    return _parse_ini('\n'.join(lines), f"scenario {tag}")


def with_overrides(config: RunConfig, **sections) -> RunConfig:
    """Копия конфигурации с заменой отдельных полей: with_overrides(c, grid={'n': 64})"""
    data = config.model_dump()
    for section, values in sections.items():
        if isinstance(data.get(section), dict):
            data[section].update(values)
        else:
            data[section] = values
    return validate_config(data, f"scenario {config.scenario}")


def perturbation(grid: Grid, mean: float, modes: Iterable[ModeSchema],
                 kernel: Optional[KernelSchema] = None) -> np.ndarray:
    """
    mean + Σ amplitude·cos(mode·2π/length·x + phase) + ядро. Моды >= 1 не меняют
    среднее; ядро меняет его на сетке из n узлов на величину порядка ratio^n.
    """
    k0 = 2.0 * math.pi / grid.length
    values = np.full(grid.n, float(mean))
    for term in modes:
        if 2 * term.mode >= grid.n:
            raise ConfigError(f"mode {term.mode} is not resolved on a grid with n={grid.n}")
        values += term.amplitude * np.cos(term.mode * k0 * grid.x + term.phase)
    if kernel is not None:
        # Σ_{k>=1} r^k cos kθ = (r cos θ - r²)/(1 - 2r cos θ + r²)
        r = kernel.ratio
        cos_theta = np.cos(k0 * grid.x + kernel.phase)
        values += kernel.amplitude * (r * cos_theta - r * r) / (1.0 - 2.0 * r * cos_theta + r * r)
    return values


def build_run(config: RunConfig) -> RunSetup:
    try:
        grid = make_grid(config.grid.n, config.grid.length, config.grid.dealias)
        params = Params(config.params.gamma, config.params.b0, config.params.epsilon)
        control = StepControl(
            cfl=config.control.cfl,
            dt_min=config.control.dt_min,
            dt_max=config.control.dt_max,
            t_end=config.control.t_end,
            record_interval=config.diagnostics.record_interval,
            snapshot_times=tuple(config.diagnostics.snapshot_times),
        )
        rho = perturbation(grid, config.initial.rho_mean, config.initial.rho_modes, config.initial.rho_kernel)
        b = perturbation(grid, config.initial.b_mean, config.initial.b_modes, config.initial.b_kernel)
        state = State(Field(grid, rho), Field(grid, b), 0.0)
    except ConfigError:
        raise
    except RelaxationError as exc:
        raise ConfigError(exc.detail) from exc

    if not rho.min() > 0.0:
        j = int(np.argmin(rho))
        raise ConfigError(
            f"initial rho must be positive on the grid, got {rho[j]:.17g} at x={grid.x[j]:.17g}"
        )

    reference = None
    if config.diagnostics.reference:
        reference = Reference(config.initial.rho_mean, config.initial.b_mean)
    logger.debug(f"Built run {config.scenario}", extra={'scenario': config.scenario, 'n': grid.n})
    return RunSetup(config, grid, params, state, control, reference)
