"""
Схемы конфигурации запуска и итоговых отчетов (pydantic).
Секции INI-файла отображаются на вложенные схемы RunConfig один к одному.
"""
import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.models import MAX_GAMMA

PHASE_ALIASES = {'cos': 0.0, 'sin': -0.5 * math.pi}


def _split_list(value: Any) -> Any:
    """'1, 2, 4' -> ['1', '2', '4']; пустая строка - пустой список"""
    if isinstance(value, str):
        return [item.strip() for item in value.split(',') if item.strip()]
    return value


class Schema(BaseModel):
    model_config = ConfigDict(extra='forbid')


class GridSchema(Schema):
    n: int = 128
    length: float = 2.0 * math.pi
    dealias: bool = False

    @field_validator('n')
    @classmethod
    def check_n(cls, value):
        if value % 2:
            raise ValueError("n must be even")
        if value < 16:
            raise ValueError("n must be at least 16")
        return value

    @field_validator('length')
    @classmethod
    def check_length(cls, value):
        if not value > 0.0:
            raise ValueError("length must be positive")
        return value


class ParamsSchema(Schema):
    gamma: float = 1.5
    b0: float = 1.0
    epsilon: float = 0.0

    @field_validator('gamma')
    @classmethod
    def check_gamma(cls, value):
        if not 1.0 < value < 2.0:
            raise ValueError(f"gamma must lie in (1, 2), got {value}")
        if value > MAX_GAMMA:
            raise ValueError(f"gamma must not exceed {MAX_GAMMA}, got {value}")
        return value

    @field_validator('b0')
    @classmethod
    def check_b0(cls, value):
        if value == 0.0 or not math.isfinite(value):
            raise ValueError("b0 must be finite and non-zero")
        return value

    @field_validator('epsilon')
    @classmethod
    def check_epsilon(cls, value):
        if not value >= 0.0:
            raise ValueError("epsilon must be non-negative")
        return value


class ModeSchema(Schema):
    """Слагаемое amplitude·cos(mode·2π/length·x + phase)"""

    mode: int = Field(ge=1)
    amplitude: float
    phase: float = 0.0

    @model_validator(mode='before')
    @classmethod
    def parse_text(cls, value):
        # запись 'mode:amplitude[:phase]', phase - число или cos/sin
        if not isinstance(value, str):
            return value
        parts = [part.strip() for part in value.split(':')]
        if len(parts) not in (2, 3):
            raise ValueError(f"perturbation must read mode:amplitude[:phase], got {value!r}")
        data = {'mode': parts[0], 'amplitude': parts[1]}
        if len(parts) == 3:
            data['phase'] = PHASE_ALIASES.get(parts[2].lower(), parts[2])
        return data


class KernelSchema(Schema):
    """
    amplitude·Σ_{k>=1} ratio^k cos(k(2π/length·x + phase)) в замкнутой форме.
    Коэффициенты убывают как ratio^k, поэтому профиль не ограничен по спектру.
    """

    ratio: float = Field(gt=0.0, lt=1.0)
    amplitude: float
    phase: float = 0.0

    @model_validator(mode='before')
    @classmethod
    def parse_text(cls, value):
        # запись 'ratio:amplitude[:phase]', phase в радианах
        if not isinstance(value, str):
            return value
        parts = [part.strip() for part in value.split(':')]
        if len(parts) not in (2, 3):
            raise ValueError(f"kernel must read ratio:amplitude[:phase], got {value!r}")
        data = {'ratio': parts[0], 'amplitude': parts[1]}
        if len(parts) == 3:
            data['phase'] = parts[2]
        return data


class InitialDataSchema(Schema):
    rho_mean: float = 1.0
    b_mean: float = 0.0
    rho_modes: List[ModeSchema] = []
    b_modes: List[ModeSchema] = []
    rho_kernel: Optional[KernelSchema] = None
    b_kernel: Optional[KernelSchema] = None

    @field_validator('rho_modes', 'b_modes', mode='before')
    @classmethod
    def split_modes(cls, value):
        return _split_list(value)

    @field_validator('rho_kernel', 'b_kernel', mode='before')
    @classmethod
    def empty_kernel(cls, value):
        if isinstance(value, str) and not value.strip():
            return None
        return value

    @field_validator('rho_mean')
    @classmethod
    def check_rho_mean(cls, value):
        if not value > 0.0:
            raise ValueError("rho_mean must be positive")
        return value


class ControlSchema(Schema):
    cfl: float = 0.5
    dt_min: float = 1e-12
    dt_max: float = 1.0
    t_end: float = 1.0

    @model_validator(mode='after')
    def check_bounds(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        if not 0.0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")
        if not self.t_end >= 0.0:
            raise ValueError("t_end must be non-negative")
        return self


class DiagnosticsSchema(Schema):
    record_interval: float = Field(default=0.1, gt=0.0)
    sobolev_orders: List[int] = [1, 2]
    weighted_order: int = Field(default=1, ge=0, le=4)
    snapshot_times: List[float] = []
    reference: bool = True

    @field_validator('sobolev_orders', 'snapshot_times', mode='before')
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)


class OutputSchema(Schema):
    directory: Optional[str] = None
    prefix: Optional[str] = None


class ConvergeSchema(Schema):
    resolutions: List[int] = [32, 64, 128, 256]
    epsilons: List[float] = [0.0, 1e-4, 1e-3]
    reference_n: int = 512
    t_end: float = 1.0
    temporal_n: int = 16
    temporal_dt: float = 0.005
    temporal_t_end: float = 1.0

    @field_validator('resolutions', 'epsilons', mode='before')
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)


class RunConfig(Schema):
    scenario: str = 'custom'
    grid: GridSchema = GridSchema()
    params: ParamsSchema = ParamsSchema()
    initial: InitialDataSchema = InitialDataSchema()
    control: ControlSchema = ControlSchema()
    diagnostics: DiagnosticsSchema = DiagnosticsSchema()
    output: OutputSchema = OutputSchema()
    converge: ConvergeSchema = ConvergeSchema()


class RunSummary(Schema):
    scenario: str
    halting_cause: str
    exit_code: int
    error: Optional[Dict[str, Any]] = None
    steps: int = 0
    records: int = 0
    final_time: Optional[float] = None
    wall_clock_s: float = 0.0
    conservation: Dict[str, Any] = {}
    monotonicity: Dict[str, Any] = {}
    z_ceiling_passed: Optional[bool] = None
    energy_balance_residual: Optional[float] = None
    envelopes: Dict[str, Any] = {}
    decay_fits: Dict[str, Any] = {}
    predicted_rates: Dict[str, Any] = {}
    config: Dict[str, Any] = {}
