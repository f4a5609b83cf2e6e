"""
Иерархия ошибок расчетного ядра.

Каждая ошибка несет человекочитаемое `detail`, машинный `code`
и `exit_code` процесса, с которым завершается команда manage.py.
"""


class RelaxationError(Exception):
    """Базовая ошибка проекта"""

    code = 'relaxation_error'
    exit_code = 1

    def __init__(self, detail: str, code: str = None):
        super().__init__(detail)
        self.detail = detail
        if code is not None:
            self.code = code

    def as_dict(self) -> dict:
        return {'code': self.code, 'detail': self.detail, 'exit_code': self.exit_code}


class ConfigError(RelaxationError):
    """Некорректная сетка, параметры, начальные данные или файл конфигурации"""

    code = 'config_error'
    exit_code = 2


class HaltingError(RelaxationError):
    """Событие, на котором интегрирование останавливается"""

    code = 'halted'

    def __init__(self, detail: str, time: float):
        super().__init__(detail)
        self.time = time

    def as_dict(self) -> dict:
        data = super().as_dict()
        data['time'] = self.time
        return data


class VacuumBreachError(HaltingError):
    """Плотность достигла нуля (или стала отрицательной)"""

    code = 'vacuum_breach'
    exit_code = 3

    def __init__(self, time: float, location: float, value: float):
        super().__init__(
            f"vacuum breach at t={time:.17g}: rho={value:.17g} at x={location:.17g}",
            time,
        )
        self.location = location
        self.value = value

    def as_dict(self) -> dict:
        data = super().as_dict()
        data.update({'location': self.location, 'value': self.value})
        return data


class StiffnessCollapseError(HaltingError):
    """Устойчивый шаг по времени стал меньше dt_min"""

    code = 'stiffness_collapse'
    exit_code = 4

    def __init__(self, time: float, dt: float, dt_min: float):
        super().__init__(
            f"stiffness collapse at t={time:.17g}: stable dt={dt:.17g} below dt_min={dt_min:.17g}",
            time,
        )
        self.dt = dt
        self.dt_min = dt_min


class NonFiniteStateError(HaltingError):
    """В состоянии появились NaN или Inf"""

    code = 'non_finite'
    exit_code = 5

    def __init__(self, detail: str, time: float = float('nan')):
        super().__init__(detail, time)


class EvaluationError(RelaxationError):
    """Не удалось вычислить переменные релаксации в точке"""

    code = 'evaluation_error'
    exit_code = 6

    def __init__(self, detail: str, rho: float = None, b: float = None, location: float = None):
        super().__init__(detail)
        self.rho = rho
        self.b = b
        self.location = location

    def at_location(self, location: float) -> 'EvaluationError':
        """Копия ошибки с привязкой к узлу сетки"""
        return type(self)(
            f"{self.detail} (grid location x={location:.17g})",
            rho=self.rho,
            b=self.b,
            location=location,
        )


class QuadratureError(EvaluationError):
    """Адаптивная квадратура не сошлась в пределах бюджета панелей"""

    code = 'quadrature_error'


class FitError(RelaxationError):
    """Окно подгонки пусто или слишком мало"""

    code = 'fit_error'


class AuditFailure(RelaxationError):
    """Хотя бы одно тождество аудита превысило допуск"""

    code = 'audit_failure'
    exit_code = 1
