import json
import logging
import logging.config
from datetime import datetime, timezone
from pathlib import Path

# Атрибуты LogRecord, которые не относятся к extra
_RESERVED = set(vars(logging.makeLogRecord({}))) | {'message', 'asctime'}

MAX_BYTES = 10485760  # 10 MB
BACKUP_COUNT = 10


def _rotating(filename: Path, level: str, formatter: str) -> dict:
    return {
        'level': level,
        'class': 'logging.handlers.RotatingFileHandler',
        'filename': str(filename),
        'maxBytes': MAX_BYTES,
        'backupCount': BACKUP_COUNT,
        'formatter': formatter,
    }


def build_logging(log_dir: Path, level: str = 'INFO') -> dict:
    """Конфигурация для settings.LOGGING: консоль, общий журнал, журналы запусков и аудита"""
    log_dir = Path(log_dir)
    return {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'verbose': {
                'format': '{levelname} {asctime} {module} {process:d} {message}',
                'style': '{',
            },
            'simple': {
                'format': '{levelname} {asctime} {message}',
                'style': '{',
            },
            'json': {
                '()': 'core.logging_config.JSONFormatter',
            },
        },
        'handlers': {
            'console': {
                'level': level,
                'class': 'logging.StreamHandler',
                'formatter': 'simple',
            },
            'file': _rotating(log_dir / 'relaxlab.log', 'WARNING', 'verbose'),
            'runs_file': _rotating(log_dir / 'runs.log', 'INFO', 'json'),
            'audit_file': _rotating(log_dir / 'audit.log', 'INFO', 'json'),
            'error_file': _rotating(log_dir / 'error.log', 'ERROR', 'verbose'),
        },
        'loggers': {
            'django': {
                'handlers': ['console', 'file', 'error_file'],
                'level': 'INFO',
                'propagate': True,
            },
            'core': {
                'handlers': ['console', 'file', 'error_file'],
                'level': level,
                'propagate': False,
            },
            'runs': {
                'handlers': ['console', 'runs_file'],
                'level': 'INFO',
                'propagate': False,
            },
            'audit': {
                'handlers': ['console', 'audit_file'],
                'level': 'INFO',
                'propagate': False,
            },
        },
    }


def setup_logging(config: dict) -> logging.Logger:
    """
    Применяет конфигурацию; подключается через settings.LOGGING_CONFIG.
    Каталоги файловых журналов создаются заранее.
    """
    for handler in config.get('handlers', {}).values():
        if 'filename' in handler:
            Path(handler['filename']).parent.mkdir(parents=True, exist_ok=True)
    logging.config.dictConfig(config)
    return logging.getLogger(__name__)


class JSONFormatter(logging.Formatter):
    """Одна JSON-строка на запись, включая поля из extra={...}"""

    def format(self, record: logging.LogRecord) -> str:
        payload = {
            'timestamp': datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'module': record.module,
            'message': record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RESERVED and not key.startswith('_'):
                payload[key] = value
        if record.exc_info:
            payload['exception'] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str, ensure_ascii=False)


class RunAuditLogger:
    """Журнал событий расчетов и проверок"""

    @staticmethod
    def log_run_event(scenario: str, action: str, **details):
        """Старт, завершение и прочие события запуска"""
        logger = logging.getLogger('runs')
        logger.info(
            f"Run {action}: scenario={scenario}",
            extra={'scenario': scenario, 'action': action, **details},
        )

    @staticmethod
    def log_halt(scenario: str, cause: str, detail: str, time: float = None):
        """Остановка интегрирования до t_end"""
        logger = logging.getLogger('runs')
        logger.warning(
            f"Run halted: scenario={scenario}, cause={cause}, {detail}",
            extra={'scenario': scenario, 'cause': cause, 'time': time},
        )

    @staticmethod
    def log_check(name: str, max_error: float, tolerance: float, passed: bool):
        """Результат одной проверки аудита"""
        logger = logging.getLogger('audit')
        message = f"Check {name}: max_error={max_error:.3e}, tolerance={tolerance:.1e}"
        extra = {'check': name, 'max_error': max_error, 'tolerance': tolerance, 'passed': passed}
        if passed:
            logger.info(message, extra=extra)
        else:
            logger.warning(message, extra=extra)

    @staticmethod
    def log_error(module: str, error: str, **details):
        """Логирование ошибок"""
        logger = logging.getLogger('runs')
        logger.error(f"Error in {module}: {error}", extra={'source': module, **details})
