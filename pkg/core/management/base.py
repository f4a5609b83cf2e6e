from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from core.config import load_config, scenario_config
from core.exceptions import ConfigError, RelaxationError
from core.logging_config import RunAuditLogger


def float_pair(text: str):
    """'0.2,3' -> (0.2, 3.0) для аргументов-диапазонов"""
    try:
        lo, hi = (float(part) for part in text.split(','))
    except ValueError as exc:
        raise ConfigError(f"expected two comma separated numbers, got {text!r}") from exc
    return lo, hi


class RelaxCommand(BaseCommand):
    """
    Общая часть команд: выбор каталога вывода, число процессов и
    перевод RelaxationError в код выхода процесса.
    """

    parallel = False

    def add_arguments(self, parser):
        parser.add_argument('--out', help='Каталог для результатов')
        if self.parallel:
            parser.add_argument('--workers', type=int, help='Число процессов (по умолчанию MRELAX_WORKERS)')

    def handle(self, *args, **options):
        try:
            self.execute_command(**options)
        except RelaxationError as exc:
            RunAuditLogger.log_error(self.__module__, exc.detail, code=exc.code)
            self.stderr.write(self.style.ERROR(f'{exc.code}: {exc.detail}'))
            raise SystemExit(exc.exit_code)

    def execute_command(self, **options):
        raise NotImplementedError

    def output_dir(self, options, configured: str = None) -> Path:
        return Path(options.get('out') or configured or settings.MRELAX_OUTPUT_DIR)

    def workers(self, options) -> int:
        return options.get('workers') or settings.MRELAX_WORKERS

    @staticmethod
    def quad_options() -> dict:
        return {'rtol': settings.MRELAX_QUAD_RTOL, 'limit': settings.MRELAX_QUAD_LIMIT}


class ConfigCommand(RelaxCommand):
    """Команды, читающие RunConfig из файла или встроенного сценария"""

    default_scenario = None

    def add_arguments(self, parser):
        super().add_arguments(parser)
        source = parser.add_mutually_exclusive_group()
        source.add_argument('--config', help='INI-файл конфигурации')
        source.add_argument('--scenario', help='Встроенный сценарий')

    def load(self, options):
        if options.get('config'):
            return load_config(options['config'])
        tag = options.get('scenario') or self.default_scenario
        if tag is None:
            raise ConfigError('either --config or --scenario is required')
        return scenario_config(tag)
