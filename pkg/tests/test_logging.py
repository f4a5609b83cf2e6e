import json
import logging

from django.conf import settings

from core.logging_config import BACKUP_COUNT, MAX_BYTES, JSONFormatter, build_logging, setup_logging


class TestLoggingConfig:
    """Тесты конфигурации журналов"""

    def test_rotating_handlers(self, tmp_path):
        """Файловые журналы ротируются по 10 MB, хранится 10 копий"""
        config = build_logging(tmp_path / 'logs', 'DEBUG')
        files = [h for h in config['handlers'].values() if 'filename' in h]
        assert len(files) == 4
        assert all(h['maxBytes'] == MAX_BYTES == 10 * 1024 * 1024 for h in files)
        assert all(h['backupCount'] == BACKUP_COUNT == 10 for h in files)
        assert config['handlers']['console']['level'] == 'DEBUG'
        assert config['loggers']['core']['level'] == 'DEBUG'

    def test_settings_use_builder(self):
        assert settings.LOGGING_CONFIG == 'core.logging_config.setup_logging'
        assert settings.LOGGING['handlers']['runs_file']['formatter'] == 'json'

    def test_setup_creates_directories(self, tmp_path):
        log_dir = tmp_path / 'nested' / 'logs'
        try:
            setup_logging(build_logging(log_dir))
            assert log_dir.is_dir()
        finally:
            setup_logging(settings.LOGGING)


class TestJSONFormatter:
    """Тесты JSON-форматтера"""

    def test_extra_fields(self):
        record = logging.makeLogRecord({
            'name': 'runs', 'levelname': 'INFO', 'msg': 'Run started', 'scenario': 'relax-b0', 'steps': 12,
        })
        payload = json.loads(JSONFormatter().format(record))
        assert payload['message'] == 'Run started'
        assert payload['logger'] == 'runs'
        assert payload['scenario'] == 'relax-b0'
        assert payload['steps'] == 12
