import os
from pathlib import Path
from dotenv import load_dotenv

from core.logging_config import build_logging

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'relaxlab-insecure-dev-key')

DEBUG = os.getenv('DEBUG', 'True') == 'True'

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    # Local apps
    'core',
]

# Численное ядро не использует БД
DATABASES = {}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Параметры расчетов
MRELAX_WORKERS = int(os.getenv('MRELAX_WORKERS', '1'))
MRELAX_OUTPUT_DIR = Path(os.getenv('MRELAX_OUTPUT_DIR', BASE_DIR / 'output'))
MRELAX_QUAD_RTOL = float(os.getenv('MRELAX_QUAD_RTOL', '1e-10'))
MRELAX_QUAD_LIMIT = int(os.getenv('MRELAX_QUAD_LIMIT', '200'))

# Logging configuration
MRELAX_LOG_DIR = Path(os.getenv('MRELAX_LOG_DIR', BASE_DIR / 'logs'))
MRELAX_LOG_LEVEL = os.getenv('MRELAX_LOG_LEVEL', 'INFO')

LOGGING_CONFIG = 'core.logging_config.setup_logging'
LOGGING = build_logging(MRELAX_LOG_DIR, MRELAX_LOG_LEVEL)
