# app/core/logging_config.py
import copy
from logging.config import dictConfig
from typing import Optional

from app.core.config import settings

# Настройки для логирования.
LOGGING_CONFIG = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "default": {
            "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "default",
            "stream": "ext://sys.stdout",
        },
        "file": {
            "class": "logging.handlers.RotatingFileHandler",
            "formatter": "default",
            "filename": "lab.log",
            "maxBytes": 10485760,  # 10 MB
            "backupCount": 5,
            "encoding": "utf8",
        },
    },
    "loggers": {
        "app": {"handlers": ["console", "file"], "level": "INFO", "propagate": False},
        # Логгер joblib шумный на DEBUG, держим его на WARNING
        "joblib": {"handlers": ["console"], "level": "WARNING"},
    },
    "root": {
        "level": "WARNING",
        "handlers": ["console"],
    },
}


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Применяет конфигурацию логирования.

    Уровень и файл берутся из аргументов, иначе из настроек (LOG_LEVEL, LOG_FILE).
    Пустое имя файла отключает файловый обработчик.
    """
    config = copy.deepcopy(LOGGING_CONFIG)
    level = (level or settings.LOG_LEVEL).upper()
    log_file = settings.LOG_FILE if log_file is None else log_file

    config["loggers"]["app"]["level"] = level
    if log_file:
        config["handlers"]["file"]["filename"] = log_file
    else:
        del config["handlers"]["file"]
        config["loggers"]["app"]["handlers"] = ["console"]
    dictConfig(config)
