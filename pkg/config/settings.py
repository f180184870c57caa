"""
Django settings for the tunneling time-of-arrival project.

The physics lives in the ``tunneling`` app; ``experiments`` runs batch
pipelines and keeps a registry of runs. Everything deployment-specific is
read from the environment through django-environ.
"""

import math
from pathlib import Path

import environ

from .logging_config import get_logger_config

# Initialize environ
env = environ.Env()
environ.Env.read_env()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = env("DJANGO_SECRET_KEY", default="insecure-dev-key-change-me")

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = env.bool("DJANGO_DEBUG", default=True)

ALLOWED_HOSTS = env.list("DJANGO_ALLOWED_HOSTS", default=["localhost", "127.0.0.1"])


# Application definition

INSTALLED_APPS = [
    "django.contrib.admin",
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "django.contrib.sessions",
    "django.contrib.messages",
    "django.contrib.staticfiles",
    # Third-party apps
    "rest_framework",
    "django_filters",
    # Local apps
    "tunneling.apps.TunnelingConfig",
    "experiments.apps.ExperimentsConfig",
]

MIDDLEWARE = [
    "django.middleware.security.SecurityMiddleware",
    "django.contrib.sessions.middleware.SessionMiddleware",
    "django.middleware.common.CommonMiddleware",
    "django.middleware.csrf.CsrfViewMiddleware",
    "django.contrib.auth.middleware.AuthenticationMiddleware",
    "django.contrib.messages.middleware.MessageMiddleware",
    "django.middleware.clickjacking.XFrameOptionsMiddleware",
]

ROOT_URLCONF = "config.urls"

TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {
            "context_processors": [
                "django.template.context_processors.debug",
                "django.template.context_processors.request",
                "django.contrib.auth.context_processors.auth",
                "django.contrib.messages.context_processors.messages",
            ],
        },
    },
]

WSGI_APPLICATION = "config.wsgi.application"


# Database

DATABASES = {"default": env.db("DATABASE_URL", default="sqlite:///db.sqlite3")}


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = True

USE_TZ = True


STATIC_URL = "static/"
STATIC_ROOT = BASE_DIR / "staticfiles"

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# REST Framework settings; the run registry is read-only
REST_FRAMEWORK = {
    "DEFAULT_PERMISSION_CLASSES": [
        "rest_framework.permissions.AllowAny"
        if DEBUG
        else "rest_framework.permissions.IsAuthenticatedOrReadOnly",
    ],
    "DEFAULT_FILTER_BACKENDS": [
        "django_filters.rest_framework.DjangoFilterBackend",
    ],
    "DEFAULT_PAGINATION_CLASS": "rest_framework.pagination.PageNumberPagination",
    "PAGE_SIZE": 20,
}

# Celery Configuration. Eager by default: batch runs stay synchronous and
# sweep points are aggregated in a fixed order either way.
CELERY_BROKER_URL = env("CELERY_BROKER_URL", default="redis://localhost:6379/0")
CELERY_RESULT_BACKEND = env("CELERY_RESULT_BACKEND", default="redis://localhost:6379/0")
CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
CELERY_TIMEZONE = TIME_ZONE
CELERY_TASK_ALWAYS_EAGER = env.bool("CELERY_TASK_ALWAYS_EAGER", default=True)

# Parent directory of run directories when a config names none
EXPERIMENTS_OUTPUT_ROOT = Path(
    env("EXPERIMENTS_OUTPUT_ROOT", default=str(BASE_DIR / "runs"))
)

# Numerical thresholds of the tunneling app, each overridable as
# TUNNELING_<NAME> in the environment.
TUNNELING = {
    "much_greater": env.float("TUNNELING_MUCH_GREATER", default=5.0),
    "p1_tail_limit": env.float("TUNNELING_P1_TAIL_LIMIT", default=1e-6),
    "p2_limit": env.float("TUNNELING_P2_LIMIT", default=0.1),
    "p3_limit": env.float("TUNNELING_P3_LIMIT", default=0.1),
    "monochromatic_limit": env.float("TUNNELING_MONOCHROMATIC_LIMIT", default=0.1),
    "monochromatic_flag": env.float("TUNNELING_MONOCHROMATIC_FLAG", default=0.05),
    "sequential_spread_limit": env.float(
        "TUNNELING_SEQUENTIAL_SPREAD_LIMIT", default=0.1
    ),
    "sequential_xi_limit": env.float("TUNNELING_SEQUENTIAL_XI_LIMIT", default=0.1),
    "multi_peak_ratio": env.float("TUNNELING_MULTI_PEAK_RATIO", default=0.2),
    "zero_transmission": env.float("TUNNELING_ZERO_TRANSMISSION", default=1e-300),
    "resonant_denominator": env.float("TUNNELING_RESONANT_DENOMINATOR", default=1e-8),
    "evanescent_cap": env.float("TUNNELING_EVANESCENT_CAP", default=700.0),
    "long_barrier_min": env.float("TUNNELING_LONG_BARRIER_MIN", default=5.0),
    "step_floor": env.float("TUNNELING_STEP_FLOOR", default=1e-6),
    "step_relative": env.float("TUNNELING_STEP_RELATIVE", default=1e-4),
    "phase_jump": env.float("TUNNELING_PHASE_JUMP", default=math.pi / 2),
    "k_nodes": env.int("TUNNELING_K_NODES", default=256),
    "k_window": env.float("TUNNELING_K_WINDOW", default=6.0),
    "nyquist_limit": env.float("TUNNELING_NYQUIST_LIMIT", default=math.pi / 4),
    "negativity_clamp": env.float("TUNNELING_NEGATIVITY_CLAMP", default=1e-12),
    "normalization_slack": env.float("TUNNELING_NORMALIZATION_SLACK", default=1e-3),
    "far_detector_factor": env.float("TUNNELING_FAR_DETECTOR_FACTOR", default=10.0),
    "placement_ratio": env.float("TUNNELING_PLACEMENT_RATIO", default=0.2),
    "wronskian_tolerance": env.float("TUNNELING_WRONSKIAN_TOLERANCE", default=1e-10),
    "degenerate_jacobian": env.float("TUNNELING_DEGENERATE_JACOBIAN", default=1e-12),
    "smearing_start": env.float("TUNNELING_SMEARING_START", default=5.0),
    "phase_error_limit": env.float("TUNNELING_PHASE_ERROR_LIMIT", default=0.01),
}

# Logging Configuration
LOGGING = get_logger_config(
    BASE_DIR,
    log_to_file=env.bool("TUNNELING_LOG_TO_FILE", default=False),
    level=env("TUNNELING_LOG_LEVEL", default="INFO"),
)
