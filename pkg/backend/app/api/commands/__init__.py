"""
CLI command groups. Each module exposes ``register(subparsers, parents)``.
"""
from app.api.commands import data, evaluate, forecast

COMMAND_GROUPS = (data, forecast, evaluate)
