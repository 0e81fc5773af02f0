from .app import create_app
from .data import Dataset
from .state import LEVELS, SET_OPS, ServiceError, SessionState, apply_selection

__all__ = [
    "create_app",
    "Dataset",
    "LEVELS",
    "SET_OPS",
    "ServiceError",
    "SessionState",
    "apply_selection",
]
