"""Module with helper functions."""

import os
from typing import Optional

from ppikit.establishing.constants import SEED_ENV_VAR
from ppikit.utils.exceptions import InvalidSpec


def custom_print(text, verbose):
    """Print text if verbose."""
    if verbose:
        print(text)


def get_ending(num, plural="s"):
    """Return singular or plural ending."""
    if num == 1:
        return ""
    else:
        return plural


def validate_param(value, label, accepted_types=(int, float)):
    """Validates that a given value is of the specified types."""
    if value is not None and (
            not isinstance(value, accepted_types)
            or (isinstance(value, bool) and bool not in accepted_types)):
        accepted_types_names = ", ".join(t.__name__ for t in accepted_types)
        msg = f"Argument '{label}' must be one of the following " \
              f"types: {accepted_types_names}"
        raise TypeError(msg)


def resolve_seed(flag: Optional[int], config: Optional[int] = None) -> Optional[int]:
    """Resolve a seed with precedence flag > environment variable > config."""
    if flag is not None:
        return int(flag)
    env = os.environ.get(SEED_ENV_VAR)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            msg = f"Environment variable {SEED_ENV_VAR} must be an integer, "\
                  f"got '{env}'"
            raise InvalidSpec(msg) from None
    return config
