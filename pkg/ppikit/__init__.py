"""This module is the entry point for the `ppikit` package."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("ppikit")
except PackageNotFoundError:
    __version__ = "0.0.0"

from ppikit.classes import *
from ppikit.establishing import *
from ppikit.processing import *
