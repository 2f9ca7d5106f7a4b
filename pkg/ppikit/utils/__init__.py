"""This module provides utility functions, decorators and exceptions for ppikit."""

from ppikit.utils.decorators import *
from ppikit.utils.exceptions import *
from ppikit.utils.helpers import *
