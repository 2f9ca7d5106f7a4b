"""This module imports the constants and the logging facilities of `ppikit`."""
from ppikit.establishing.constants import *
from ppikit.establishing.logger import *
