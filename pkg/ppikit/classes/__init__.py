"""This file is the initialization module for `ppikit.classes`.  It imports
the domain types used throughout the package.
"""

from ppikit.classes.dataset import *
from ppikit.classes.configs import *
from ppikit.classes.estimate import *
from ppikit.classes.report import *
from ppikit.classes.scenario import *
