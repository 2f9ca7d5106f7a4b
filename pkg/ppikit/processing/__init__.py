"""This module imports the operations of ppikit."""

from ppikit.processing.crossfitting import *
from ppikit.processing.diagnosing import *
from ppikit.processing.estimating import *
from ppikit.processing.ingesting import *
from ppikit.processing.learning import *
from ppikit.processing.simulating import *
from ppikit.processing.utils import *
