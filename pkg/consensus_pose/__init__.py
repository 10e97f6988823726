from .config import Config
from .logger import Logger
from .pipeline import PosePredictor, predict
from .selftest import selftest
