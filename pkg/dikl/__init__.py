# -*- coding: utf-8 -*-

__all__ = ['EnergyTarget', 'NoiseSchedule', 'GeneratorNet', 'ScoreNet',
           'ModelPair', 'Recipe', 'Trainer', 'trainDikl', 'trainRklSm',
           'evaluateMetrics']
__version__ = '0.1.0'

from .targets import EnergyTarget
from .diffusion import NoiseSchedule
from .networks import GeneratorNet, ScoreNet, ModelPair
from .posterior import Recipe
from .trainer import Trainer, trainDikl, trainRklSm
from .evaluation import evaluateMetrics
