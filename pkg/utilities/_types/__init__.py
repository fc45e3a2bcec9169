from . import config as config, scenario as scenario
