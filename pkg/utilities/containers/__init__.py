from . import fits as fits, params as params, reports as reports, run as run, scenario as scenario
