from penaltylearn.const import VERSION

__version__ = VERSION
