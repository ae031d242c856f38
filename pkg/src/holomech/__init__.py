"""holomech - geometric phases and holonomy for parameter-driven quantum systems"""

__version__ = "0.1.0"
