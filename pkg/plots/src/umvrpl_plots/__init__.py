"""Figure rendering for routing-experiment sweep CSVs."""

from .stats import CSV_FIELDS, SchemaError, EmptySelectionError, read_rows, summarize
from .render import FAMILIES, render

__version__ = "0.1.0"
