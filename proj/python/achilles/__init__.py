"""Python bindings for the achilles backtesting library."""
import json as _json

from ._achilles import (
    AchillesError,
    BarSeries,
    enrich,
    forward,
    load_bars,
    parameter_count,
    position_size,
    rsi_from_averages,
    sentiment_at,
    sha256_hex,
    smma,
)
from ._achilles import run_backtest as _run_backtest

__all__ = [
    "AchillesError", "BarSeries", "enrich", "forward", "load_bars", "parameter_count",
    "position_size", "rsi_from_averages", "run_backtest", "sentiment_at", "sha256_hex", "smma",
]


def run_backtest(config, base_dir=".", out_dir=""):
    """Runs a backtest described by a dict and returns its summary as a dict."""
    return _json.loads(_run_backtest(_json.dumps(config), str(base_dir), str(out_dir)))
