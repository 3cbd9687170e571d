import math
import os
from pathlib import Path

import pytest

import achilles

FIXTURES = Path(os.environ.get("ACHILLES_FIXTURES", Path(__file__).resolve().parents[1] / "fixtures"))


def test_parameter_count():
    assert achilles.parameter_count() == 10521
    assert achilles.parameter_count(1, 1, 1, 1) == 26


def test_bars_and_indicators():
    bars = achilles.load_bars(str(FIXTURES / "sine_bars.csv"))
    assert len(bars) == 900
    enriched = achilles.enrich(bars)
    rsi = [v for v in enriched.rsi if v is not None]
    assert rsi and all(0.0 <= v <= 100.0 for v in rsi)
    assert enriched.rsi[0] is None


def test_smma_and_rsi_helpers():
    out = achilles.smma([1.0, 2.0, 3.0, 4.0], 2)
    assert out[0] is None
    assert math.isclose(out[1], 1.5)
    assert achilles.rsi_from_averages(0.0, 0.0) == 50.0


def test_sizing():
    assert achilles.position_size(1000.0, 0.3, 2318.99) == pytest.approx(0.12)
    assert achilles.position_size(1.0, 0.3, 2318.99) is None


def test_sentiment():
    snap = achilles.sentiment_at(str(FIXTURES / "sample_sentiment.csv"), "2024-10-02 21:14:04")
    assert snap["avg_probability"] == pytest.approx(0.9051731030, abs=1e-9)


def test_backtest(tmp_path):
    config = {
        "start": "2024-09-02 02:00:00",
        "end": "2024-09-02 06:00:00",
        "prediction_mode": "frame",
        "bars": "sine_bars.csv",
        "predictions": "sine_predictions.csv",
        "sentiment": "sine_sentiment.csv",
    }
    a = achilles.run_backtest(config, FIXTURES, tmp_path / "a")
    b = achilles.run_backtest(config, FIXTURES, tmp_path / "b")
    assert a == b
    assert a["steps"] == 240
    assert (tmp_path / "a" / "waterfall.svg").exists()
    assert (tmp_path / "a" / "trades.csv").read_bytes() == (tmp_path / "b" / "trades.csv").read_bytes()


def test_errors_are_typed():
    with pytest.raises(achilles.AchillesError, match="^io:"):
        achilles.load_bars(str(FIXTURES / "missing.csv"))
    with pytest.raises(achilles.AchillesError, match="^invalid_argument:"):
        achilles.run_backtest({"start": "2024-09-03", "end": "2024-09-02", "bars": "x"}, FIXTURES)


def test_digest():
    assert achilles.sha256_hex("abc").startswith("ba7816bf")
