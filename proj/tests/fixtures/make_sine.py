"""Writes the small sine-wave fixtures used by the CLI and Python smoke tests."""
import math
from datetime import datetime, timedelta
from pathlib import Path

HERE = Path(__file__).resolve().parent
START = datetime(2024, 9, 2)
MINUTES = 900
BASE, AMP, PERIOD = 2400.0, 10.0, 120.0


def price(i):
    return BASE + AMP * math.cos(2 * math.pi * i / PERIOD)


def stamp(t):
    return t.strftime("%Y-%m-%d %H:%M:%S")


def main():
    with open(HERE / "sine_bars.csv", "w") as f:
        f.write("Time,Open,High,Low,Close,Volume\n")
        for i in range(MINUTES):
            o, c = price(i - 1), price(i)
            f.write(f"{stamp(START + timedelta(minutes=i))},{o:.6f},{max(o, c) + 0.05:.6f},"
                    f"{min(o, c) - 0.05:.6f},{c:.6f},{100 + i % 7}\n")
    with open(HERE / "sine_predictions.csv", "w") as f:
        f.write("Date,Price\n")
        for i in range(MINUTES):
            f.write(f"{stamp(START + timedelta(minutes=i))},{price(i):.6f}\n")
    with open(HERE / "sine_sentiment.csv", "w") as f:
        f.write("Time,Source,Probability,Label\n")
        for source in ("benzinga.com", "investing.com", "ft.com"):
            f.write(f"{stamp(START)},{source},0.9,Positive\n")


if __name__ == "__main__":
    main()
