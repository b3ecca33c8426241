"""Writes data/forecast_pool.csv: synthetic per-unit day-ahead wind forecasts
for eight farms driven by a shared weather factor.

    python scripts/build_forecast_pool.py
"""

from pathlib import Path

import numpy as np
from scipy.stats import beta, norm

ROWS, FARMS, SEED = 4000, 8, 20240601
OUT = Path(__file__).resolve().parent.parent / "data" / "forecast_pool.csv"


def main():
    rng = np.random.default_rng(SEED)
    common = rng.standard_normal(ROWS)
    # Slowly varying regional component shared by neighbouring farms.
    regional = rng.standard_normal((ROWS, 2))
    local = rng.standard_normal((ROWS, FARMS))
    x = 0.75 * common[:, None] + 0.35 * regional[:, np.arange(FARMS) % 2] + 0.56 * local
    u = norm.cdf(x / np.sqrt(0.75**2 + 0.35**2 + 0.56**2))
    f = beta(1.1, 1.4).ppf(u).clip(0.0, 1.0)
    with OUT.open("w") as out:
        out.write(f"# per-unit wind power point forecasts, {FARMS} farms, seed {SEED}\n")
        for row in f:
            out.write(",".join(f"{v:.4f}" for v in row) + "\n")
    high = (f > 0.8).all(axis=1).mean()
    print(f"{OUT}: {ROWS} rows, mean {f.mean():.3f}, all farms above 0.8 in {100 * high:.1f}% of rows")


if __name__ == "__main__":
    main()
