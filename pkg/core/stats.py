"""Summary statistics of terminal walker positions."""

from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats


def compute_sample_statistics(positions: np.ndarray, realized_t: Optional[float] = None) -> dict:
    """
    Compute moments and quantiles of a sample of positions.

    Args:
        positions: Terminal positions S_n.
        realized_t: Realized time t_n; adds the Gaussian reference variance 2 t_n.

    Returns:
        Dictionary with count, mean, std, variance, median, quartiles and SEM.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.size == 0:
        raise ValueError("no positions")
    q1, median, q3 = np.percentile(positions, [25.0, 50.0, 75.0])
    result = {
        "count": int(positions.size),
        "mean": float(np.mean(positions)),
        "std": float(np.std(positions, ddof=1)) if positions.size > 1 else 0.0,
        "variance": float(np.var(positions, ddof=1)) if positions.size > 1 else 0.0,
        "median": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "iqr": float(q3 - q1),
        "min": float(np.min(positions)),
        "max": float(np.max(positions)),
        "sem": float(stats.sem(positions)) if positions.size > 1 else 0.0,
    }
    if realized_t is not None:
        result["realized_t"] = float(realized_t)
        result["gauss_variance"] = 2.0 * float(realized_t)
    return result


def save_statistics_summary(
    stats_dict: dict,
    path: Path,
    title: str = "Sample Statistics Summary",
) -> None:
    """Save statistics to a text file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    lines = [title, "=" * 40, ""]
    for key, value in stats_dict.items():
        if isinstance(value, float):
            lines.append(f"{key}: {value:.10g}")
        else:
            lines.append(f"{key}: {value}")

    path.write_text("\n".join(lines) + "\n")
