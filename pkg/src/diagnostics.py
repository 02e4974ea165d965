"""Chain diagnostics: autocorrelation, effective sample size and posterior summaries."""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DegenerateChainError, DiagnosticsError
from .model_values import ModelValues

logger = logging.getLogger(__name__)

MIN_ESS_LENGTH = 100
DEFAULT_MAX_LAG = 50


def _check_degenerate(chain: np.ndarray) -> None:
    scale = max(1.0, abs(float(np.mean(chain))))
    if float(np.std(chain)) <= 1e-10 * scale:
        raise DegenerateChainError("Chain has (numerically) zero variance")


def _autocorrelation(chain: np.ndarray) -> np.ndarray:
    n = len(chain)
    centered = chain - chain.mean()
    spectrum = np.fft.rfft(centered, n=2 * n)
    autocov = np.fft.irfft(spectrum * np.conj(spectrum), n=2 * n)[:n]
    return autocov / autocov[0]


def acf(chain, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag."""
    chain = np.asarray(chain, dtype=float)
    if max_lag < 1 or len(chain) <= max_lag:
        raise DiagnosticsError(f"Need 1 <= max_lag < chain length ({len(chain)}), got {max_lag}")
    _check_degenerate(chain)
    return _autocorrelation(chain)[: max_lag + 1]


def effective_sample_size(chain) -> float:
    """ESS with Geyer's initial positive sequence truncation, capped at n."""
    chain = np.asarray(chain, dtype=float)
    n = len(chain)
    if n < MIN_ESS_LENGTH:
        raise DiagnosticsError(f"ESS needs at least {MIN_ESS_LENGTH} draws, got {n}")
    _check_degenerate(chain)
    rho = _autocorrelation(chain)
    pair_sums = 0.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        pair_sums += pair
    tau = max(2.0 * pair_sums - 1.0, 1.0 / n)
    return float(min(n / tau, n))


@dataclass
class ChainSummary:
    name: str
    n: int
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float
    acf: Tuple[float, ...] = ()
    ess: Optional[float] = None
    ess_per_second: Optional[float] = None
    flag: str = ""


@dataclass
class SummaryReport:
    chains: List[ChainSummary]
    correlation: pd.DataFrame
    wall_seconds: float
    max_lag: int = DEFAULT_MAX_LAG

    def __getitem__(self, name: str) -> ChainSummary:
        for chain in self.chains:
            if chain.name == name:
                return chain
        raise KeyError(name)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for chain in self.chains:
            row = asdict(chain)
            row.pop("acf")
            row["acf1"] = chain.acf[1] if len(chain.acf) > 1 else float("nan")
            rows.append(row)
        return pd.DataFrame(rows)

    def acf_frame(self) -> pd.DataFrame:
        lags = self.max_lag + 1
        data = {
            chain.name: list(chain.acf) + [float("nan")] * (lags - len(chain.acf)) for chain in self.chains
        }
        return pd.DataFrame(data, index=pd.RangeIndex(lags, name="lag"))

    def write(self, directory: Union[str, Path]) -> Dict[str, Path]:
        directory = Path(directory)
        paths = {
            "summary": directory / "summary.csv",
            "acf": directory / "acf.csv",
            "correlation": directory / "correlation.csv",
        }
        self.to_frame().to_csv(paths["summary"], index=False)
        self.acf_frame().to_csv(paths["acf"])
        self.correlation.to_csv(paths["correlation"])
        return paths


def _summarize_column(name: str, chain: np.ndarray, wall_seconds: float, max_lag: int) -> ChainSummary:
    n = len(chain)
    q025, q50, q975 = np.quantile(chain, [0.025, 0.5, 0.975])
    summary = ChainSummary(
        name=name,
        n=n,
        mean=float(np.mean(chain)),
        sd=float(np.std(chain, ddof=1)) if n > 1 else float("nan"),
        q025=float(q025),
        q50=float(q50),
        q975=float(q975),
    )
    try:
        if n > 1:
            summary.acf = tuple(float(v) for v in acf(chain, min(max_lag, n - 1)))
        summary.ess = effective_sample_size(chain)
    except DegenerateChainError:
        summary.flag = "degenerate"
        return summary
    except DiagnosticsError:
        summary.flag = "short"
        return summary
    if wall_seconds > 0:
        summary.ess_per_second = summary.ess / wall_seconds
    return summary


def summarize(
    mv: ModelValues,
    wall_seconds: float,
    max_lag: int = DEFAULT_MAX_LAG,
    variables: Optional[List[str]] = None,
) -> SummaryReport:
    """Per-column summaries of a sample table plus the column correlation matrix.

    Columns whose ESS cannot be computed carry a ``flag`` ("short" or
    "degenerate") instead of failing the whole summary.
    """
    if len(mv) == 0:
        raise DiagnosticsError("Cannot summarize an empty sample table")
    frame = mv.to_frame(variables)
    chains = [
        _summarize_column(column, frame[column].to_numpy(dtype=float), wall_seconds, max_lag)
        for column in frame.columns
    ]
    correlation = frame.corr() if len(frame) > 1 else pd.DataFrame(
        np.nan, index=frame.columns, columns=frame.columns
    )
    flagged = [chain.name for chain in chains if chain.flag]
    if flagged:
        logger.warning("No ESS for %s", ", ".join(flagged))
    return SummaryReport(chains, correlation, wall_seconds, max_lag)
