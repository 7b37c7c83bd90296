"""Quote ingestion and return panels.

Raw (timestamp, instrument, bid, ask) rows become hourly mid-price series,
cross rates are derived from shared-base quotes, log-returns are aligned on
a common axis, and every instrument is paired with its inverse so that
downstream network code sees the full antisymmetric panel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from zoneinfo import ZoneInfo

import numpy as np

from .errors import AlignmentError, ConfigError, DataError, EmptyPanelError

PANEL_FORMAT = "corrnets panel v1"


def invert_name(instrument: str) -> str:
    """'XXX/YYY' -> 'YYY/XXX'."""
    base, _, quote = instrument.partition("/")
    if not base or not quote or "/" in quote:
        raise DataError(f"instrument {instrument!r} is not of the form XXX/YYY")
    return f"{quote}/{base}"


def _split_name(instrument: str) -> tuple[str, str]:
    base, _, quote = instrument.partition("/")
    if not base or not quote or "/" in quote:
        raise DataError(f"instrument {instrument!r} is not of the form XXX/YYY")
    return base, quote


@dataclass(frozen=True)
class QuoteSeries:
    """Hourly bid/ask quotes for one instrument.

    Timestamps are hours since the Unix epoch, strictly increasing.
    """

    instrument: str
    timestamps: np.ndarray
    bid: np.ndarray
    ask: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        bid = np.asarray(self.bid, dtype=float)
        ask = np.asarray(self.ask, dtype=float)
        if not (len(ts) == len(bid) == len(ask)):
            raise DataError(f"{self.instrument}: timestamp/bid/ask lengths differ")
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise DataError(f"{self.instrument}: timestamps not strictly increasing")
        if np.any(bid <= 0) or np.any(ask <= 0):
            raise DataError(f"{self.instrument}: non-positive quote")
        if np.any(bid > ask):
            raise DataError(f"{self.instrument}: bid above ask")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "bid", bid)
        object.__setattr__(self, "ask", ask)

    def __len__(self) -> int:
        return len(self.timestamps)


def mid_price(quotes: QuoteSeries) -> np.ndarray:
    """Midpoint of bid and ask."""
    return (quotes.bid + quotes.ask) / 2.0


def log_returns(prices: np.ndarray, present: np.ndarray | None = None) -> np.ndarray:
    """Log-return series on the price axis; NaN where undefined.

    Position t holds ln(p_t / p_{t-1}) and is defined only when both
    endpoints are present.  Position 0 is always NaN.
    """
    p = np.asarray(prices, dtype=float)
    if present is None:
        present = np.isfinite(p)
    else:
        present = np.asarray(present, dtype=bool) & np.isfinite(p)
    if np.any(present & (p <= 0)):
        raise DataError("non-positive price in return computation")
    out = np.full(len(p), np.nan)
    if len(p) < 2:
        return out
    ok = present[1:] & present[:-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        out[1:][ok] = np.log(p[1:][ok] / p[:-1][ok])
    return out


def _cross_name(num: str, den: str) -> str:
    nb, nq = _split_name(num)
    db, dq = _split_name(den)
    if nb == db:
        # (YYY per XXX) / (ZZZ per XXX) prices ZZZ in units of YYY.
        return f"{dq}/{nq}"
    if nq == dq:
        return f"{nb}/{db}"
    raise ConfigError(f"cannot derive a cross from {num} and {den}: no shared leg")


def derive_cross(numerator: QuoteSeries, denominator: QuoteSeries,
                 instrument: str | None = None) -> QuoteSeries:
    """Cross rate from two quote series as a ratio of mid prices.

    The series are intersected on their timestamps; the derived quote has
    equal bid and ask because the ratio of mids carries no spread.
    """
    name = instrument or _cross_name(numerator.instrument, denominator.instrument)
    common, ia, ib = np.intersect1d(numerator.timestamps, denominator.timestamps,
                                    return_indices=True)
    if len(common) == 0:
        raise AlignmentError(
            f"{numerator.instrument} and {denominator.instrument} share no timestamps")
    mids = mid_price(numerator)[ia] / mid_price(denominator)[ib]
    return QuoteSeries(name, common, mids, mids)


@dataclass
class ReturnPanel:
    """Aligned log-returns: one row per instrument, one column per step.

    ``times`` are the timestamps of the retained return steps and ``dropped``
    counts the candidate steps removed because some instrument was missing.
    """

    instruments: list[str]
    times: np.ndarray
    returns: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.returns = np.asarray(self.returns, dtype=float)
        if self.returns.shape != (len(self.instruments), len(self.times)):
            raise DataError("returns matrix shape does not match instruments x times")
        if len(set(self.instruments)) != len(self.instruments):
            raise DataError("duplicate instrument in panel")

    @property
    def n_instruments(self) -> int:
        return len(self.instruments)

    @property
    def n_steps(self) -> int:
        return len(self.times)

    def index(self, instrument: str) -> int:
        return self.instruments.index(instrument)

    def row(self, instrument: str) -> np.ndarray:
        return self.returns[self.index(instrument)]

    def inverse_index(self) -> np.ndarray:
        """Position of each instrument's inverse; raises if any is missing."""
        pos = {name: i for i, name in enumerate(self.instruments)}
        out = np.empty(self.n_instruments, dtype=int)
        for i, name in enumerate(self.instruments):
            inv = invert_name(name)
            if inv not in pos:
                raise DataError(f"panel has {name} but not {inv}")
            out[i] = pos[inv]
        return out


def align_panel(series: dict[str, np.ndarray], times: np.ndarray | None = None,
                ) -> ReturnPanel:
    """Keep only the steps where every series has a finite return.

    All sequences must share one timestamp axis; NaN marks a missing return.
    """
    if not series:
        raise EmptyPanelError("no series to align")
    names = list(series)
    mat = np.vstack([np.asarray(series[k], dtype=float) for k in names])
    if times is None:
        times = np.arange(mat.shape[1], dtype=float)
    times = np.asarray(times, dtype=float)
    if len(times) != mat.shape[1]:
        raise AlignmentError("series do not share the panel time axis")
    keep = np.all(np.isfinite(mat), axis=0)
    dropped = int(np.count_nonzero(~keep))
    if not np.any(keep):
        raise EmptyPanelError("no step has a return for every instrument")
    return ReturnPanel(names, times[keep], mat[:, keep], dropped)


def expand_inverses(panel: ReturnPanel) -> ReturnPanel:
    """Append the inverse of every instrument with negated returns."""
    for name in panel.instruments:
        if invert_name(name) in panel.instruments:
            raise DataError(f"panel already contains the inverse of {name}")
    names = list(panel.instruments) + [invert_name(n) for n in panel.instruments]
    returns = np.vstack([panel.returns, -panel.returns])
    return ReturnPanel(names, panel.times.copy(), returns, panel.dropped)


def carry_trade_index(panel: ReturnPanel, interest_rates: dict[str, np.ndarray],
                      numeraire: str = "USD") -> np.ndarray:
    """Cumulative value of a long-top-3 / short-bottom-3 interest-rate basket.

    Rate sequences must be aligned to the panel steps.  Positions for step t
    use the ranking at step t-1 (step 0 uses its own ranking), weight 1/3 per
    leg, returns measured against the numeraire.  The result has one leading
    entry for the starting value 1.0.
    """
    currencies = sorted(interest_rates)
    if len(currencies) < 6:
        raise ConfigError(f"carry basket needs at least 6 currencies, got {len(currencies)}")
    steps = panel.n_steps
    rates = np.vstack([np.asarray(interest_rates[c], dtype=float) for c in currencies])
    if rates.shape[1] != steps:
        raise AlignmentError("interest-rate series not aligned to panel steps")

    simple = {}
    for c in currencies:
        if c == numeraire:
            simple[c] = np.zeros(steps)
            continue
        name, inv = f"{c}/{numeraire}", f"{numeraire}/{c}"
        if name in panel.instruments:
            r = panel.row(name)
        elif inv in panel.instruments:
            r = -panel.row(inv)
        else:
            raise ConfigError(f"panel has no rate between {c} and {numeraire}")
        simple[c] = np.expm1(r)

    out = np.empty(steps + 1)
    out[0] = 1.0
    for t in range(steps):
        col = rates[:, max(t - 1, 0)]
        order = np.argsort(col, kind="stable")
        bottom = [currencies[i] for i in order[:3]]
        top = [currencies[i] for i in order[-3:]]
        step_ret = (sum(simple[c][t] for c in top) - sum(simple[c][t] for c in bottom)) / 3.0
        out[t + 1] = out[t] * (1.0 + step_ret)
    return out


# ---------------------------------------------------------------------------
# ingestion


def _parse_timestamp(token: str, tz: ZoneInfo) -> float:
    """Epoch seconds from either a numeric token or an ISO-8601 string."""
    try:
        return float(token)
    except ValueError:
        pass
    text = token.strip().replace("Z", "+00:00")
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"unparseable timestamp {token!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=tz)
    return dt.timestamp()


def read_quotes(path: str, tz: str = "UTC") -> dict[str, list[tuple[float, float, float]]]:
    """Raw quote rows grouped by instrument, timestamps as epoch seconds."""
    zone = ZoneInfo(tz)
    rows: dict[str, list[tuple[float, float, float]]] = {}
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and rec[0].strip().lower() in ("timestamp", "time", "ts"):
                continue
            if len(rec) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(rec)}")
            ts = _parse_timestamp(rec[0], zone)
            try:
                bid, ask = float(rec[2]), float(rec[3])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad quote") from exc
            rows.setdefault(rec[1].strip(), []).append((ts, bid, ask))
    if not rows:
        raise EmptyPanelError(f"{path}: no quote rows")
    return rows


def bucket_hourly(rows: list[tuple[float, float, float]], instrument: str,
                  tz: str = "UTC", liquid_hours: tuple[int, int] = (7, 18),
                  exclude_weekends: bool = False) -> QuoteSeries:
    """Last posted quote within each hour, restricted to the liquid window.

    Hours are bucketed on wall-clock boundaries in ``tz`` and the window is
    inclusive of both endpoint hours.
    """
    lo, hi = liquid_hours
    zone = ZoneInfo(tz)
    picked: dict[float, tuple[float, float, float]] = {}
    for ts, bid, ask in sorted(rows):
        local = datetime.fromtimestamp(ts, zone)
        if not (lo <= local.hour <= hi):
            continue
        if exclude_weekends and local.weekday() >= 5:
            continue
        start = local.replace(minute=0, second=0, microsecond=0)
        picked[start.timestamp() / 3600.0] = (ts, bid, ask)
    if not picked:
        raise EmptyPanelError(f"{instrument}: no quotes inside the liquid window")
    hours = np.array(sorted(picked))
    bid = np.array([picked[h][1] for h in hours])
    ask = np.array([picked[h][2] for h in hours])
    return QuoteSeries(instrument, hours, bid, ask)


def apply_rules(quotes: dict[str, QuoteSeries],
                rules: list[tuple[str, str, str]]) -> dict[str, QuoteSeries]:
    """Add derived cross rates; each rule is (target, numerator, denominator).

    Rules may chain, but every numerator and denominator must resolve to a
    base series or an earlier target.
    """
    out = dict(quotes)
    for target, num, den in rules:
        if num not in out or den not in out:
            missing = num if num not in out else den
            raise ConfigError(f"rule for {target}: {missing} not available")
        if target in out:
            raise ConfigError(f"rule target {target} already present")
        out[target] = derive_cross(out[num], out[den], instrument=target)
    return out


def build_panel(quotes: dict[str, QuoteSeries],
                rules: list[tuple[str, str, str]] = (),
                expand: bool = True) -> ReturnPanel:
    """Aligned return panel from hourly quotes, crosses derived, inverses added."""
    full = apply_rules(quotes, list(rules))
    axis = np.array(sorted(set(np.concatenate([q.timestamps for q in full.values()]))))
    series = {}
    for name, q in full.items():
        prices = np.full(len(axis), np.nan)
        prices[np.searchsorted(axis, q.timestamps)] = mid_price(q)
        series[name] = log_returns(prices)[1:]
    panel = align_panel(series, times=axis[1:])
    return expand_inverses(panel) if expand else panel


def read_interest_rates(path: str) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """(epoch hours, annualized decimal rate) per currency from (date, ccy, rate) rows."""
    raw: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and rec[0].strip().lower() in ("date", "timestamp", "time"):
                continue
            if len(rec) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns")
            ts = _parse_timestamp(rec[0], ZoneInfo("UTC"))
            raw.setdefault(rec[1].strip(), []).append((ts / 3600.0, float(rec[2])))
    if not raw:
        raise EmptyPanelError(f"{path}: no rate rows")
    out = {}
    for ccy, pairs in raw.items():
        pairs.sort()
        out[ccy] = (np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))
    return out


def align_rates(times: np.ndarray, rates: dict[str, tuple[np.ndarray, np.ndarray]],
                ) -> dict[str, np.ndarray]:
    """Forward-fill each currency's rate onto the panel time axis."""
    out = {}
    for ccy, (hours, values) in rates.items():
        idx = np.searchsorted(hours, np.asarray(times, dtype=float), side="right") - 1
        if np.any(idx < 0):
            raise AlignmentError(f"{ccy}: panel starts before the first rate observation")
        out[ccy] = values[idx]
    return out


# ---------------------------------------------------------------------------
# serialization


def write_panel(path: str, panel: ReturnPanel, seed: int | None = None,
                meta: dict[str, list[str]] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {PANEL_FORMAT}\n")
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        fh.write(f"# dropped={panel.dropped}\n")
        for key, items in (meta or {}).items():
            for item in items:
                fh.write(f"# {key}={item}\n")
        w = csv.writer(fh)
        w.writerow(["time"] + panel.instruments)
        for j, t in enumerate(panel.times):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in panel.returns[:, j]])


def read_panel(path: str) -> tuple[ReturnPanel, dict[str, list[str]]]:
    meta: dict[str, list[str]] = {}
    dropped = 0
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.strip() != f"# {PANEL_FORMAT}":
            raise DataError(f"{path}: not a {PANEL_FORMAT} file")
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key == "dropped":
                dropped = int(value)
            elif key != "seed":  # seed is run bookkeeping, not panel metadata
                meta.setdefault(key, []).append(value)
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "time":
        raise DataError(f"{path}: missing panel header row")
    instruments = rows[0][1:]
    times = np.array([float(r[0]) for r in rows[1:]])
    returns = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).T
    if returns.size == 0:
        raise EmptyPanelError(f"{path}: panel has no rows")
    return ReturnPanel(instruments, times, returns, dropped), meta
