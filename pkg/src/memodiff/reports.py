"""Inequality reports and their CSV serialization."""

import csv
from dataclasses import dataclass, field

import numpy as np

REPORT_COLUMNS = ("name", "t", "lhs", "rhs", "margin")


def fmt(x):
    """Round-trip float formatting used in every CSV artifact."""
    return format(float(x), ".17g")


@dataclass
class EstimateReport:
    """Sample-wise record of an inequality ``lhs <= rhs``.

    Inequalities stated the other way round (a lower bound) are stored with
    the bound in ``lhs`` so that ``margin = rhs - lhs`` is always the slack.

    Attributes
    ----------
    name : str
        Label used in CSV rows and the summary line.
    t : ndarray
        Sample abscissae (time, or s for grid-wise checks).
    lhs, rhs : ndarray
        Two sides of the inequality at each sample.
    tolerance : float
        Absolute tolerance; the check passes iff ``worst_margin >= -tolerance``.
    info : dict
        Constants used by the check (Q, alpha, ...), echoed in summaries.
    """

    name: str
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    tolerance: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.atleast_1d(np.asarray(self.t, dtype=float))
        self.lhs = np.atleast_1d(np.asarray(self.lhs, dtype=float))
        self.rhs = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        if not (self.t.shape == self.lhs.shape == self.rhs.shape):
            raise ValueError("t, lhs and rhs must have equal shapes")

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def worst_margin(self):
        if self.margin.size == 0:
            return np.inf
        return float(np.min(self.margin))

    @property
    def passed(self):
        return bool(self.worst_margin >= -self.tolerance)

    @property
    def n_failures(self):
        return int(np.count_nonzero(self.margin < -self.tolerance))

    def summary_line(self):
        status = "PASS" if self.passed else "FAIL"
        extras = "".join(f" {k}={fmt(v) if isinstance(v, float) else v}" for k, v in self.info.items())
        return (f"{status} {self.name}: samples={self.t.size} failures={self.n_failures} "
                f"worst_margin={fmt(self.worst_margin)} tolerance={fmt(self.tolerance)}{extras}")

    def rows(self):
        for t, l, r, m in zip(self.t, self.lhs, self.rhs, self.margin):
            yield (self.name, fmt(t), fmt(l), fmt(r), fmt(m))


def write_reports_csv(reports, stream):
    """Write the rows of several reports to an open text stream."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for report in reports:
        writer.writerows(report.rows())


def merge_reports(name, reports, info=None):
    """Concatenate the samples of several reports of one inequality.

    The merged tolerance is the smallest of the parts.
    """
    reports = list(reports)
    if not reports:
        return EstimateReport(name, [], [], [], 0.0, dict(info or {}))
    cat = lambda attr: np.concatenate([getattr(r, attr) for r in reports])
    return EstimateReport(name, cat("t"), cat("lhs"), cat("rhs"), min(r.tolerance for r in reports),
                          dict(info or {}))
