"""Multi-chain convergence diagnostics (split R-hat, autocorrelation ESS)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, InvalidInputError

DEFAULT_MONITORED = ("sigma2", "w", "beta", "inclusion")
INCLUSION_BATCHES = 50


def _as_chains(chains) -> np.ndarray:
    arr = np.asarray([np.asarray(c, dtype=float) for c in chains])
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise InvalidInputError("expected a list of equal-length scalar chains")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("chains contain non-finite values")
    return arr


def split_rhat(chains) -> float:
    """Potential scale reduction computed over split chain halves.

    Each chain of length ``2n`` (a trailing odd draw is dropped) becomes
    two chains of length ``n``; with ``W`` the mean within-half variance and
    ``B`` ``n`` times the variance of the half means,
    ``R = sqrt(((n - 1) / n * W + B / n) / W)``.
    """
    arr = _as_chains(chains)
    if arr.shape[1] < 4:
        raise InvalidInputError("each chain needs at least 4 draws")
    n = arr.shape[1] // 2
    halves = np.concatenate([arr[:, :n], arr[:, arr.shape[1] - n:]], axis=0)
    if np.var(halves) == 0.0:
        raise DegenerateInputError("chains are constant")
    W = np.mean(np.var(halves, axis=1, ddof=1))
    B = n * np.var(np.mean(halves, axis=1), ddof=1)
    if W == 0.0:
        return float("inf")
    return float(np.sqrt(((n - 1) / n * W + B / n) / W))


def _autocov(x):
    n = x.shape[-1]
    size = 1 << (2 * n - 1).bit_length()
    xc = x - x.mean(axis=-1, keepdims=True)
    fx = np.fft.rfft(xc, size, axis=-1)
    return np.fft.irfft(fx * np.conj(fx), size, axis=-1)[..., :n] / n


def effective_sample_size(chains) -> float:
    """Autocorrelation-based effective sample size across chains.

    Autocorrelations are combined across chains and truncated with Geyer's
    initial monotone sequence.  Antithetic chains can exceed the draw count;
    the estimate is capped at ``n_total * log10(n_total)``.
    """
    arr = _as_chains(chains)
    m, n = arr.shape
    if n < 4:
        raise InvalidInputError("each chain needs at least 4 draws")
    if np.var(arr) == 0.0:
        raise DegenerateInputError("chains are constant")
    acov = _autocov(arr)
    mean_var = acov[:, 0].mean() * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += np.var(arr.mean(axis=1), ddof=1)
    if var_plus == 0.0:
        raise DegenerateInputError("chains have zero within-chain variance")

    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = rho_odd
    t = 1
    while t < n - 3 and rho_even + rho_odd > 0.0:
        rho_even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        if rho_even + rho_odd >= 0.0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0.0:
        rho[max_t + 1] = rho_even
    # enforce a monotone sequence of pair sums
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = rho[t + 2] = (rho[t - 1] + rho[t]) / 2.0
        t += 2
    total = m * n
    tau = -1.0 + 2.0 * np.sum(rho[:max_t + 1]) + rho[max_t + 1]
    tau = max(tau, 1.0 / np.log10(total))
    return float(total / tau)


@dataclass
class ParamDiagnostic:
    name: str
    rhat: float
    ess: float
    status: str = "ok"


@dataclass
class ConvergenceReport:
    """Per-parameter split R-hat and ESS with an overall verdict.

    ``verdict`` is ``"pass"`` when every non-degenerate parameter has R-hat
    below the threshold, ``"fail"`` otherwise, and ``"degenerate"`` when no
    monitored parameter varies.
    """

    params: list
    threshold: float
    n_chains: int
    worst_rhat: float
    verdict: str
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold, "n_chains": self.n_chains,
            "worst_rhat": self.worst_rhat, "verdict": self.verdict, "flags": list(self.flags),
            "params": [{"name": p.name, "rhat": p.rhat, "ess": p.ess, "status": p.status}
                       for p in self.params],
        }


def batch_means(x, n_batches: int = INCLUSION_BATCHES) -> np.ndarray:
    """Means of consecutive equal-size batches; leftover leading draws are dropped.

    Cumulative means are non-stationary and inflate split R-hat even for
    independent draws, so indicator traces are summarised by batch means.
    """
    x = np.asarray(x, dtype=float)
    n_batches = min(n_batches, x.shape[-1])
    size = x.shape[-1] // n_batches
    return x[..., x.shape[-1] - size * n_batches:].reshape(*x.shape[:-1], n_batches, size).mean(-1)


def _monitored_series(traces, monitored, n_inclusion, seed, tf_ids):
    t0 = traces[0]
    names = tf_ids or [str(j) for j in range(t0.beta.shape[1])]
    series = []
    for sel in monitored:
        if sel == "sigma2":
            series.append(("sigma2", [t.sigma2 for t in traces]))
        elif sel in ("w", "beta"):
            for j, tf in enumerate(names):
                series.append((f"{sel}[{tf}]", [getattr(t, sel)[:, j] for t in traces]))
        elif sel == "gamma":
            for p, (j, k) in enumerate(t0.pairs):
                series.append((f"gamma[{names[j]},{names[k]}]", [t.gamma[:, p] for t in traces]))
        elif sel == "inclusion":
            cells = t0.monitor_cells
            k = min(n_inclusion, len(cells))
            pick = np.sort(np.random.default_rng(seed).choice(len(cells), size=k, replace=False))
            for idx in pick:
                i, j = cells[idx]
                series.append((f"inclusion[{i},{names[j]}]",
                               [batch_means(t.monitor_values[:, idx]) for t in traces]))
        else:
            raise InvalidInputError(f"unknown monitored parameter {sel!r}")
    return series


def convergence_report(traces, monitored=DEFAULT_MONITORED, threshold: float = 1.1,
                       n_inclusion: int = 100, seed: int = 0, tf_ids=None) -> ConvergenceReport:
    """Split R-hat and ESS for the monitored parameters of several chains.

    ``monitored`` selects among ``sigma2``, ``w``, ``beta``, ``gamma`` and
    ``inclusion``; indicators enter through inclusion means over
    ``INCLUSION_BATCHES`` consecutive batches per chain, for ``n_inclusion``
    of the cells the chains recorded, chosen with ``seed``.  Degenerate (constant) parameters are skipped and flagged.
    """
    traces = list(traces)
    if not traces:
        raise InvalidInputError("no traces")
    monitored = tuple(monitored)
    if not monitored:
        raise InvalidInputError("monitored set is empty")
    flags = ["single-chain"] if len(traces) == 1 else []
    results = []
    for name, chains in _monitored_series(traces, monitored, n_inclusion, seed, tf_ids):
        try:
            results.append(ParamDiagnostic(name, split_rhat(chains), effective_sample_size(chains)))
        except DegenerateInputError:
            results.append(ParamDiagnostic(name, float("nan"), float("nan"), "degenerate"))
    ok = [p.rhat for p in results if p.status == "ok"]
    if not ok:
        return ConvergenceReport(results, threshold, len(traces), float("nan"), "degenerate",
                                 flags + ["all-degenerate"])
    if len(ok) < len(results):
        flags.append("some-degenerate")
    worst = float(max(ok))
    return ConvergenceReport(results, threshold, len(traces), worst,
                             "pass" if worst < threshold else "fail", flags)
