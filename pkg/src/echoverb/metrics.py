"""Five-component output decomposition and the evaluation metrics.

The enhanced signal is decomposed per channel and per period by jointly
projecting it onto the ground-truth components (early/late near-end,
echo, noise); the projection residual counts as artifacts.  Metrics are
dB energy ratios of those components, averaged over channels and then
over periods in the fashion of the segmental SNR.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .scenes import DOUBLE_TALK, FAR_END_TALK, NEAR_END_TALK

COMPONENTS = ("s_e", "s_l", "y", "b")
METRIC_NAMES = ("si_sdr", "erle", "ser", "elr", "snr", "si_sar")

# periods each metric is evaluated on
METRIC_PERIODS = {
    "si_sdr": (NEAR_END_TALK, DOUBLE_TALK),
    "erle": (DOUBLE_TALK, FAR_END_TALK),
    "ser": (DOUBLE_TALK,),
    "elr": (NEAR_END_TALK, DOUBLE_TALK),
    "snr": (NEAR_END_TALK, DOUBLE_TALK),
    "si_sar": (NEAR_END_TALK, DOUBLE_TALK),
}

DB_CAP = 100.0


@dataclass
class ComponentDecomposition:
    """Post components of the enhanced signal, each of shape [T, M].

    ``gammas[p][m]`` holds the four per-period per-channel scale
    factors in COMPONENTS order; the reconstruction
    s_e_post + s_l_post + y_post + b_post + s_e_art equals the
    enhanced signal on every period.
    """

    s_e_post: np.ndarray
    s_l_post: np.ndarray
    y_post: np.ndarray
    b_post: np.ndarray
    s_e_art: np.ndarray
    gammas: np.ndarray  # [n_periods, M, 4]


def decompose(s_e_hat, scene):
    """Least-squares decomposition of the enhanced signal.

    Per channel and per period, solves
    min_gamma || s_e_hat - sum_c gamma_c c ||^2 over the ground-truth
    components; exactly-silent components are dropped from the
    projection (their gamma is 0).
    """
    s_e_hat = np.asarray(s_e_hat, dtype=np.float64)
    if s_e_hat.ndim == 1:
        s_e_hat = s_e_hat[:, None]
    n_samples, n_ch = s_e_hat.shape
    if n_samples != scene.d.shape[0] or n_ch != scene.num_channels:
        raise InvalidInput("enhanced signal does not match the scene layout")

    refs = [scene.s_e, scene.s_l, scene.y, scene.b]
    posts = [np.zeros_like(s_e_hat) for _ in COMPONENTS]
    gammas = np.zeros((len(scene.periods), n_ch, len(COMPONENTS)))

    for pi, (start, end, _) in enumerate(scene.periods):
        for m in range(n_ch):
            target = s_e_hat[start:end, m]
            cols = [ref[start:end, m] for ref in refs]
            active = [i for i, col in enumerate(cols) if np.any(col)]
            if active:
                basis = np.stack([cols[i] for i in active], axis=1)
                sol, *_ = np.linalg.lstsq(basis, target, rcond=None)
                for i, ci in enumerate(active):
                    gammas[pi, m, ci] = sol[i]
                    posts[ci][start:end, m] = sol[i] * cols[ci]

    s_e_art = s_e_hat - sum(posts)
    return ComponentDecomposition(*posts, s_e_art, gammas)


@dataclass
class MetricsReport:
    """Per-period (channel-averaged) and period-averaged metric values.

    ``per_period`` maps a period label to {metric: dB}; ``averages``
    maps each metric to its mean over the periods it is evaluated on.
    ``rows`` keeps the raw per-(period, channel) values for CSV export.
    """

    per_period: dict
    averages: dict
    rows: list


def _db_ratio(num, den):
    """10 log10(num/den) hard-capped to +/-100 dB."""
    if den <= 0.0:
        return DB_CAP
    if num <= 0.0:
        return -DB_CAP
    return float(np.clip(10.0 * np.log10(num / den), -DB_CAP, DB_CAP))


def _period_channel_metrics(dec, scene, start, end, m):
    e_se = float(np.sum(dec.s_e_post[start:end, m] ** 2))
    e_sl = float(np.sum(dec.s_l_post[start:end, m] ** 2))
    e_y = float(np.sum(dec.y_post[start:end, m] ** 2))
    e_b = float(np.sum(dec.b_post[start:end, m] ** 2))
    e_art = float(np.sum(dec.s_e_art[start:end, m] ** 2))
    e_y_raw = float(np.sum(scene.y[start:end, m] ** 2))
    distortion = float(np.sum(
        (dec.s_l_post[start:end, m] + dec.y_post[start:end, m]
         + dec.b_post[start:end, m] + dec.s_e_art[start:end, m]) ** 2
    ))
    return {
        "si_sdr": _db_ratio(e_se, distortion),
        "erle": _db_ratio(e_y_raw, e_y),
        "ser": _db_ratio(e_se, e_y),
        "elr": _db_ratio(e_se, e_sl),
        "snr": _db_ratio(e_se, e_b),
        "si_sar": _db_ratio(e_se, e_art),
    }


def compute_metrics(dec, scene):
    """Evaluate all metrics on a decomposition.

    Each metric is computed per channel on the periods it applies to,
    averaged over the M channels, and finally averaged over periods.
    """
    n_ch = scene.num_channels
    rows = []
    per_period = {}
    for (start, end, label) in scene.periods:
        channel_vals = []
        for m in range(n_ch):
            vals = _period_channel_metrics(dec, scene, start, end, m)
            row = {"period_label": label, "channel": m}
            for name in METRIC_NAMES:
                row[name] = vals[name] if label in METRIC_PERIODS[name] else None
            rows.append(row)
            channel_vals.append(vals)
        summary = {}
        for name in METRIC_NAMES:
            if label in METRIC_PERIODS[name]:
                summary[name] = float(
                    np.mean([cv[name] for cv in channel_vals])
                )
        if summary:
            per_period[label] = summary

    averages = {}
    for name in METRIC_NAMES:
        vals = [
            per_period[label][name]
            for label in METRIC_PERIODS[name]
            if label in per_period
        ]
        if vals:
            averages[name] = float(np.mean(vals))
    return MetricsReport(per_period, averages, rows)


def evaluate(s_e_hat, scene):
    """Decompose and score in one step."""
    return compute_metrics(decompose(s_e_hat, scene), scene)
