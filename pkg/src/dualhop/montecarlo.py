"""Event-level Monte-Carlo estimators for every link and the dual-hop chain.

Trials are cut into fixed-size batches; batch ``b`` always draws from the
stream keyed by ``(master_seed, tag, b)``. Workers only decide *where* a
batch runs, so any worker count gives bit-identical metrics.

Kernels return ``(outage, snr)`` arrays of shape ``(n,)`` or ``(n, G)``;
the second form evaluates a whole SNR grid on common random numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .channels import (
    FsoLinkParams,
    PhaseConfig,
    RfRisLinkParams,
    UwocDirectLinkParams,
    UwocOrisLinkParams,
    optimal_phases,
    rf_effective_snr,
    sample_gamma_gamma,
    sample_rf_channels,
    sample_uwoc_cascade,
    sample_uwoc_direct,
)
from .rng import stream

IDEAL = "ideal"


@dataclass(frozen=True)
class McConfig:
    n_trials: int = 10**6
    master_seed: int = 0
    n_workers: int = 1
    batch_size: int = 50_000

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.n_workers < 1 or self.batch_size < 1:
            raise ValueError("n_workers and batch_size must be >= 1")

    @property
    def n_batches(self) -> int:
        return -(-self.n_trials // self.batch_size)

    def batch_sizes(self) -> list[int]:
        full, rest = divmod(self.n_trials, self.batch_size)
        return [self.batch_size] * full + ([rest] if rest else [])


@dataclass(frozen=True)
class BatchStats:
    """Sufficient statistics of one batch (Welford form)."""

    n: int
    outages: int
    snr_mean: float
    snr_m2: float
    cap_mean: float
    cap_m2: float

    @classmethod
    def from_samples(cls, outage, snr) -> "BatchStats":
        snr = np.asarray(snr, dtype=float)
        cap = capacity_imdd(snr)
        return cls(
            n=int(snr.size),
            outages=int(np.count_nonzero(outage)),
            snr_mean=float(np.mean(snr)),
            snr_m2=float(np.sum((snr - np.mean(snr)) ** 2)),
            cap_mean=float(np.mean(cap)),
            cap_m2=float(np.sum((cap - np.mean(cap)) ** 2)),
        )

    def merge(self, other: "BatchStats") -> "BatchStats":
        n = self.n + other.n

        def pool(m_a, m2_a, m_b, m2_b):
            delta = m_b - m_a
            mean = m_a + delta * other.n / n
            return mean, m2_a + m2_b + delta * delta * self.n * other.n / n

        snr_mean, snr_m2 = pool(self.snr_mean, self.snr_m2, other.snr_mean, other.snr_m2)
        cap_mean, cap_m2 = pool(self.cap_mean, self.cap_m2, other.cap_mean, other.cap_m2)
        return BatchStats(n, self.outages + other.outages, snr_mean, snr_m2, cap_mean, cap_m2)


@dataclass(frozen=True)
class EvalMetrics:
    outage_probability: float
    outage_se: float
    mean_snr_linear: float
    mean_snr_se: float
    capacity_bits_per_use: float
    capacity_se: float
    n_trials: int

    def __post_init__(self):
        if not 0.0 <= self.outage_probability <= 1.0:
            raise ValueError("outage probability outside [0, 1]")
        if min(self.outage_se, self.mean_snr_se, self.capacity_se) < 0:
            raise ValueError("standard errors must be non-negative")


def capacity_imdd(snr_linear):
    """IM/DD capacity lower bound 0.5 log2(1 + e*snr / (2 pi)), bits/use."""
    snr = np.asarray(snr_linear, dtype=float)
    out = 0.5 * np.log2(1.0 + math.e * snr / (2.0 * math.pi))
    return float(out) if out.ndim == 0 else out


def aggregate(batches) -> EvalMetrics:
    batches = list(batches)
    if not batches:
        raise ValueError("aggregate needs at least one batch")
    total = batches[0]
    for b in batches[1:]:
        total = total.merge(b)
    n = total.n
    p = total.outages / n

    def se(m2):
        return math.sqrt(m2 / (n - 1) / n) if n > 1 else 0.0

    return EvalMetrics(
        outage_probability=p,
        outage_se=math.sqrt(p * (1.0 - p) / n),
        mean_snr_linear=total.snr_mean,
        mean_snr_se=se(total.snr_m2),
        capacity_bits_per_use=total.cap_mean,
        capacity_se=se(total.cap_m2),
        n_trials=n,
    )


# ---------------------------------------------------------------------------
# Batch driver
# ---------------------------------------------------------------------------


def _run_batch(kernel, master_seed, tag, index, size):
    rng = stream(master_seed, tag, index)
    outage, snr = kernel(rng, size)
    outage = np.asarray(outage)
    snr = np.asarray(snr, dtype=float)
    if snr.ndim == 1:
        return [BatchStats.from_samples(outage, snr)]
    return [BatchStats.from_samples(outage[:, g], snr[:, g]) for g in range(snr.shape[1])]


def simulate(kernel, mc: McConfig, tag: str) -> list[EvalMetrics]:
    """Run ``kernel`` over all batches and pool per grid column."""
    sizes = mc.batch_sizes()
    jobs = [(kernel, mc.master_seed, tag, i, s) for i, s in enumerate(sizes)]
    if mc.n_workers == 1 or len(jobs) == 1:
        per_batch = [_run_batch(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=mc.n_workers) as pool:
            per_batch = list(pool.map(_run_batch, *zip(*jobs)))
    n_cols = len(per_batch[0])
    return [aggregate(batch[c] for batch in per_batch) for c in range(n_cols)]


# ---------------------------------------------------------------------------
# Hop 1: FSO with RIS-aided RF backup
# ---------------------------------------------------------------------------


def _fso_rf_kernel(fso: FsoLinkParams, rf: RfRisLinkParams, mean_snrs: np.ndarray, rng, n):
    irradiance = sample_gamma_gamma(fso.gamma_gamma(), rng, n)
    gamma_fso = mean_snrs[None, :] * (irradiance**2)[:, None]
    if rf is None:
        return gamma_fso < fso.switch_threshold_linear, gamma_fso
    chans = sample_rf_channels(rf, rng, n)
    if rf.n_elements:
        gamma_rf = rf_effective_snr(chans, optimal_phases(chans), rf.mean_snr_linear)
    else:
        gamma_rf = rf.mean_snr_linear * np.abs(chans.h_sd) ** 2
    gamma_rf = gamma_rf[:, None]
    fso_down = gamma_fso < fso.switch_threshold_linear
    outage = fso_down & (gamma_rf < rf.outage_threshold_linear)
    snr = np.where(fso_down, gamma_rf, gamma_fso)
    return outage, snr


def estimate_fso_rf_op_grid(fso: FsoLinkParams, rf: RfRisLinkParams | None, mean_snr_grid, mc: McConfig,
                            tag: str = "fso_rf") -> list[EvalMetrics]:
    """Hard-switching outage over a grid of FSO mean SNRs (linear).

    ``rf=None`` gives the FSO link alone.
    """
    grid = np.atleast_1d(np.asarray(mean_snr_grid, dtype=float))
    return simulate(partial(_fso_rf_kernel, fso, rf, grid), mc, tag)


def estimate_fso_rf_op(fso: FsoLinkParams, rf: RfRisLinkParams, mc: McConfig, tag: str = "fso_rf") -> EvalMetrics:
    return estimate_fso_rf_op_grid(fso, rf, [fso.mean_snr_linear], mc, tag)[0]


# ---------------------------------------------------------------------------
# Hop 2: O-RIS underwater optical
# ---------------------------------------------------------------------------


def uwoc_combined_gain(sample, rho, phases_policy=IDEAL):
    """|sum_n h_n rho_n e^{j theta_n}|^2 per trial (unit mean SNR)."""
    if isinstance(phases_policy, str):
        if phases_policy != IDEAL:
            raise ValueError(f"unknown phase policy {phases_policy!r}")
        return np.sum(sample.magnitude * rho, axis=-1) ** 2
    if callable(phases_policy):
        theta = np.asarray(phases_policy(sample), dtype=float)
    else:
        theta = phases_policy.phases if isinstance(phases_policy, PhaseConfig) else np.asarray(phases_policy)
    field = np.sum(sample.magnitude * rho * np.exp(1j * (sample.phase + theta)), axis=-1)
    return np.abs(field) ** 2


def _uwoc_kernel(params, phases_policy, mean_snrs, rng, n):
    if isinstance(params, UwocDirectLinkParams):
        gain = sample_uwoc_direct(params, rng, n) ** 2
    else:
        sample = sample_uwoc_cascade(params, rng, n)
        gain = uwoc_combined_gain(sample, params.reflection_coeffs, phases_policy)
    snr = mean_snrs[None, :] * gain[:, None]
    return snr < params.outage_threshold_linear, snr


def estimate_uwoc_op_grid(params: UwocOrisLinkParams, phases_policy, mean_snr_grid, mc: McConfig,
                          tag: str = "uwoc") -> list[EvalMetrics]:
    """O-RIS hop outage over a grid of mean SNRs.

    A :class:`UwocDirectLinkParams` link is also accepted (phases unused).

    ``phases_policy`` is ``"ideal"`` (co-phased), a fixed phase vector, or a
    callable mapping a :class:`UwocChannelSample` batch to per-trial phases.
    """
    grid = np.atleast_1d(np.asarray(mean_snr_grid, dtype=float))
    return simulate(partial(_uwoc_kernel, params, phases_policy, grid), mc, tag)


def estimate_uwoc_op(params: UwocOrisLinkParams, phases_policy, mc: McConfig, tag: str = "uwoc") -> EvalMetrics:
    return estimate_uwoc_op_grid(params, phases_policy, [params.mean_snr_linear], mc, tag)[0]


# ---------------------------------------------------------------------------
# Dual hop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class E2eEstimate:
    joint: EvalMetrics
    hop1: EvalMetrics
    hop2: EvalMetrics
    composed_op: float
    composed_se: float

    @property
    def discrepancy_z(self) -> float:
        se = math.hypot(self.joint.outage_se, self.composed_se)
        diff = self.joint.outage_probability - self.composed_op
        return 0.0 if se == 0 else diff / se


def _e2e_kernel(fso, rf, uwoc, phases_policy, fso_snrs, uwoc_snrs, rng, n):
    out1, snr1 = _fso_rf_kernel(fso, rf, fso_snrs, rng, n)
    out2, snr2 = _uwoc_kernel(uwoc, phases_policy, uwoc_snrs, rng, n)
    return out1 | out2, np.minimum(snr1, snr2)


def estimate_e2e_op_grid(fso: FsoLinkParams, rf: RfRisLinkParams, uwoc: UwocOrisLinkParams, mean_snr_grid,
                         mc: McConfig, phases_policy=IDEAL) -> list[E2eEstimate]:
    """Joint DF simulation plus the composition of independent per-hop runs.

    The grid sets the mean SNR of both optical links; the RF mean SNR stays
    at its configured value.
    """
    grid = np.atleast_1d(np.asarray(mean_snr_grid, dtype=float))
    return estimate_e2e_op_grids(fso, rf, uwoc, grid, grid, mc, phases_policy)


def estimate_e2e_op_grids(fso, rf, uwoc, fso_grid, uwoc_grid, mc: McConfig, phases_policy=IDEAL) -> list[E2eEstimate]:
    """Paired grids: point j uses ``fso_grid[j]`` and ``uwoc_grid[j]``.

    ``rf=None`` drops the RF backup; ``uwoc`` may be a direct link.
    """
    fso_grid = np.atleast_1d(np.asarray(fso_grid, dtype=float))
    uwoc_grid = np.atleast_1d(np.asarray(uwoc_grid, dtype=float))
    joint = simulate(partial(_e2e_kernel, fso, rf, uwoc, phases_policy, fso_grid, uwoc_grid), mc, "e2e")
    hop1 = estimate_fso_rf_op_grid(fso, rf, fso_grid, mc, tag="e2e_hop1")
    hop2 = estimate_uwoc_op_grid(uwoc, phases_policy, uwoc_grid, mc, tag="e2e_hop2")
    out = []
    for j, h1, h2 in zip(joint, hop1, hop2):
        p1, p2 = h1.outage_probability, h2.outage_probability
        composed = p1 + p2 - p1 * p2
        se = math.hypot((1 - p2) * h1.outage_se, (1 - p1) * h2.outage_se)
        out.append(E2eEstimate(j, h1, h2, composed, se))
    return out


def estimate_e2e_op(fso: FsoLinkParams, rf: RfRisLinkParams, uwoc: UwocOrisLinkParams, mc: McConfig,
                    phases_policy=IDEAL) -> E2eEstimate:
    """Single-point version using each link's configured mean SNR."""
    return estimate_e2e_op_grids(fso, rf, uwoc, [fso.mean_snr_linear], [uwoc.mean_snr_linear], mc,
                                 phases_policy)[0]
