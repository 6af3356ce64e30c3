"""Classical Fisher information, Cramer-Rao checks and subgrouped SNR."""

from dataclasses import dataclass
import csv
import math

import numpy as np

from . import kernels
from .constants import ATTOSECOND
from .detector import NoiseProfile, row_profile
from .simulation import Simulator

BOOTSTRAP_RESAMPLES = 200
CONVERGENCE_TOL = 0.01
# target fringe-phase change per finite-difference step, radians
PHASE_STEP = 0.01
ROUNDOFF = 64 * np.finfo(float).eps


class NonConvergedError(RuntimeError):
    pass


class ZeroVarianceError(ValueError):
    """Group means are identical, so the SNR is unbounded."""


@dataclass(frozen=True)
class FisherResult:
    tau: float
    per_photon_fisher: float
    total_fisher: float
    crb_std: float
    snr_limit: float
    fisher_std: float | None = None

    def __post_init__(self):
        if not self.total_fisher >= 0:
            raise ValueError(f"total Fisher information must be >= 0, got {self.total_fisher!r}")

    @classmethod
    def from_per_photon(cls, tau, per_photon, photons, per_photon_std=None):
        total = per_photon * photons
        crb = 1.0 / math.sqrt(total) if total > 0 else math.inf
        std = None if per_photon_std is None else per_photon_std * photons
        return cls(tau, per_photon, total, crb, tau * math.sqrt(total), std)


@dataclass(frozen=True)
class SnrReport:
    group_size: int
    group_count: int
    snr_values: tuple
    mean_snr: float
    snr_std: float
    snr: float


@dataclass(frozen=True)
class CrbReport:
    tau: float
    trials: int
    mean_tau_hat: float
    var_tau_hat: float
    crb_var: float
    efficiency: float
    bound_ok: bool


def row_distribution(counts):
    """Normalized row-sum distribution ``p_m`` of a 2D map of means."""
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 2:
        raise ValueError("expected a 2D map")
    if counts.min() < 0:
        raise ValueError("map has negative entries")
    rows = counts.sum(axis=1)
    total = rows.sum()
    if not total > 0:
        raise ValueError("map is identically zero")
    return rows / total


def fisher_from_distributions(p_minus, p0, p_plus, step):
    """Per-event Fisher information ``sum_m (dp_m/dtau)^2 / p_m``.

    Rows where ``p0`` vanishes carry no information and are skipped, and
    a difference below rounding error counts as zero, so a tau-independent
    pattern gives exactly 0. A negative neighbour probability means the
    step left the physical range.
    """
    p_minus, p0, p_plus = (np.asarray(p, dtype=float) for p in (p_minus, p0, p_plus))
    if min(p_minus.min(), p_plus.min()) < 0:
        raise ValueError("finite-difference step too large: probabilities went negative")
    keep = p0 > 0
    p0, p_plus, p_minus = p0[keep], p_plus[keep], p_minus[keep]
    # differences at the rounding level of the brightest row are not signal;
    # dark fringe rows come out of a cancellation and carry that absolute error
    flat = np.abs(p_plus - p_minus) <= ROUNDOFF * p0.max()
    p_plus = np.where(flat, p_minus, p_plus)
    return kernels.fisher_sum(np.ascontiguousarray(p0), np.ascontiguousarray(p_plus),
                              np.ascontiguousarray(p_minus), float(step))


def classical_fisher(distribution, tau, step):
    """Central-difference Fisher information of ``distribution(tau)``.

    Raises
    ------
    NonConvergedError
        If halving ``step`` moves the result by more than 1 %.
    """
    if not step > 0:
        raise ValueError("finite-difference step must be positive")
    p0 = distribution(tau)
    full = fisher_from_distributions(distribution(tau - step), p0, distribution(tau + step), step)
    half = fisher_from_distributions(distribution(tau - step / 2), p0,
                                     distribution(tau + step / 2), step / 2)
    scale = max(full, half)
    if scale > 0 and abs(full - half) > CONVERGENCE_TOL * scale:
        raise NonConvergedError(
            f"Fisher information changed {abs(full - half) / scale:.2%} when the step "
            f"was halved from {step:.3e} s"
        )
    return full


def default_step(sim, tau):
    """Finite-difference step for ``fisher_theoretical``.

    ``max(0.01 tau, 0.1 as)``, capped so the fringe phase moves by at most
    ``PHASE_STEP`` rad; at strong amplification the phase is so steep in
    tau that the uncapped step leaves the linear regime.
    """
    step = max(0.01 * abs(tau), 0.1 * ATTOSECOND)
    wv_u = sim.interference_spec(tau).weak_value_u.real
    wv_d = sim.interference_spec(tau).weak_value_d.real
    rate = sim.omega * abs(wv_u - wv_d)
    if rate > 0:
        step = min(step, PHASE_STEP / rate)
    return step


def fisher_theoretical(setup, tau, delta_tau=None):
    """Shot-noise Fisher information of the row-sum distribution at ``tau``."""
    sim = setup if isinstance(setup, Simulator) else Simulator(setup)
    step = default_step(sim, tau) if delta_tau is None else delta_tau
    per_photon = classical_fisher(lambda t: row_distribution(sim.intensity(t)), tau, step)
    return FisherResult.from_per_photon(tau, per_photon, sim.detected_photons)


def _empirical_p(profiles):
    total = profiles.sum()
    p = profiles.sum(axis=0) / total
    floor = 1.0 / (10.0 * total)
    p = np.maximum(p, floor)
    return p / p.sum()


def fisher_empirical(frames_at, resamples=BOOTSTRAP_RESAMPLES, seed=0):
    """Fisher information estimated from frames recorded at neighbouring delays.

    Parameters
    ----------
    frames_at : mapping
        ``{tau: [CcdFrame, ...]}`` with at least two delays. Precomputed 1D
        row profiles are accepted in place of frames.
    resamples : int
        Bootstrap resamples over frames for ``fisher_std``.

    Returns
    -------
    list of FisherResult
        One per delay. Interior delays use the central difference of their
        neighbours; the end points use the one-sided difference, and with
        exactly two delays the single result sits at their midpoint.
    """
    taus = sorted(frames_at)
    if len(taus) < 2:
        raise ValueError("need frames at two or more neighbouring delays")
    profiles = {}
    for t in taus:
        frames = list(frames_at[t])
        if not frames:
            raise ValueError(f"no frames at tau={t!r}")
        profiles[t] = np.stack([np.asarray(f, dtype=float) if np.ndim(f) == 1 else row_profile(f)
                                for f in frames])
    photons = float(np.mean([profiles[t].sum(axis=1).mean() for t in taus]))

    def stencils():
        if len(taus) == 2:
            return [(0.5 * (taus[0] + taus[1]), taus[0], None, taus[1])]
        out = []
        for i, t in enumerate(taus):
            lo = taus[max(i - 1, 0)]
            hi = taus[min(i + 1, len(taus) - 1)]
            out.append((t, lo, t, hi))
        return out

    def estimate(prof):
        p = {t: _empirical_p(prof[t]) for t in taus}
        res = []
        for t, lo, mid, hi in stencils():
            pm = p[mid] if mid is not None else 0.5 * (p[lo] + p[hi])
            deriv = (p[hi] - p[lo]) / (hi - lo)
            res.append(float(np.sum(deriv * deriv / pm)))
        return np.array(res)

    point = estimate(profiles)
    rng = np.random.default_rng(seed)
    boot = np.empty((resamples, point.size))
    for b in range(resamples):
        draw = {t: profiles[t][rng.integers(0, len(profiles[t]), len(profiles[t]))] for t in taus}
        boot[b] = estimate(draw)
    spread = boot.std(axis=0, ddof=1) if resamples > 1 else np.full(point.size, np.nan)
    return [FisherResult.from_per_photon(t, float(f), photons, float(sd))
            for (t, *_), f, sd in zip(stencils(), point, spread)]


def snr_subgrouped(estimates, group_size=25, seed=None):
    """Subgrouped SNR of repeated delay estimates.

    The estimates are split into ``k = N // n`` consecutive groups of ``n``
    (leftovers dropped) and the SNR is ``mean(X)/std(X)`` over the group
    means ``X``. Its spread comes from the jackknife: ``snr_values`` holds
    the leave-one-group-out SNRs, ``mean_snr`` their mean and ``snr_std``
    the jackknife standard error.

    With ``seed`` set, the estimates are sorted and then shuffled with that
    seed before grouping, which makes the report independent of the input
    order.
    """
    x = np.asarray(estimates, dtype=float)
    n = int(group_size)
    if n < 1:
        raise ValueError("group size must be >= 1")
    k = x.size // n
    if k < 3:
        raise ValueError(f"need at least 3 groups of {n} (got N={x.size}) for the jackknife")
    if seed is not None:
        x = np.sort(x)
        x = x[np.random.default_rng(seed).permutation(x.size)]
    means = x[:k * n].reshape(k, n).mean(axis=1)
    sd = means.std(ddof=1)
    if sd == 0 or not np.isfinite(sd):
        raise ZeroVarianceError("group means have zero variance; SNR is unbounded")
    snr = float(means.mean() / sd)
    loo = np.empty(k)
    for i in range(k):
        rest = np.delete(means, i)
        s = rest.std(ddof=1)
        loo[i] = rest.mean() / s if s > 0 else np.inf
    jack_mean = float(loo.mean())
    jack_std = float(math.sqrt((k - 1) / k * np.sum((loo - jack_mean) ** 2)))
    return SnrReport(n, k, tuple(float(v) for v in loo), jack_mean, jack_std, snr)


def run_trials(sim, tau, trials, seed=0, noise=None, budget=None, reference=None,
               calibration=None):
    """Monte Carlo delay estimates at ``tau``.

    The reference is the noise-free zero-delay pattern unless given, and
    the calibration is local to ``tau`` (see ``Simulator.calibrate_local``).
    Frame ``i`` uses the random stream ``(seed, 0, i)``.
    """
    if reference is None:
        reference = sim.expected_counts(0.0, budget)
    if calibration is None:
        calibration = sim.calibrate_local(tau, reference)
    out = np.empty(trials)
    for i in range(trials):
        frame = sim.frame(tau, (seed, 0, i), noise=noise, budget=budget)
        out[i] = sim.estimate(frame, reference, calibration, tau_hint=tau)[1]
    return out


def crb_check(setup, tau, trials=200, seed=0):
    """Shot-noise Monte Carlo against the Cramer-Rao bound.

    The bound is checked with a statistical allowance,
    ``Var >= CRB * (1 - 3/sqrt(trials))``.
    """
    if trials < 100:
        raise ValueError("crb_check needs at least 100 trials")
    sim = setup if isinstance(setup, Simulator) else Simulator(setup)
    fisher = fisher_theoretical(sim, tau)
    est = run_trials(sim, tau, trials, seed=seed, noise=NoiseProfile())
    var = float(est.var(ddof=1))
    crb = 1.0 / fisher.total_fisher
    return CrbReport(tau, trials, float(est.mean()), var, crb,
                     crb / var if var > 0 else math.inf,
                     var >= crb * (1 - 3 / math.sqrt(trials)))


METROLOGY_COLUMNS = ("beta_deg", "tau_as", "per_photon_F", "total_F", "crb_std_as",
                     "snr_limit", "snr_mean", "snr_std")


def write_metrology_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METROLOGY_COLUMNS)
        for row in rows:
            writer.writerow([repr(float(row[c])) if row[c] is not None else "nan"
                             for c in METROLOGY_COLUMNS])
