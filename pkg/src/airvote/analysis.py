"""Closed-form performance bounds and the Monte Carlo oracles that check them.

The bound evaluators are plain formulas.  Each Monte Carlo routine drives
the production encode/superpose/detect pipeline (or a direct simulation of
mini-batch gradient noise) so that every formula is tested against an
independent path, never against itself.

Notation used throughout: `snr` is the ratio of per-vote received energy
scale to noise variance (symbol_energy * mean transmit power / noise_var);
`grad_snr` is sqrt(batch_size) * |gradient| / gradient_std, the odds that a
mini batch reproduces the true gradient sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, sample_channel, superpose
from .detector import detect_votes, measure_energies
from .phy import SYMBOL_ENERGY, build_subcarrier_map, encode_signs

_SNR_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def mean_energy(active_devices: int, symbol_energy: float, mean_tx_power: float, noise_var: float) -> float:
    """Expected bin energy when `active_devices` transmitters hit the bin:
    symbol_energy * active_devices * mean_tx_power + noise_var."""
    if active_devices < 0 or symbol_energy < 0 or mean_tx_power < 0 or noise_var < 0:
        raise ValueError("mean_energy arguments must be nonnegative")
    return symbol_energy * active_devices * mean_tx_power + noise_var


def failure_prob_bound(grad_snr: float) -> float:
    """Tail bound on a single device flipping its gradient sign.

    Unimodal symmetric gradient noise admits the two-branch Gauss
    inequality: (2/9)/grad_snr^2 in the far tail, a linear bound otherwise.
    Always below 1/2 for positive grad_snr.
    """
    if grad_snr <= 0:
        raise ValueError("grad_snr must be positive")
    if grad_snr > 2.0 / math.sqrt(3.0):
        return (2.0 / 9.0) / grad_snr**2
    return 0.5 - grad_snr / (2.0 * math.sqrt(3.0))


def error_prob_bound(num_devices: int, snr: float, grad_snr: float) -> float:
    """Upper bound on the majority-vote sign being detected wrongly,
    combining per-device flip odds (via grad_snr) with channel noise."""
    if num_devices < 1:
        raise ValueError("num_devices must be >= 1")
    if snr <= 0 or grad_snr <= 0:
        raise ValueError("snr and grad_snr must be positive")
    numerator = (num_devices / 2.0) * math.sqrt(2.0) / (3.0 * grad_snr) + 1.0 / snr
    return numerator / (num_devices + 2.0 / snr)


def error_prob_intermediate_bound(num_devices: int, snr: float, flip_prob: float) -> float:
    """Tighter variant of error_prob_bound written directly in the
    per-device flip probability q: (K*q*(1-q) + 1/snr) / (K + 2/snr).

    Note this target attenuates the vote-count term by (1-q); the physical
    detector has no such attenuation (see exact_error_prob), so for q above
    roughly 0.1 the simulated error rate exceeds this expression.
    """
    if num_devices < 1:
        raise ValueError("num_devices must be >= 1")
    if snr <= 0:
        raise ValueError("snr must be positive")
    if not 0.0 < flip_prob < 0.5:
        raise ValueError("flip_prob must lie in (0, 1/2)")
    q = flip_prob
    return (num_devices * q * (1.0 - q) + 1.0 / snr) / (num_devices + 2.0 / snr)


def exact_error_prob(num_devices: int, snr: float, flip_prob: float) -> float:
    """Exact misdetection probability of the constant-power energy detector.

    Both bin energies are exponential with means linear in the vote counts
    (symbol_energy * count * power + noise_var), and for independent
    exponentials P[wrong bin wins] = mean_wrong / (mean_plus + mean_minus).
    The denominator does not depend on the vote split, so taking the
    expectation over a Binomial(K, 1-q) number of correct voters gives
    (K*q + 1/snr) / (K + 2/snr) with no approximation.
    """
    if num_devices < 1:
        raise ValueError("num_devices must be >= 1")
    if snr <= 0:
        raise ValueError("snr must be positive")
    if not 0.0 < flip_prob < 0.5:
        raise ValueError("flip_prob must lie in (0, 1/2)")
    return (num_devices * flip_prob + 1.0 / snr) / (num_devices + 2.0 / snr)


@dataclass
class BoundParams:
    """Inputs of the convergence-rate evaluator.

    `gamma` is the ratio of total rounds to batch size; when mean_tx_power
    and noise_var are both supplied, snr is cross-checked against
    symbol_energy * mean_tx_power / noise_var.
    """

    num_devices: int
    snr: float
    rounds: int
    gamma: float = 1.0
    smoothness_l1: float = 1.0   # sum of per-coordinate smoothness constants
    sigma_l1: float = 1.0        # sum of per-coordinate gradient-noise scales
    loss_gap: float = 1.0        # initial loss minus its lower bound
    symbol_energy: float = SYMBOL_ENERGY
    mean_tx_power: float | None = None
    noise_var: float | None = None
    batch_size: int | None = None

    def __post_init__(self):
        if self.num_devices < 1:
            raise ValueError("num_devices must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        for name in ("snr", "gamma", "smoothness_l1", "sigma_l1", "loss_gap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mean_tx_power is not None and self.noise_var is not None:
            implied = self.symbol_energy * self.mean_tx_power / self.noise_var
            if abs(implied - self.snr) > _SNR_TOLERANCE * abs(self.snr):
                raise ValueError(
                    f"snr={self.snr} inconsistent with symbol_energy*power/noise={implied}"
                )


def convergence_tau(num_devices: int, snr: float, gamma: float) -> float:
    """Channel penalty factor (1 + 2/(snr*K)) / sqrt(gamma); approaches
    1/sqrt(gamma) as the channel gets clean or the cohort grows."""
    if num_devices < 1 or snr <= 0 or gamma <= 0:
        raise ValueError("num_devices, snr and gamma must be positive")
    return (1.0 + 2.0 / (snr * num_devices)) / math.sqrt(gamma)


def convergence_bound(params: BoundParams, strict_derivation: bool = False) -> float:
    """Bound on the running mean L1 gradient norm after `rounds` rounds.

    strict_derivation divides the trailing gradient-noise term by
    sqrt(batch_size), the extra factor the telescoped per-round analysis
    carries before simplification; off by default.
    """
    tau = convergence_tau(params.num_devices, params.snr, params.gamma)
    trailing = (2.0 * math.sqrt(2.0) / 6.0) * math.sqrt(params.gamma) * params.sigma_l1
    if strict_derivation:
        if params.batch_size is None:
            raise ValueError("strict_derivation requires batch_size")
        trailing /= math.sqrt(params.batch_size)
    main = tau * math.sqrt(params.smoothness_l1) * (params.loss_gap + params.gamma / 2.0)
    return (main + trailing) / math.sqrt(params.rounds)


COMM_SCHEMES = ("sgd", "qsgd", "terngrad", "signsgd_mv")


def comm_cost(scheme: str, num_devices: int, model_dim: int) -> int:
    """Uplink bits per round for a cohort of num_devices training a
    model_dim-parameter model."""
    if num_devices < 1 or model_dim < 1:
        raise ValueError("num_devices and model_dim must be >= 1")
    if scheme == "sgd":
        return 64 * num_devices * model_dim
    if scheme in ("qsgd", "terngrad"):
        bits_per_coord = 2.0 + math.log2(2 * num_devices + 1)
        return math.ceil(bits_per_coord * num_devices * model_dim)
    if scheme == "signsgd_mv":
        return 2 * num_devices * model_dim
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {COMM_SCHEMES}")


# ---------------------------------------------------------------------------
# Monte Carlo oracles
# ---------------------------------------------------------------------------

_ORACLE_SUBCARRIERS = 64
_ORACLE_SYMBOLS = 32  # 1024 coordinates per frame


def _frame_batches(trials: int):
    """Split `trials` independent single-coordinate experiments into OFDM
    frames, one coordinate pair per trial."""
    per_frame = _ORACLE_SUBCARRIERS * _ORACLE_SYMBOLS // 2
    done = 0
    while done < trials:
        count = min(per_frame, trials - done)
        yield count
        done += count


def mc_mean_energy(
    active_devices: int,
    mean_tx_power: float,
    noise_var: float,
    trials: int,
    seed,
    power_spread: float = 0.0,
) -> float:
    """Empirical mean bin energy from the full encode/fade/superpose path.

    All devices vote +1, so every trial's plus-bin takes the whole cohort.
    Per-device powers are drawn uniformly from mean_tx_power +- power_spread,
    which exercises the claim that only the average power matters.  Powers
    are redrawn once per frame (roughly per thousand trials), so a nonzero
    spread adds estimator variance that does not shrink with the trial
    count; keep the spread at 0 when validating tight tolerances.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if power_spread < 0 or power_spread > mean_tx_power:
        raise ValueError("power_spread must lie in [0, mean_tx_power]")
    rng = np.random.default_rng(seed)
    cfg = ChannelConfig(noise_var=noise_var, fading="per_bin")
    total = 0.0
    for count in _frame_batches(trials):
        mapping = build_subcarrier_map(count, _ORACLE_SUBCARRIERS, _ORACLE_SYMBOLS)
        shape = (active_devices, mapping.num_symbols, mapping.num_subcarriers)
        if active_devices:
            frames = np.stack(
                [
                    encode_signs(np.ones(count, dtype=int), mapping, seed=rng)
                    for _ in range(active_devices)
                ]
            )
            powers = rng.uniform(
                mean_tx_power - power_spread, mean_tx_power + power_spread, size=active_devices
            )
        else:
            frames = np.zeros(shape, dtype=np.complex128)
            powers = np.zeros(0)
        realization = sample_channel(
            active_devices, mapping.num_symbols, mapping.num_subcarriers, cfg, seed=rng
        )
        received = superpose(frames, powers, realization, cfg, seed=rng)
        e_plus, _ = measure_energies(received, mapping)
        total += float(e_plus.sum())
    return total / trials


def mc_flip_prob(grad_mean: float, grad_std: float, batch_size: int, trials: int, seed) -> tuple[float, float]:
    """Frequency of a mini-batch mean gradient flipping the true sign,
    with its binomial standard error.

    Simulates batch_size unit draws per trial, N(grad_mean, grad_std^2),
    and counts batches whose mean disagrees in sign with grad_mean (zero
    counts as +1, matching the quantizer).
    """
    if grad_mean == 0 or grad_std <= 0 or batch_size < 1 or trials < 1:
        raise ValueError("grad_mean must be nonzero; grad_std, batch_size, trials positive")
    rng = np.random.default_rng(seed)
    true_sign = 1.0 if grad_mean > 0 else -1.0
    flips = 0
    chunk = max(1, 2_000_000 // batch_size)
    done = 0
    while done < trials:
        count = min(chunk, trials - done)
        draws = grad_mean + grad_std * rng.standard_normal((count, batch_size))
        means = draws.mean(axis=1)
        signs = np.where(means < 0, -1.0, 1.0)
        flips += int(np.sum(signs != true_sign))
        done += count
    estimate = flips / trials
    stderr = math.sqrt(max(estimate * (1.0 - estimate), 1e-12) / trials)
    return estimate, stderr


def _mc_detection_errors(num_devices: int, sign_sampler, snr: float, trials: int, seed) -> tuple[float, float]:
    """Shared core: detected vote vs. a true sign of +1, through the real
    pipeline with Rayleigh fading, fresh randomization, unit powers, and
    noise_var = symbol_energy / snr."""
    rng = np.random.default_rng(seed)
    cfg = ChannelConfig(noise_var=SYMBOL_ENERGY / snr, fading="per_bin")
    powers = np.ones(num_devices)
    errors = 0
    for count in _frame_batches(trials):
        mapping = build_subcarrier_map(count, _ORACLE_SUBCARRIERS, _ORACLE_SYMBOLS)
        signs = sign_sampler(rng, (num_devices, count))
        frames = np.stack(
            [encode_signs(signs[m], mapping, seed=rng) for m in range(num_devices)]
        )
        realization = sample_channel(
            num_devices, mapping.num_symbols, mapping.num_subcarriers, cfg, seed=rng
        )
        received = superpose(frames, powers, realization, cfg, seed=rng)
        e_plus, e_minus = measure_energies(received, mapping)
        votes = detect_votes(e_plus, e_minus)
        errors += int(np.sum(votes != 1))
    estimate = errors / trials
    stderr = math.sqrt(max(estimate * (1.0 - estimate), 1e-12) / trials)
    return estimate, stderr


def mc_error_prob(num_devices: int, flip_prob: float, snr: float, trials: int, seed) -> tuple[float, float]:
    """Monte Carlo majority-vote error rate with i.i.d. per-device sign
    flips at probability flip_prob, plus binomial standard error.

    Only the snr matters for the detection statistics (scaling signal and
    noise together never changes an energy comparison), so the simulation
    fixes unit powers and sets noise_var = symbol_energy / snr.
    """
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    if not 0.0 < flip_prob < 0.5:
        raise ValueError("flip_prob must lie in (0, 1/2)")
    if num_devices < 1 or snr <= 0:
        raise ValueError("num_devices and snr must be positive")

    def sampler(rng, shape):
        return np.where(rng.random(shape) < flip_prob, -1, 1)

    return _mc_detection_errors(num_devices, sampler, snr, trials, seed)


def mc_error_prob_gaussian(num_devices: int, grad_snr: float, snr: float, trials: int, seed) -> tuple[float, float]:
    """Like mc_error_prob, but each device's sign comes from Gaussian
    mini-batch gradient noise at the given grad_snr (flip probability
    Phi(-grad_snr))."""
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    if grad_snr <= 0 or num_devices < 1 or snr <= 0:
        raise ValueError("grad_snr, num_devices and snr must be positive")

    def sampler(rng, shape):
        return np.where(grad_snr + rng.standard_normal(shape) < 0, -1, 1)

    return _mc_detection_errors(num_devices, sampler, snr, trials, seed)


# ---------------------------------------------------------------------------
# Verification suites (shared by the CLI and the acceptance tests)
# ---------------------------------------------------------------------------

MEAN_ENERGY_GRID = {
    "active_devices": (0, 1, 2, 5, 15, 31),
    "mean_tx_power": (1.0, 1.5, 3.0),
    "noise_var": (0.1, 1.0),
}
MEAN_ENERGY_RELATIVE_TOL = 0.02

FLIP_PROB_GRID = (0.2, 0.5, 1.0, 1.155, 2.0, 5.0, 20.0)

ERROR_PROB_GRID = {
    "num_devices": (5, 15, 31),
    "snr": (0.5, 2.0, 8.0),
    "flip_prob": (0.05, 0.2, 0.4),
}


def run_mean_energy_suite(trials: int = 100_000, seed: int = 0, power_spread: float = 0.0) -> list[dict]:
    """Grid comparison of simulated vs. predicted mean bin energy."""
    rows = []
    for devices in MEAN_ENERGY_GRID["active_devices"]:
        for power in MEAN_ENERGY_GRID["mean_tx_power"]:
            for noise in MEAN_ENERGY_GRID["noise_var"]:
                predicted = mean_energy(devices, SYMBOL_ENERGY, power, noise)
                estimate = mc_mean_energy(
                    devices, power, noise, trials,
                    seed=(seed, devices, int(power * 2), int(noise * 10)),
                    power_spread=power_spread,
                )
                rel_err = abs(estimate - predicted) / predicted
                rows.append(
                    {
                        "active_devices": devices,
                        "mean_tx_power": power,
                        "noise_var": noise,
                        "predicted": predicted,
                        "estimate": estimate,
                        "rel_err": rel_err,
                        "passed": rel_err < MEAN_ENERGY_RELATIVE_TOL,
                    }
                )
    return rows


def run_flip_prob_suite(trials: int = 100_000, seed: int = 0) -> list[dict]:
    """Empirical sign-flip frequency vs. the unimodal-tail bound."""
    rows = []
    for grad_snr in FLIP_PROB_GRID:
        estimate, stderr = mc_flip_prob(grad_snr, 1.0, 1, trials, seed=(seed, int(grad_snr * 1000)))
        bound = failure_prob_bound(grad_snr)
        rows.append(
            {
                "grad_snr": grad_snr,
                "estimate": estimate,
                "stderr": stderr,
                "bound": bound,
                "passed": estimate <= bound + 3.0 * stderr,
            }
        )
    return rows


def run_error_prob_suite(trials: int = 10_000, seed: int = 0) -> list[dict]:
    """Simulated majority-vote error vs. the flip-probability comparison
    target and the always-below-one-half property.

    The `exact` column is the closed form the simulation must reproduce;
    `target` is the (1-q)-attenuated comparison expression, which the
    physical detector beats only at small q.
    """
    rows = []
    for devices in ERROR_PROB_GRID["num_devices"]:
        for snr in ERROR_PROB_GRID["snr"]:
            for q in ERROR_PROB_GRID["flip_prob"]:
                estimate, stderr = mc_error_prob(
                    devices, q, snr, trials, seed=(seed, devices, int(snr * 10), int(q * 100))
                )
                target = error_prob_intermediate_bound(devices, snr, q)
                rows.append(
                    {
                        "num_devices": devices,
                        "snr": snr,
                        "flip_prob": q,
                        "estimate": estimate,
                        "stderr": stderr,
                        "target": target,
                        "exact": exact_error_prob(devices, snr, q),
                        "below_half": estimate < 0.5,
                        "passed": estimate <= target + 3.0 * stderr,
                    }
                )
    return rows
