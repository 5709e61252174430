"""Monte Carlo experiment runner: trials, error estimation, sweeps, persistence.

Every trial's randomness is a pure function of (base_seed, trial index,
stream), so reruns of an identical configuration reproduce instance-for-
instance, decoder-for-decoder, and the emitted CSV is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from . import __version__
from .bounds import BoundReport, compute_bound_report, fano_bound_exact, kl_matrix
from .decoders import (
    DEFAULT_BUDGET,
    DecodeResult,
    EnumerationBudgetError,
    decode_exhaustive,
    decode_lasso,
    decode_omp,
)
from .ensemble import SIGN_MODES, gram_precompute, observe, sample_design, sample_signal

WILSON_Z = 1.959963984540054  # two-sided 95%

ENSEMBLES = ("generic", "restricted")
DECODER_NAMES = ("exhaustive", "omp", "lasso")

CSV_COLUMNS = [
    "experiment_id",
    "p",
    "s",
    "n",
    "sigma",
    "m2",
    "decoder",
    "ensemble",
    "trials",
    "errors",
    "aborted",
    "perr_hat",
    "ci_lo",
    "ci_hi",
    "union_bound",
    "union_regime_valid",
    "fano_exact",
    "fano_ensemble",
    "sufficient_n",
    "necessary_n",
    "base_seed",
    "mean_decode_ms",
]


class ValidationError(ValueError):
    """Configuration or flag validation failure (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    p: int
    s: int
    n_grid: tuple[int, ...]
    m2: float
    trials: int
    sigma: float = 1.0
    sign_mode: str = "all-positive"
    decoder: str = "exhaustive"
    ensemble: str = "generic"
    base_seed: int = 0
    bound_C: float = 24.0
    bound_Cprime: float = 0.25
    union_form: str = "exact-lemma2"
    out: str | None = None
    budget: int = DEFAULT_BUDGET
    preset: str | None = None
    paired_decoder: str | None = None

    def validate(self) -> None:
        if self.p < 2 or not 1 <= self.s < self.p:
            raise ValidationError(f"need 1 <= s < p with p >= 2, got p={self.p}, s={self.s}")
        if not self.n_grid:
            raise ValidationError("n grid is empty")
        if any(n < 1 for n in self.n_grid):
            raise ValidationError(f"n grid entries must be >= 1, got {self.n_grid}")
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise ValidationError(f"n grid must be strictly increasing, got {self.n_grid}")
        if self.m2 <= 0:
            raise ValidationError(f"m2 must be positive, got {self.m2}")
        if self.sigma < 0:
            raise ValidationError(f"sigma must be nonnegative, got {self.sigma}")
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if self.sign_mode not in SIGN_MODES:
            raise ValidationError(f"sign_mode must be one of {SIGN_MODES}, got {self.sign_mode!r}")
        if self.decoder not in DECODER_NAMES:
            raise ValidationError(f"decoder must be one of {DECODER_NAMES}, got {self.decoder!r}")
        if self.paired_decoder is not None and self.paired_decoder not in DECODER_NAMES:
            raise ValidationError(f"paired decoder must be one of {DECODER_NAMES}")
        if self.ensemble not in ENSEMBLES:
            raise ValidationError(f"ensemble must be one of {ENSEMBLES}, got {self.ensemble!r}")
        if self.union_form not in ("exact-lemma2", "simplified"):
            raise ValidationError(f"unknown union_form {self.union_form!r}")

    @property
    def min_magnitude(self) -> float:
        return math.sqrt(self.m2)

    @property
    def m2_noise_normalized(self) -> float:
        """M^2 in noise units; bounds are stated for unit noise variance."""
        if self.sigma > 0 and self.sigma != 1.0:
            return self.m2 / (self.sigma * self.sigma)
        return self.m2

    def decoder_list(self) -> tuple[str, ...]:
        if self.paired_decoder and self.paired_decoder != self.decoder:
            return (self.decoder, self.paired_decoder)
        return (self.decoder,)

    def experiment_id(self) -> str:
        return hashlib.sha256(canonical_text(self).encode()).hexdigest()[:12]


def canonical_text(config: ExperimentConfig) -> str:
    """Stable `key = value` rendering of every config field, for hashing."""
    lines = []
    for f in sorted(fields(ExperimentConfig), key=lambda f: f.name):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    aborted: bool
    estimate: np.ndarray | None
    true_support: np.ndarray
    decode: DecodeResult | None


@dataclass(frozen=True)
class TrialBatchResult:
    config: ExperimentConfig
    decoder: str
    n: int
    trials: int
    errors: int
    aborted: int
    perr_hat: float
    ci_lo: float
    ci_hi: float
    trial_seeds: tuple[tuple[int, int], ...]
    mean_decode_s: float
    bound_report: BoundReport


@dataclass(frozen=True)
class PhaseCurve:
    config: ExperimentConfig
    batches: tuple[TrialBatchResult, ...]

    def for_decoder(self, decoder: str) -> tuple[TrialBatchResult, ...]:
        return tuple(b for b in self.batches if b.decoder == decoder)


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval; well behaved at 0 and 1."""
    if trials <= 0:
        return 0.0, 1.0
    phat = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials))
    # clamp so the interval always contains phat despite roundoff
    return min(max(0.0, center - half), phat), max(min(1.0, center + half), phat)


def make_instance(config: ExperimentConfig, n: int, trial: int):
    """Draw (X, beta, y) for one trial from streams keyed by (base_seed, trial).

    Generic ensemble: fresh design every trial, sign_mode as configured.
    Restricted ensemble: one fixed design per batch (trial stream 0), support
    uniform per trial, every support value exactly +M.
    """
    if config.ensemble == "restricted":
        X = sample_design(n, config.p, config.base_seed, trial=0)
        beta = sample_signal(
            config.p, config.s, config.min_magnitude, "all-positive",
            seed=config.base_seed, trial=trial,
        )
    else:
        X = sample_design(n, config.p, config.base_seed, trial=trial)
        beta = sample_signal(
            config.p, config.s, config.min_magnitude, config.sign_mode,
            seed=config.base_seed, trial=trial,
        )
    y = observe(X, beta, config.sigma, seed=config.base_seed, trial=trial)
    return X, beta, y


def _decode_with(name: str, X, y, s: int, budget: int) -> DecodeResult:
    if name == "exhaustive":
        return decode_exhaustive(gram_precompute(X, y), s, budget=budget)
    if name == "omp":
        return decode_omp(gram_precompute(X, y), s)
    if name == "lasso":
        return decode_lasso(X, y, s)
    raise ValidationError(f"unknown decoder {name!r}")


# Registry so tests can inject rigged decoders.
DECODERS = {name: _decode_with for name in DECODER_NAMES}


def run_trial(
    config: ExperimentConfig, n: int, trial: int, decoder: str | None = None
) -> TrialOutcome:
    """One decode attempt; success iff the estimate equals the support exactly."""
    name = decoder or config.decoder
    X, beta, y = make_instance(config, n, trial)
    try:
        result = DECODERS[name](name, X, y, config.s, config.budget)
    except EnumerationBudgetError:
        return TrialOutcome(
            success=False, aborted=True, estimate=None,
            true_support=beta.support, decode=None,
        )
    success = bool(np.array_equal(result.estimate, beta.support))
    return TrialOutcome(
        success=success, aborted=False, estimate=result.estimate,
        true_support=beta.support, decode=result,
    )


def estimate_error(
    config: ExperimentConfig, n: int, decoder: str | None = None
) -> TrialBatchResult:
    """Run all trials at one grid point and attach the bound report."""
    name = decoder or config.decoder
    errors = 0
    aborted = 0
    total_time = 0.0
    seeds = []
    for trial in range(config.trials):
        seeds.append((config.base_seed, trial))
        outcome = run_trial(config, n, trial, decoder=name)
        if outcome.aborted:
            aborted += 1
            continue
        if not outcome.success:
            errors += 1
        total_time += outcome.decode.elapsed
    completed = config.trials - aborted
    if completed > 0:
        perr = errors / completed
        ci_lo, ci_hi = wilson_interval(errors, completed)
        mean_t = total_time / completed
    else:
        perr, ci_lo, ci_hi, mean_t = float("nan"), 0.0, 1.0, float("nan")
    fano_exact = None
    if config.ensemble == "restricted" and math.comb(config.p, config.s) <= 2000:
        X = sample_design(n, config.p, config.base_seed, trial=0)
        fano_exact = fano_bound_exact(kl_matrix(X, config.s, config.min_magnitude))
    report = compute_bound_report(
        n=n,
        p=config.p,
        s=config.s,
        m2=config.m2_noise_normalized,
        C=config.bound_C,
        Cprime=config.bound_Cprime,
        union_form=config.union_form,
        fano_exact=fano_exact,
    )
    return TrialBatchResult(
        config=config,
        decoder=name,
        n=n,
        trials=config.trials,
        errors=errors,
        aborted=aborted,
        perr_hat=perr,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        trial_seeds=tuple(seeds),
        mean_decode_s=mean_t,
        bound_report=report,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def batch_to_row(batch: TrialBatchResult, include_timing: bool = False) -> dict:
    cfg = batch.config
    rep = batch.bound_report
    mean_ms = batch.mean_decode_s * 1e3 if not math.isnan(batch.mean_decode_s) else float("nan")
    return {
        "experiment_id": cfg.experiment_id(),
        "p": cfg.p,
        "s": cfg.s,
        "n": batch.n,
        "sigma": cfg.sigma,
        "m2": cfg.m2,
        "decoder": batch.decoder,
        "ensemble": cfg.ensemble,
        "trials": batch.trials,
        "errors": batch.errors,
        "aborted": batch.aborted,
        "perr_hat": batch.perr_hat,
        "ci_lo": batch.ci_lo,
        "ci_hi": batch.ci_hi,
        "union_bound": rep.union_bound,
        "union_regime_valid": rep.union_regime_valid,
        "fano_exact": rep.fano_exact,
        "fano_ensemble": rep.fano_ensemble,
        "sufficient_n": rep.sufficient_n,
        "necessary_n": rep.necessary_n,
        "base_seed": cfg.base_seed,
        # Wall time varies run to run; it is written only on request so a
        # rerun of the same config stays byte-identical.
        "mean_decode_ms": (mean_ms if include_timing else None),
    }


def sweep(
    config: ExperimentConfig,
    out_path: str | None = None,
    include_timing: bool = False,
    progress=None,
) -> PhaseCurve:
    """Run the full n grid (per decoder when paired), flushing CSV per point.

    A failure mid-sweep appends an `# incomplete:` trailer to whatever was
    already flushed, then re-raises.
    """
    config.validate()
    path = out_path if out_path is not None else config.out
    batches: list[TrialBatchResult] = []
    handle = open(path, "w", encoding="utf-8", newline="") if path else None
    try:
        if handle:
            handle.write(",".join(CSV_COLUMNS) + "\n")
            handle.flush()
        for n in config.n_grid:
            for name in config.decoder_list():
                batch = estimate_error(config, n, decoder=name)
                batches.append(batch)
                if progress is not None:
                    progress(batch)
                if handle:
                    row = batch_to_row(batch, include_timing=include_timing)
                    handle.write(",".join(_fmt(row[c]) for c in CSV_COLUMNS) + "\n")
                    handle.flush()
    except Exception as err:
        if handle:
            try:
                handle.write(f"# incomplete: {type(err).__name__}: {err}\n")
                handle.flush()
            except OSError:
                pass
        raise
    finally:
        if handle:
            handle.close()
    return PhaseCurve(config=config, batches=tuple(batches))


def curve_to_json(curve: PhaseCurve) -> str:
    """JSON summary mirroring the CSV rows, with timing and toolkit version."""
    payload = {
        "preset": curve.config.preset,
        "version": __version__,
        "config": {
            f.name: (list(v) if isinstance(v := getattr(curve.config, f.name), tuple) else v)
            for f in fields(ExperimentConfig)
        },
        "rows": [
            {**batch_to_row(b, include_timing=True)} for b in curve.batches
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True)


PRESET_NAMES = ("sublinear-regime", "linear-regime", "lasso-gap")


def preset(name: str) -> ExperimentConfig:
    """Documented desk-scale experiment configurations.

    sublinear-regime: s = ceil(sqrt(p)) with the critical scaling m2 = 1/s.
    linear-regime: s = p/8 with m2 = (4/s) log s, so s * m2 grows with s.
    lasso-gap: linear-sparsity sizes (s = p/8) kept small enough that the
    exhaustive decoder is feasible, run paired with the Lasso on identical
    per-trial instances.

    The regime presets use OMP: at p = 256 (resp. C(64, 8) ~ 4.4e9 subsets)
    the exhaustive search is over any desk-scale enumeration budget.
    """
    if name == "sublinear-regime":
        p = 256
        s = math.isqrt(p)  # 16, and ceil(sqrt(256)) == 16
        return ExperimentConfig(
            p=p, s=s, n_grid=(64, 128, 256, 512, 1024), m2=1.0 / s,
            trials=200, sign_mode="random-sign", decoder="omp",
            base_seed=101, preset=name,
        )
    if name == "linear-regime":
        p = 64
        s = math.ceil(p / 8)
        return ExperimentConfig(
            p=p, s=s, n_grid=(16, 32, 64, 128, 256), m2=4.0 * math.log(s) / s,
            trials=200, sign_mode="random-sign", decoder="omp",
            base_seed=202, preset=name,
        )
    if name == "lasso-gap":
        p = 32
        s = math.ceil(p / 8)
        return ExperimentConfig(
            p=p, s=s, n_grid=(16, 24, 32, 48, 64), m2=4.0 * math.log(s) / s,
            trials=200, sign_mode="random-sign", decoder="exhaustive",
            paired_decoder="lasso", base_seed=303, preset=name,
        )
    raise ValidationError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")


CONFIG_KEYS = {
    "p": int,
    "s": int,
    "n": int,
    "n_grid": str,
    "sigma": float,
    "m2": float,
    "sign_mode": str,
    "decoder": str,
    "ensemble": str,
    "trials": int,
    "base_seed": int,
    "bound_C": float,
    "bound_Cprime": float,
    "union_form": str,
    "out": str,
}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the flat `key = value` config format (# starts a comment)."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValidationError(f"line {lineno}: expected `key = value`, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise ValidationError(f"line {lineno}: unknown config key {key!r}")
        if key in raw:
            raise ValidationError(f"line {lineno}: duplicate config key {key!r}")
        raw[key] = value

    def convert(key: str, caster):
        try:
            return caster(raw[key])
        except ValueError as err:
            raise ValidationError(f"config key {key!r}: {err}") from err

    for required in ("p", "s", "m2", "trials"):
        if required not in raw:
            raise ValidationError(f"missing required config key {required!r}")
    if "n" in raw and "n_grid" in raw:
        raise ValidationError("config keys `n` and `n_grid` are mutually exclusive")
    if "n" in raw:
        n_grid = (convert("n", int),)
    elif "n_grid" in raw:
        try:
            n_grid = tuple(int(v.strip()) for v in raw["n_grid"].split(",") if v.strip())
        except ValueError as err:
            raise ValidationError(f"config key 'n_grid': {err}") from err
    else:
        raise ValidationError("one of config keys `n` or `n_grid` is required")

    kwargs = dict(
        p=convert("p", int),
        s=convert("s", int),
        n_grid=n_grid,
        m2=convert("m2", float),
        trials=convert("trials", int),
    )
    for key, attr in [
        ("sigma", "sigma"), ("sign_mode", "sign_mode"), ("decoder", "decoder"),
        ("ensemble", "ensemble"), ("base_seed", "base_seed"), ("bound_C", "bound_C"),
        ("bound_Cprime", "bound_Cprime"), ("union_form", "union_form"), ("out", "out"),
    ]:
        if key in raw:
            kwargs[attr] = convert(key, CONFIG_KEYS[key])
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def with_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    updated = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    updated.validate()
    return updated
