"""Experiment harness: configuration, seed plumbing, runs, and result files.

Protocol for every run:

* One sample stream of horizon+1 samples is generated per seed and shared by
  every estimator in the comparison, so differences between curves are purely
  algorithmic.
* Under the ``experiment`` preset the squared-norm bound R is calibrated on
  the first floor(2 ln T) samples of the stream. The buffered and plain SGD
  estimators then skip the entire first buffer (the calibration data never
  touches their updates); recursive least squares consumes the first buffer
  too, since reusing the calibration samples does not bias it.
* All estimators are evaluated at the ends of the global buffers 2, 3, ...,
  giving every curve the identical evaluation grid of floor((T-S)/S) points
  (S = buffer stride).

Determinism: the run seed expands through ``np.random.SeedSequence(seed)``
into independent system / stream / schedule generators, so a config maps to
byte-identical CSV output on every execution. The CSV schema is fixed:

    estimator,seed,buffer_index,samples_seen,param_err,pred_excess,burn_in

with floats written in shortest round-trip form, and a JSON manifest (config
echo, per-run wall clock, package version) is written next to the CSV.
"""

import dataclasses
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from . import __version__, estimators, linalg, metrics, model
from .errors import ConfigError

CSV_HEADER = "estimator,seed,buffer_index,samples_seen,param_err,pred_excess,burn_in"

SYSTEM_KINDS = ("rand_bimod", "scaled_identity")
GAMMA_RULES = ("1/2R", "1/8RB")
NORM_RULES = ("squared", "norms")
PRESETS = ("experiment", "theory")

DEFAULT_ESTIMATORS = ("sgd_rer", "sgd", "sgd_er", "ols")
DEFAULT_SEEDS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment byte-for-byte.

    ``system`` is 'rand_bimod', 'scaled_identity', or a path to a whitespace-
    separated d x d matrix file. ``norm_rule`` is 'squared' (sum of squared
    prefix norms), 'norms' (sum of plain norms), or a positive number used as
    an explicit bound. ``buffer_size``/``gap``/``burn_in`` override the preset
    when set.
    """

    d: int = 5
    rho: float = 0.9
    sigma: float = 1.0
    system: str = "rand_bimod"
    horizon: int = 1_000_000
    preset: str = "experiment"
    buffer_size: int | None = None
    gap: int | None = None
    burn_in: int | None = None
    gamma_rule: str = "1/2R"
    norm_rule: str = "squared"
    alpha: float = 22.0
    estimators: tuple = DEFAULT_ESTIMATORS
    seeds: tuple = DEFAULT_SEEDS
    out: str = "results.csv"
    start: str = "zero"

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.rho <= 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.horizon < 2:
            raise ConfigError(f"T must be >= 2, got {self.horizon}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; expected {PRESETS}")
        if self.gamma_rule not in GAMMA_RULES:
            raise ConfigError(
                f"unknown gamma rule {self.gamma_rule!r}; expected {GAMMA_RULES}"
            )
        if self.norm_rule not in NORM_RULES and _as_positive_float(self.norm_rule) is None:
            raise ConfigError(
                f"norm rule must be one of {NORM_RULES} or a positive number, "
                f"got {self.norm_rule!r}"
            )
        if not self.estimators:
            raise ConfigError("estimator list must not be empty")
        for name in self.estimators:
            if name not in estimators.ESTIMATOR_KINDS:
                raise ConfigError(
                    f"unknown estimator {name!r}; expected any of "
                    f"{estimators.ESTIMATOR_KINDS}"
                )
        if len(set(self.estimators)) != len(self.estimators):
            raise ConfigError("estimator list has duplicates")
        if not self.seeds:
            raise ConfigError("seeds list must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds list has duplicates")
        if self.start not in model.START_MODES:
            raise ConfigError(
                f"unknown start mode {self.start!r}; expected {model.START_MODES}"
            )
        if self.preset == "theory":
            gap = self.gap
            if self.buffer_size is not None:
                if gap is None:
                    raise ConfigError("theory preset: setting B requires setting u")
                if self.buffer_size != 10 * gap:
                    raise ConfigError(
                        "theory preset requires B = 10 * u, got "
                        f"B={self.buffer_size}, u={gap}"
                    )
            if not 0 < self.rho < 1:
                raise ConfigError(
                    f"theory preset requires 0 < rho < 1, got {self.rho}"
                )


def _as_positive_float(text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        return None
    return value if value > 0 and math.isfinite(value) else None


# Maps external (config-file / CLI) keys to ExperimentConfig fields.
_CONFIG_KEYS = {
    "d": ("d", int),
    "rho": ("rho", float),
    "sigma": ("sigma", float),
    "T": ("horizon", int),
    "B": ("buffer_size", int),
    "u": ("gap", int),
    "a": ("burn_in", int),
    "preset": ("preset", str),
    "gamma-rule": ("gamma_rule", str),
    "R-rule": ("norm_rule", str),
    "alpha": ("alpha", float),
    "estimators": ("estimators", lambda s: tuple(p.strip() for p in str(s).split(",") if p.strip())),
    "seeds": ("seeds", lambda s: tuple(int(p) for p in str(s).split(",") if p.strip())),
    "out": ("out", str),
    "start": ("start", str),
    "system": ("system", str),
}


def parse_config(config_path=None, overrides=None):
    """Build an ExperimentConfig from defaults, an optional flat config file,
    and CLI-style overrides (highest precedence).

    The file format is one ``key = value`` pair per line, ``#`` comments,
    keys named exactly like the CLI flags. Unknown keys raise ConfigError.
    """
    values = {}
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(
                        f"{config_path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}"
                    )
                key, _, val = line.partition("=")
                values[key.strip()] = val.strip()
    if overrides:
        for key, val in overrides.items():
            if val is not None:
                values[key] = val
    fields = {}
    for key, val in values.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(
                f"unknown config key {key!r}; known keys: {', '.join(sorted(_CONFIG_KEYS))}"
            )
        name, convert = _CONFIG_KEYS[key]
        try:
            fields[name] = convert(val) if isinstance(val, str) else val
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: cannot parse {val!r} ({exc})") from exc
    return ExperimentConfig(**fields)


def derive_rngs(seed):
    """Expand one run seed into (system, stream, schedule) generators.

    Uses SeedSequence spawning, so the three streams are independent and the
    mapping seed -> streams is fixed across platforms and runs.
    """
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(child) for child in children)


def build_system(cfg, system_rng):
    """Construct the ground-truth system for one run."""
    if cfg.system == "rand_bimod":
        a = model.rand_bimod(cfg.d, cfg.rho, system_rng)
    elif cfg.system == "scaled_identity":
        a = cfg.rho * np.eye(cfg.d)
    else:
        a = np.loadtxt(cfg.system, dtype=np.float64, ndmin=2)
        if a.shape != (cfg.d, cfg.d):
            raise ConfigError(
                f"matrix file {cfg.system} has shape {a.shape}, expected ({cfg.d}, {cfg.d})"
            )
    return model.make_system(a, cfg.sigma * np.eye(cfg.d))


def _experiment_hyperparams(cfg, samples):
    b = 100 if cfg.buffer_size is None else cfg.buffer_size
    u = 10 if cfg.gap is None else cfg.gap
    stride = b + u
    explicit = _as_positive_float(cfg.norm_rule)
    if explicit is not None:
        bound = explicit
    else:
        prefix_len = math.floor(2 * math.log(cfg.horizon))
        if prefix_len < 1:
            raise ConfigError(f"T={cfg.horizon} leaves no calibration prefix")
        if prefix_len > stride:
            raise ConfigError(
                f"calibration prefix ({prefix_len} samples) exceeds one buffer "
                f"(stride {stride}); raise B+u or T"
            )
        bound = model.estimate_norm_bound(
            samples[:prefix_len], squared=(cfg.norm_rule == "squared")
        )
    if cfg.gamma_rule == "1/2R":
        step = 1.0 / (2.0 * bound)
    else:
        step = 1.0 / (8.0 * bound * b)
    burn = math.floor(math.log(cfg.horizon)) if cfg.burn_in is None else cfg.burn_in
    return model.HyperParams(
        horizon=cfg.horizon,
        buffer_size=b,
        gap=u,
        step_size=step,
        norm_bound=bound,
        burn_in=burn,
        gap_exponent=cfg.alpha,
    )


def _theory_hyperparams(cfg, system):
    hp = model.pick_hyperparams(
        cfg.horizon,
        cfg.d,
        spectral_bound=max(system.transition_norm, cfg.rho),
        noise_trace=cfg.sigma * cfg.d,
        alpha=cfg.alpha,
        preset="theory",
    )
    if cfg.gap is not None:
        # An explicit gap keeps the theory shape B = 10u and the step rule
        # 1/(8RB), both re-derived for the new buffer size.
        b = 10 * cfg.gap
        n_buffers = cfg.horizon // (b + cfg.gap)
        if n_buffers < 1:
            raise ConfigError(
                f"T={cfg.horizon} holds no full buffer of stride {b + cfg.gap}"
            )
        hp = model.HyperParams(
            horizon=cfg.horizon,
            buffer_size=b,
            gap=cfg.gap,
            step_size=1.0 / (8.0 * hp.norm_bound * b),
            norm_bound=hp.norm_bound,
            burn_in=n_buffers // 2,
            gap_exponent=cfg.alpha,
        )
    if cfg.burn_in is not None:
        hp = dataclasses.replace(hp, burn_in=cfg.burn_in)
    return hp


@dataclass(frozen=True)
class RunStat:
    estimator: str
    seed: int
    wall_clock_s: float


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    curves: tuple
    run_stats: tuple


def run_experiment(cfg):
    """Execute every (estimator, seed) run of the config; no file output.

    Runs are executed seed-major so each stream is simulated once, but curves
    are returned sorted by (config estimator order, seed); the canonical
    result order used for CSV rows.
    """
    curves = {}
    stats = {}
    for seed in cfg.seeds:
        system_rng, stream_rng, schedule_rng = derive_rngs(seed)
        system = build_system(cfg, system_rng)
        samples = model.simulate(system, cfg.horizon + 1, start=cfg.start, rng=stream_rng)
        if cfg.preset == "experiment":
            hp = _experiment_hyperparams(cfg, samples)
        else:
            hp = _theory_hyperparams(cfg, system)
        gram = linalg.solve_lyapunov(system.transition, system.noise_cov)
        evaluator = metrics.SnapshotEvaluator(system.transition, gram)
        support = None
        if "sparse_rer" in cfg.estimators:
            support = estimators.SupportPattern.from_matrix(system.transition)
        for kind in cfg.estimators:
            started = time.perf_counter()
            if kind == "ols":
                curve = estimators.run_estimator(
                    kind, samples, system, hp,
                    evaluator=evaluator, seed=seed, skip_records=1,
                )
            else:
                curve = estimators.run_estimator(
                    kind, samples[hp.stride :], system, hp,
                    evaluator=evaluator, seed=seed,
                    rng=schedule_rng if kind == "sgd_er" else None,
                    support=support, index_offset=1,
                )
            curves[(kind, seed)] = curve
            stats[(kind, seed)] = time.perf_counter() - started
    ordered = [
        (kind, seed) for kind in cfg.estimators for seed in cfg.seeds
    ]
    return ExperimentResult(
        config=cfg,
        curves=tuple(curves[key] for key in ordered),
        run_stats=tuple(
            RunStat(estimator=k, seed=s, wall_clock_s=stats[(k, s)]) for k, s in ordered
        ),
    )


def write_csv(path, curves):
    """Write curves in the fixed schema; floats in shortest round-trip form."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for curve in curves:
            for rec in curve.records:
                fh.write(
                    f"{curve.estimator},{curve.seed},{rec.buffer_index},"
                    f"{rec.samples_seen},{rec.param_err!r},{rec.pred_excess!r},"
                    f"{'true' if rec.burn_in else 'false'}\n"
                )


def write_manifest(path, result):
    payload = {
        "package_version": __version__,
        "config": dataclasses.asdict(result.config),
        "runs": [dataclasses.asdict(stat) for stat in result.run_stats],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_results(result, out_path=None):
    """Write the CSV and its manifest sidecar; returns (csv_path, manifest_path)."""
    out = result.config.out if out_path is None else out_path
    manifest = out + ".manifest.json"
    write_csv(out, result.curves)
    write_manifest(manifest, result)
    return out, manifest


def load_results(path):
    """Read a results CSV back into ErrorCurves (grouped by estimator, seed).

    Raises ConfigError on a malformed file: wrong header, wrong field count,
    or unparseable values.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(
            f"{path}: bad or missing header; expected {CSV_HEADER!r}"
        )
    groups = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise ConfigError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        try:
            key = (parts[0], int(parts[1]))
            if parts[6] not in ("true", "false"):
                raise ValueError(f"bad burn_in flag {parts[6]!r}")
            record = metrics.ErrorRecord(
                buffer_index=int(parts[2]),
                samples_seen=int(parts[3]),
                param_err=float(parts[4]),
                pred_excess=float(parts[5]),
                burn_in=parts[6] == "true",
            )
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        groups.setdefault(key, []).append(record)
    return [
        metrics.ErrorCurve(estimator=kind, seed=seed, records=tuple(records))
        for (kind, seed), records in groups.items()
    ]
