"""Run configuration: plain ``key = value`` files plus flag overrides.

Every theorem-range precondition is checked here, so the experiment
runners receive only valid inputs and error messages always name the
violated admissibility condition rather than failing deep inside a
norm computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .reporting import config_hash

KINDS = (
    "lp-inspect",
    "validate",
    "linear-decay",
    "simulate",
    "decay-fit",
    "lyapunov",
    "damped-mode",
)

#: accepted spelling-out alias from older config files
_KIND_ALIASES = {"validate-inequalities": "validate"}

#: per-kind option defaults; parse_config fills these in and rejects
#: unknown keys so config-file typos surface immediately.
KIND_DEFAULTS: dict[str, dict] = {
    "lp-inspect": {
        "dim": 1,
        "npts": 256,
        "length": 16.0 * 3.141592653589793,
        "trials": 100,
        "radii": 10000,
        "partition_tol": 1e-12,
        "telescope_tol": 1e-10,
        "disjoint_tol": 1e-12,
    },
    "validate": {
        "dim": 1,
        "npts": 256,
        "length": 16.0 * 3.141592653589793,
        "trials": 100,
        "budget": 16.0,
    },
    "linear-decay": {
        "dim": 3,
        "sigma1": 1.5,
        "sigma": 0.0,
        "sigma_u": 0.0,
        "with_u": True,
        "amplitude": 1.0,
        "t_start": 1e2,
        "t_end": 1e4,
        "tolerance_state": 0.05,
        "tolerance_u": 0.10,
        "neg_ratio_bound": 4.0,
        "nodes_per_octave": 64,
    },
    "simulate": {
        "dim": 1,
        "npts": 1024,
        "length": 32.0 * 3.141592653589793,
        "sigma1": 0.5,
        "amplitude": 1e-3,
        "t_end": 10.0,
        "dt": 0.0,  # 0 = automatic CFL choice
        "sample_stride": 4,
        "snapshot_stride": 0,  # 0 = no snapshots beyond first/last
        "mass_tol": 1e-10,
        "checkpoint": True,
    },
    "decay-fit": {
        "dim": 1,
        "npts": 2048,
        "length": 64.0 * 3.141592653589793,
        "sigma1": 0.5,
        "sigma": 0.5,
        "amplitude": 1e-3,
        "t_start": 5.0,
        "t_end": 0.0,  # 0 = half the box
        "tolerance": 0.15,
        "sample_stride": 4,
    },
    "lyapunov": {
        "dim": 1,
        "npts": 512,
        "length": 8.0 * 3.141592653589793,
        "sigma1": 0.5,
        "amplitude": 1e-3,
        "t_end": 0.02,
        "dt": 5e-5,
        "j_lo": 0,
        "j_hi": 3,
        "eta": 0.1,
        "budget": 16.0,
    },
    "damped-mode": {
        "dim": 2,
        "sigma1": 1.0,
        "sigma": 0.0,
        "source": "linear",  # "linear" (quadrature) or "box" (trajectory)
        "amplitude": 1.0,
        "t_start": 1e2,
        "t_end": 1e4,
        "tolerance": 0.10,
        "npts": 128,
        "length": 16.0 * 3.141592653589793,
        "sample_stride": 4,
        "snapshot_stride": 8,
    },
}


@dataclass
class RunConfig:
    """One experiment: kind, options, master seed, output directory.

    ``canonical_text`` (and hence the config hash) covers everything
    that influences report contents — the output directory does not.
    """

    kind: str
    seed: int = 0
    out_dir: Path = Path("runs")
    options: dict = field(default_factory=dict)

    def opt(self, key: str):
        return self.options[key]

    def canonical_text(self) -> str:
        lines = [f"kind = {self.kind}", f"seed = {self.seed}"]
        lines += [f"{k} = {self.options[k]!r}" for k in sorted(self.options)]
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return config_hash(self.canonical_text())


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def read_config_file(path: Path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment; blanks ignored."""
    data: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        data[key.strip()] = _parse_scalar(value)
    return data


def parse_config(
    kind: str | None = None,
    path: str | Path | None = None,
    overrides: dict | None = None,
    seed: int | None = None,
    out_dir: str | Path | None = None,
) -> RunConfig:
    """Merge defaults <- config file <- explicit overrides, then validate."""
    data: dict = {}
    if path is not None:
        data.update(read_config_file(path))
    if overrides:
        data.update(overrides)

    file_kind = data.pop("kind", None)
    kind = kind or file_kind
    if kind is None:
        raise ValueError("no experiment kind given (flag or 'kind =' line)")
    kind = _KIND_ALIASES.get(str(kind), str(kind))
    if kind not in KINDS:
        raise ValueError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}")

    if seed is None:
        seed = int(data.pop("seed", 0))
    else:
        data.pop("seed", None)
    if out_dir is None:
        out_dir = data.pop("out_dir", "runs")
    else:
        data.pop("out_dir", None)

    options = dict(KIND_DEFAULTS[kind])
    unknown = sorted(set(data) - set(options))
    if unknown:
        raise ValueError(
            f"unknown option(s) for {kind}: {', '.join(unknown)}; "
            f"valid keys: {', '.join(sorted(options))}"
        )
    for key, value in data.items():
        # overrides may arrive as raw strings (--set flags, config files)
        options[key] = _parse_scalar(value) if isinstance(value, str) else value

    cfg = RunConfig(kind=kind, seed=int(seed), out_dir=Path(out_dir), options=options)
    validate_config(cfg)
    return cfg


# ----------------------------------------------------------------------
# theorem-range validation
# ----------------------------------------------------------------------
def _check_sigma1(sigma1: float, dim: int) -> None:
    half = dim / 2.0
    if not (-half < sigma1 <= half):
        raise ValueError(
            f"sigma1 = {sigma1} violates sigma1 in (-d/2, d/2] "
            f"= ({-half}, {half}] for d = {dim}"
        )


def _check_sigma_state(sigma: float, sigma1: float, dim: int) -> None:
    hi = dim / 2.0
    if not (-sigma1 < sigma <= hi):
        raise ValueError(
            f"sigma = {sigma} violates sigma in (-sigma1, d/2] "
            f"= ({-sigma1}, {hi}] for the state norms"
        )


def _check_sigma_u(sigma: float, sigma1: float, dim: int) -> None:
    if dim < 2:
        raise ValueError(
            "velocity-enhancement fits require d >= 2 "
            "(the d = 1 velocity rate is outside the proven range)"
        )
    if not (-dim / 2.0 + 1.0 < sigma1 <= dim / 2.0):
        raise ValueError(
            f"sigma1 = {sigma1} violates sigma1 in (-d/2+1, d/2] "
            f"= ({-dim / 2.0 + 1.0}, {dim / 2.0}] required for velocity enhancement"
        )
    hi = dim / 2.0 - 1.0
    if not (-sigma1 < sigma <= hi):
        raise ValueError(
            f"sigma = {sigma} violates sigma in (-sigma1, d/2 - 1] "
            f"= ({-sigma1}, {hi}] for the velocity norms"
        )


def check_weight_exponent(m_exp: float, sigma1: float, dim: int) -> None:
    m_min = 1.0 + (dim / 2.0 + sigma1) / 2.0
    if m_exp <= m_min:
        raise ValueError(
            f"M = {m_exp} violates M > 1 + (d/2 + sigma1)/2 = {m_min}"
        )


def _positive(cfg: RunConfig, *keys: str) -> None:
    for key in keys:
        if key in cfg.options and not cfg.options[key] > 0:
            raise ValueError(f"{key} must be positive, got {cfg.options[key]}")


def validate_config(cfg: RunConfig) -> None:
    opts = cfg.options
    dim = int(opts.get("dim", 1))
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if "npts" in opts:
        n = int(opts["npts"])
        if n < 8 or n & (n - 1):
            raise ValueError(f"npts must be a power of two >= 8, got {n}")
    _positive(cfg, "length", "trials", "budget", "radii", "nodes_per_octave")
    if "amplitude" in opts and opts["amplitude"] < 0:
        raise ValueError("amplitude must be nonnegative")
    if "eta" in opts and not (0.0 < opts["eta"] < 1.0):
        raise ValueError(f"eta must lie in (0, 1), got {opts['eta']}")
    if "t_start" in opts and "t_end" in opts and opts["t_end"] > 0:
        if not (0 <= opts["t_start"] < opts["t_end"]):
            raise ValueError(
                f"need 0 <= t_start < t_end, got ({opts['t_start']}, {opts['t_end']})"
            )

    if "sigma1" in opts:
        _check_sigma1(float(opts["sigma1"]), dim)
    if cfg.kind in ("linear-decay", "decay-fit"):
        _check_sigma_state(float(opts["sigma"]), float(opts["sigma1"]), dim)
    if cfg.kind == "linear-decay" and opts.get("with_u"):
        _check_sigma_u(float(opts["sigma_u"]), float(opts["sigma1"]), dim)
    if cfg.kind == "damped-mode":
        # only the state-range condition is a hard error here: runs outside
        # the velocity-enhancement range are allowed but labeled
        # out-of-theorem in the report (failures only under --strict)
        _check_sigma_state(float(opts["sigma"]), float(opts["sigma1"]), dim)
        if opts["source"] not in ("linear", "box"):
            raise ValueError("source must be 'linear' or 'box'")
    if "m_exp" in opts:
        check_weight_exponent(float(opts["m_exp"]), float(opts["sigma1"]), dim)
    if cfg.kind == "lyapunov" and opts["j_lo"] > opts["j_hi"]:
        raise ValueError("j_lo must not exceed j_hi")
