"""``obversim``: reproducible experiment runner writing CSV and JSON artefacts.

Configuration comes from a flat ``key = value`` file (``--config``) and/or
command-line flags; flags win.  Exit codes: 0 success, 1 invalid
configuration, 2 runtime failure, 3 a check reported failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .density import (
    CASE1B_AXIS,
    CASE1B_BETA,
    PathologicalDensityError,
    SphereDensity,
    from_descriptor,
    minimum_on_grid,
    normalization_integral,
    supremum_estimate,
)
from .dissipation import ZeroProbabilityOriginError, mean_curve, mean_omega
from .fluctuation import (
    esft_fit,
    omega_histogram,
    omega_histogram_quadrature,
    symmetry_plane_search,
    table_matrix,
)
from .geometry import InvalidAxisError, rotation_from_axis_angle
from .quadrature import Resolution

log = logging.getLogger("obversim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3
NORMALIZATION_TOLERANCE = 1e-9
CASES = ("uniform", "1a", "1b", "2a", "2b", "3", "custom")
MODES = ("sampling", "quadrature")


class ConfigError(ValueError):
    """Invalid or unknown configuration key; the message names the key."""


def _floats(text, key, count=None):
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = [p for p in str(text).replace(" ", "").split(",") if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise ConfigError(f"{key}: expected {count} numbers, got {len(vals)}")
    return tuple(vals)


def _float(text, key):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _int(text, key):
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if not val.is_integer():
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(val)


def _t_grid(text, key):
    if text is None or text == "":
        return None
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected start:stop:steps, got {text!r}")
    start, stop = _float(parts[0], key), _float(parts[1], key)
    steps = _int(parts[2], key)
    if steps < 1:
        raise ConfigError(f"{key}: steps must be >= 1")
    return (start, stop, steps)


def _harmonics(text, key):
    if text is None or text == "":
        return None
    if isinstance(text, (list, tuple)):
        items = [list(h) for h in text]
    else:
        items = [h.split(":") for h in str(text).replace(" ", "").split(";") if h]
    out = []
    for h in items:
        if len(h) != 3:
            raise ConfigError(f"{key}: each harmonic is k:a_k:b_k, got {h!r}")
        out.append((_int(h[0], key), _float(h[1], key), _float(h[2], key)))
    return tuple(out)


def _optional_float(text, key):
    return None if text is None or text == "" else _float(text, key)


def _choice(options):
    def parse(text, key):
        val = str(text).lower()
        if key == "case":
            val = val.removeprefix("case")
        if val not in options:
            raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {text!r}")
        return val

    return parse


_PARSERS = {
    "case": _choice(CASES),
    "axis": lambda t, k: _floats(t, k, 3),
    "angle": _float,
    "t_grid": _t_grid,
    "n": _int,
    "seed": _int,
    "bin_width": _float,
    "n_theta": _int,
    "n_phi": _int,
    "out": lambda t, k: str(t),
    "u": lambda t, k: _floats(t, k, 3),
    "beta": _float,
    "polar_exponent": _int,
    "harmonics": _harmonics,
    "normalization": _optional_float,
    "mode": _choice(MODES),
}


@dataclass(frozen=True)
class ExperimentConfig:
    case: str = "1a"
    axis: tuple = (1.0, 0.0, 0.0)
    angle: float = 2.0 * math.pi / 3.0
    t_grid: tuple | None = None
    n: int = 10_000_000
    seed: int = 42
    bin_width: float = 0.05
    n_theta: int = 64
    n_phi: int = 128
    out: str = "obversim-out"
    u: tuple = CASE1B_AXIS
    beta: float = CASE1B_BETA
    polar_exponent: int = 1
    harmonics: tuple | None = None
    normalization: float | None = None
    mode: str = "sampling"

    def __post_init__(self):
        if self.n < 0:
            raise ConfigError("n: must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be a 64-bit unsigned integer")
        if not self.bin_width > 0:
            raise ConfigError("bin_width: must be > 0")
        if self.n_theta < 2 or self.n_phi < 2:
            raise ConfigError("n_theta/n_phi: must be >= 2")
        for key in ("axis", "u"):
            v = getattr(self, key)
            if not all(map(math.isfinite, v)) or math.hypot(*v) == 0.0:
                raise ConfigError(f"{key}: must be a non-zero finite 3-vector")
        if self.case == "custom" and not self.harmonics:
            raise ConfigError("harmonics: required for case=custom")
        if self.polar_exponent < 0:
            raise ConfigError("polar_exponent: must be >= 0")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        kwargs = {}
        for key, raw in mapping.items():
            key = key.replace("-", "_")
            if key not in _PARSERS:
                raise ConfigError(f"{key}: unknown configuration key")
            kwargs[key] = _PARSERS[key](raw, key)
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = [list(x) if isinstance(x, tuple) else x for x in v]
        return out

    @property
    def unit_axis(self) -> np.ndarray:
        v = np.asarray(self.axis, dtype=float)
        return v / np.linalg.norm(v)

    @property
    def resolution(self) -> Resolution:
        return Resolution(self.n_theta, self.n_phi)

    def density(self) -> SphereDensity:
        desc = {"kind": self.case}
        if self.case == "1b":
            u = np.asarray(self.u, dtype=float)
            desc.update(u=u / np.linalg.norm(u), beta=self.beta)
        elif self.case == "custom":
            desc.update(
                polar_exponent=self.polar_exponent,
                harmonics=self.harmonics,
                normalization=self.normalization,
            )
        try:
            return from_descriptor(desc)
        except ValueError as exc:
            raise ConfigError(f"case: {exc}") from None

    def times(self) -> np.ndarray:
        start, stop, steps = self.t_grid or (-2.0 * math.pi, 2.0 * math.pi, 51)
        return np.linspace(start, stop, steps)


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config: line {lineno} is not key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(x)


class Run:
    """Collects output files for one invocation and writes the manifest."""

    def __init__(self, subcommand: str, config: ExperimentConfig):
        self.subcommand = subcommand
        self.config = config
        self.outdir = Path(config.out)
        self.outputs: list[Path] = []
        self.started = time.time()
        self.outdir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.outdir / name
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
        self.outputs.append(path)
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.outdir / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n",
                        encoding="utf-8")
        self.outputs.append(path)
        return path

    def manifest(self, status: int) -> Path:
        files = [
            {"path": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
            for p in self.outputs
        ]
        payload = {
            "tool": "obversim",
            "version": __version__,
            "kernel_backend": kernels.BACKEND,
            "subcommand": self.subcommand,
            "config": self.config.to_mapping(),
            "exit_status": status,
            "started_unix": self.started,
            "duration_s": time.time() - self.started,
            "outputs": files,
        }
        path = self.outdir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _rotation(cfg: ExperimentConfig):
    return rotation_from_axis_angle(cfg.unit_axis, cfg.angle)


def cmd_check_density(run: Run) -> int:
    cfg = run.config
    d = cfg.density()
    norm = normalization_integral(d, cfg.resolution)
    fmin = minimum_on_grid(d)
    ok = abs(norm - 1.0) <= NORMALIZATION_TOLERANCE and fmin >= 0.0
    run.json(
        "density_check.json",
        {
            "density": d.descriptor(),
            "normalization_integral": norm,
            "normalization_error": norm - 1.0,
            "tolerance": NORMALIZATION_TOLERANCE,
            "minimum_on_grid": fmin,
            "supremum_estimate": supremum_estimate(d),
            "ok": ok,
        },
    )
    return EXIT_OK if ok else EXIT_CHECK


def _histogram(cfg: ExperimentConfig):
    d = cfg.density()
    rot = _rotation(cfg)
    if cfg.mode == "quadrature":
        return omega_histogram_quadrature(d, rot, cfg.bin_width, n=max(cfg.n, 1))
    if cfg.n < 1:
        raise ConfigError("n: must be >= 1 for sampling")
    return omega_histogram(d, rot, cfg.n, cfg.seed, cfg.bin_width)


def cmd_omega_hist(run: Run) -> int:
    h = _histogram(run.config)
    run.csv(
        "omega_hist.csv",
        ["bin_center", "count", "probability_density"],
        zip(h.centers, h.counts, h.probability_density),
    )
    if h.excluded:
        log.info("%d of %d omegas were +inf and are not binned", h.excluded, h.total)
    return EXIT_OK


def cmd_esft(run: Run) -> int:
    cfg = run.config
    h = _histogram(cfg)
    rep = esft_fit(h)
    payload = rep.to_dict()
    payload.update(
        density=cfg.density().descriptor(),
        axis=[float(x) for x in cfg.unit_axis],
        angle=cfg.angle,
        n=h.total,
        excluded=h.excluded,
        omega_mean=h.mean,
        omega_standard_error=h.standard_error if math.isfinite(h.standard_error) else None,
        mode=cfg.mode,
    )
    run.json("esft_report.json", payload)
    run.csv("log_ratio.csv", ["omega", "log_ratio", "weight"], zip(rep.omega, rep.log_ratio, rep.weight))
    return EXIT_OK


def cmd_mean_curve(run: Run) -> int:
    cfg = run.config
    curve = mean_curve(cfg.density(), cfg.unit_axis, cfg.times(), cfg.resolution)
    run.csv("mean_curve.csv", ["t", "mean_omega", "ifr_value"], zip(curve.times, curve.means, curve.ifr))
    return EXIT_OK


def cmd_asymmetry(run: Run) -> int:
    cfg = run.config
    d = cfg.density()
    rows = []
    for t in cfg.times():
        fwd = mean_omega(d, rotation_from_axis_angle(cfg.unit_axis, t), cfg.resolution)
        bwd = mean_omega(d, rotation_from_axis_angle(cfg.unit_axis, -t), cfg.resolution)
        rows.append((t, fwd, bwd, fwd - bwd))
    run.csv("asymmetry.csv", ["t", "forward_mean", "backward_mean", "difference"], rows)
    return EXIT_OK


def cmd_table2(run: Run) -> int:
    cfg = run.config
    if cfg.n < 1:
        raise ConfigError("n: must be >= 1")
    entries = table_matrix(cfg.angle, cfg.n, cfg.seed, cfg.bin_width, mode=cfg.mode)
    header = ["case", "axis", "predicted", "empirical", "slope", "intercept", "r_squared",
              "n_pairs", "agree"]
    run.csv(
        "table2.csv",
        header,
        (
            (e.case, e.axis, "yes" if e.predicted else "no", e.empirical, e.slope, e.intercept,
             e.r_squared, e.n_pairs, e.agree)
            for e in entries
        ),
    )
    return EXIT_OK if all(e.agree for e in entries) else EXIT_CHECK


def cmd_symmetry(run: Run) -> int:
    cfg = run.config
    verdict = symmetry_plane_search(cfg.density(), cfg.unit_axis)
    payload = verdict.to_dict()
    payload["density"] = cfg.density().descriptor()
    run.json("symmetry.json", payload)
    return EXIT_OK


COMMANDS = {
    "check-density": cmd_check_density,
    "omega-hist": cmd_omega_hist,
    "esft": cmd_esft,
    "mean-curve": cmd_mean_curve,
    "asymmetry": cmd_asymmetry,
    "table2": cmd_table2,
    "symmetry": cmd_symmetry,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="obversim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"obversim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("-v", "--verbose", action="store_true")
        for key in _PARSERS:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    mapping = read_config_file(args.config) if args.config else {}
    for key in _PARSERS:
        val = getattr(args, key)
        if val is not None:
            mapping[key] = val
    return ExperimentConfig.from_mapping(mapping)


def _join_values(argv: list[str]) -> list[str]:
    """Attach values to their flags so ``--t-grid -6.28:6.28:101`` is not read as an option."""
    flags = {"--" + key.replace("_", "-") for key in _PARSERS} | {"--config"}
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in flags and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_join_values(argv))
    except ConfigError as exc:
        print(f"obversim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        cfg.density()
        run = Run(args.command, cfg)
        status = COMMANDS[args.command](run)
    except (ConfigError, InvalidAxisError) as exc:
        print(f"obversim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PathologicalDensityError, ZeroProbabilityOriginError, OSError, RuntimeError) as exc:
        print(f"obversim: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    run.manifest(status)
    return status


if __name__ == "__main__":
    sys.exit(main())
