"""Experiment configuration: INI parsing, validation, and defaults."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .aperture import ApertureGeometry, OpticalContext
from .codes import Pattern
from .metrics import SWEEP_KINDS, SweepConfig


class ConfigError(ValueError):
    """Invalid or missing configuration; messages carry [section] key context."""


_VALID_KEYS = {
    "aperture": ("pattern_order", "bit_size_zero_um", "bit_size_one_um", "thickness_um"),
    "optics": ("mu_per_um", "energy_kev", "mu_table", "incidence_angle_deg"),
    "signal": ("width_um", "template"),
    "scan": ("grid_step_um", "scan_bits", "noise_levels", "seed", "oversample",
             "normalization"),
    "sweep": ("kind", "bsr", "bsr_values", "scan_bits_values", "aspect_values",
              "angles_deg", "energies_kev", "replicates", "position_stride"),
    "criteria": ("epsilon", "position_margin_bits"),
    "recover": ("max_rounds", "nnls_tol"),
    "output": ("csv", "svg_prefix"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment parameters (file values merged over defaults)."""

    pattern_order: int = 8
    bit_size_zero_um: float = 10.0
    bit_size_one_um: float = 10.0
    thickness_um: float = 10.0
    mu_per_um: float | None = None
    energy_kev: float = 10.0
    mu_table: tuple = ()
    incidence_angle_deg: float = 0.0
    signal_width_um: float = 10.0
    template: str = "gaussian"
    grid_step_um: float = 1.0
    scan_bits: float = 8.0
    noise_levels: tuple = (10.0, 100.0)
    seed: int = 0
    oversample: int = 16
    normalization: str = "corrected"
    sweep_kind: str = "bsr"
    bsr: float = 1.0
    bsr_values: tuple = (0.25, 0.5, 1.0, 2.0)
    scan_bits_values: tuple = (2.0, 4.0, 8.0, 16.0, 24.0)
    aspect_values: tuple = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
    angles_deg: tuple = (0.0, 10.0, 20.0, 40.0)
    energies_kev: tuple = (5.0, 10.0, 20.0, 30.0)
    replicates: int = 30
    position_stride: int = 1
    epsilon: float = 0.02
    position_margin_bits: float = 1.0
    max_rounds: int = 3
    nnls_tol: float = 1e-10
    out_csv: str | None = None
    svg_prefix: str | None = None

    def sweep_config(self, *, noiseless: bool = False, seed: int | None = None,
                     replicates: int | None = None) -> SweepConfig:
        """Build the harness configuration, applying command-line overrides."""
        return SweepConfig(
            kind=self.sweep_kind,
            pattern_order=self.pattern_order,
            signal_width_um=self.signal_width_um,
            grid_step_um=self.grid_step_um,
            template=self.template,
            scan_bits=self.scan_bits,
            bsr=self.bsr,
            thickness_um=self.thickness_um,
            incidence_angle_deg=self.incidence_angle_deg,
            energy_kev=self.energy_kev,
            mu_per_um=self.mu_per_um,
            mu_table=self.mu_table,
            noise_levels=self.noise_levels,
            noiseless=noiseless,
            normalization=self.normalization,
            replicates=self.replicates if replicates is None else replicates,
            position_stride=self.position_stride,
            seed=self.seed if seed is None else seed,
            oversample=self.oversample,
            max_rounds=self.max_rounds,
            nnls_tol=self.nnls_tol,
            epsilon=self.epsilon,
            position_margin_bits=self.position_margin_bits,
            bsr_values=self.bsr_values,
            scan_bits_values=self.scan_bits_values,
            aspect_values=self.aspect_values,
            angles_deg=self.angles_deg,
            energies_kev=self.energies_kev,
        )

    def geometry(self, pattern: Pattern) -> ApertureGeometry:
        return ApertureGeometry(
            self.bit_size_zero_um, self.bit_size_one_um, self.thickness_um, pattern
        )

    def optics(self) -> OpticalContext:
        mu = self.mu_per_um
        if mu is None:
            table = dict(self.mu_table)
            if self.energy_kev not in table:
                raise ConfigError(
                    f"[optics] energy_kev: no attenuation entry for {self.energy_kev:g} keV"
                )
            mu = table[self.energy_kev]
        return OpticalContext(mu, self.incidence_angle_deg, self.energy_kev)

    def echo_items(self):
        """Resolved (key, value) pairs, one per field, for output headers."""
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                if value and isinstance(value[0], tuple):
                    value = "; ".join(f"{e:g}={m:g}" for e, m in value)
                else:
                    value = ", ".join(f"{v:g}" for v in value)
            yield f.name, str(value)


def default_mu_table_path() -> Path:
    return Path(str(resources.files("codedscan").joinpath("data/au_mu_table.cfg")))


def load_mu_table(path) -> tuple:
    """Read an energy -> attenuation table: [attenuation] section, keV = 1/um."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"attenuation table not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as exc:
        raise ConfigError(f"attenuation table {path}: {exc}") from exc
    if not parser.has_section("attenuation"):
        raise ConfigError(f"attenuation table {path}: missing [attenuation] section")
    entries = []
    for key, raw in parser.items("attenuation"):
        try:
            energy, mu = float(key), float(raw)
        except ValueError:
            raise ConfigError(
                f"attenuation table {path}: bad entry {key!r} = {raw!r}"
            ) from None
        if mu < 0:
            raise ConfigError(f"attenuation table {path}: negative mu at {key} keV")
        entries.append((energy, mu))
    if not entries:
        raise ConfigError(f"attenuation table {path}: no entries")
    return tuple(sorted(entries))


class _Reader:
    """Typed accessors over one parsed file with [section] key diagnostics."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser

    def _raw(self, section, key):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        return None

    def string(self, section, key, default, choices=None):
        raw = self._raw(section, key)
        value = default if raw is None else raw
        if choices is not None and value not in choices:
            raise ConfigError(
                f"[{section}] {key}: expected one of {', '.join(choices)}, got {value!r}"
            )
        return value

    def number(self, section, key, default, minimum=None, positive=False):
        raw = self._raw(section, key)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None
        self._check_range(section, key, value, minimum, positive)
        return value

    def integer(self, section, key, default, minimum=None):
        raw = self._raw(section, key)
        if raw is None:
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: not an integer: {raw!r}") from None
        if minimum is not None and value < minimum:
            raise ConfigError(f"[{section}] {key}: must be >= {minimum}, got {value}")
        return value

    def numbers(self, section, key, default, positive=False):
        raw = self._raw(section, key)
        if raw is None:
            return default
        parts = [p for p in (s.strip() for s in raw.split(",")) if p]
        if not parts:
            raise ConfigError(f"[{section}] {key}: empty list")
        values = []
        for part in parts:
            try:
                values.append(float(part))
            except ValueError:
                raise ConfigError(f"[{section}] {key}: not a number: {part!r}") from None
        if positive and any(v <= 0 for v in values):
            raise ConfigError(f"[{section}] {key}: all values must be positive")
        return tuple(values)

    @staticmethod
    def _check_range(section, key, value, minimum, positive):
        if positive and not value > 0:
            raise ConfigError(f"[{section}] {key}: must be positive, got {value:g}")
        if minimum is not None and value < minimum:
            raise ConfigError(f"[{section}] {key}: must be >= {minimum:g}, got {value:g}")


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment file; unknown keys are errors."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for section in parser.sections():
        if section not in _VALID_KEYS:
            raise ConfigError(f"[{section}]: unknown section")
        for key, _ in parser.items(section):
            if key not in _VALID_KEYS[section]:
                raise ConfigError(f"[{section}] {key}: unknown key")

    r = _Reader(parser)
    mu_table_path = r.string("optics", "mu_table", None)
    if mu_table_path is not None:
        table = load_mu_table(path.parent / mu_table_path)
    else:
        table = load_mu_table(default_mu_table_path())

    mu_raw = r.number("optics", "mu_per_um", None, minimum=0.0)
    return ExperimentConfig(
        pattern_order=r.integer("aperture", "pattern_order", 8, minimum=1),
        bit_size_zero_um=r.number("aperture", "bit_size_zero_um", 10.0, positive=True),
        bit_size_one_um=r.number("aperture", "bit_size_one_um", 10.0, positive=True),
        thickness_um=r.number("aperture", "thickness_um", 10.0, positive=True),
        mu_per_um=mu_raw,
        energy_kev=r.number("optics", "energy_kev", 10.0, positive=True),
        mu_table=table,
        incidence_angle_deg=r.number("optics", "incidence_angle_deg", 0.0, minimum=0.0),
        signal_width_um=r.number("signal", "width_um", 10.0, positive=True),
        template=r.string("signal", "template", "gaussian", choices=("gaussian", "boxcar")),
        grid_step_um=r.number("scan", "grid_step_um", 1.0, positive=True),
        scan_bits=r.number("scan", "scan_bits", 8.0, minimum=1.0),
        noise_levels=r.numbers("scan", "noise_levels", (10.0, 100.0), positive=True),
        seed=r.integer("scan", "seed", 0, minimum=0),
        oversample=r.integer("scan", "oversample", 16, minimum=1),
        normalization=r.string("scan", "normalization", "corrected",
                               choices=("corrected", "minmax")),
        sweep_kind=r.string("sweep", "kind", "bsr", choices=SWEEP_KINDS),
        bsr=r.number("sweep", "bsr", 1.0, positive=True),
        bsr_values=r.numbers("sweep", "bsr_values", (0.25, 0.5, 1.0, 2.0), positive=True),
        scan_bits_values=r.numbers("sweep", "scan_bits_values",
                                   (2.0, 4.0, 8.0, 16.0, 24.0), positive=True),
        aspect_values=r.numbers("sweep", "aspect_values",
                                (0.1, 0.5, 1.0, 2.0, 5.0, 10.0), positive=True),
        angles_deg=r.numbers("sweep", "angles_deg", (0.0, 10.0, 20.0, 40.0)),
        energies_kev=r.numbers("sweep", "energies_kev", (5.0, 10.0, 20.0, 30.0),
                               positive=True),
        replicates=r.integer("sweep", "replicates", 30, minimum=1),
        position_stride=r.integer("sweep", "position_stride", 1, minimum=1),
        epsilon=r.number("criteria", "epsilon", 0.02, positive=True),
        position_margin_bits=r.number("criteria", "position_margin_bits", 1.0, minimum=0.0),
        max_rounds=r.integer("recover", "max_rounds", 3, minimum=1),
        nnls_tol=r.number("recover", "nnls_tol", 1e-10, positive=True),
        out_csv=r.string("output", "csv", None),
        svg_prefix=r.string("output", "svg_prefix", None),
    )
