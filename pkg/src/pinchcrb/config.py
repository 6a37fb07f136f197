"""Run configuration: an INI file in human units, validated and converted to SI objects."""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .crb import SensingBudget
from .experiments import EnsembleBounds, PlacementDirective, SweepSpec
from .placement import DIVERGENT_PENALTY, Objective, PlacementProblem, grid_ensemble, ula_baseline
from .scene import ReceiverLayout, RxMode, Target, TransmitterLayout, wavelength_for
from .validation import ConfigSpace

EXAMPLE_CONFIG = Path(__file__).with_name("data") / "example.ini"


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is ``section.key`` and ``line`` the 1-based source line."""

    def __init__(self, field_name: str, message: str, line: int | None = None, source: str | None = None):
        self.field = field_name
        self.line = line
        self.source = source
        where = f"{source or '<config>'}:{line}: " if line else ""
        super().__init__(f"{where}{field_name}: {message}")


@dataclass
class CarrierSection:
    frequency_ghz: float = 27.0
    n_eff: float = 1.4


@dataclass
class TransmitterSection:
    n_antennas: int = 4
    waveguide_length_m: float = 10.0
    feed_y_m: float | None = None
    positions_m: tuple[float, ...] | None = None
    waveguide_phase: bool = True


@dataclass
class ReceiverSection:
    n_elements: int = 16
    spacing_wavelengths: float = 0.5
    baseline_m: float = 30.0
    mode: str = "exact"


@dataclass
class BudgetSection:
    power_dbm: float = 0.0
    noise_dbm: float = -90.0
    kappa_abs: float = 1.0
    kappa_phase_deg: float = 0.0
    time_bandwidth: float = 1.0
    bandwidth_mhz: float = 10.0


@dataclass
class EnsembleSection:
    theta_min_deg: float = -30.0
    theta_max_deg: float = 30.0
    r_min_m: float = 5.0
    r_max_m: float = 25.0
    grid_theta: int = 16
    grid_range: int = 16


@dataclass
class TargetSection:
    range_m: float = 15.0
    direction_deg: float = 0.0


@dataclass
class SweepSection:
    n_values: tuple[int, ...] = (2, 4, 8, 16, 32, 64)
    samples: int = 2048
    transmitters: tuple[str, ...] = ("PAS:4", "PAS:8", "ULA:4", "ULA:8")


@dataclass
class PlacementSection:
    restarts: int = 32
    objective: str = "range"
    w_range: float = 1.0
    w_angle: float = 0.0
    reference_n: int = 16
    penalty: float = DIVERGENT_PENALTY


@dataclass
class ValidateSection:
    fd_configs: int = 1000
    fim_configs: int = 500
    fd_tolerance: float = 1e-6
    fim_tolerance: float = 1e-8


@dataclass
class RunSection:
    seed: int = 0
    output: str = "results/sweep.csv"
    placement_output: str = "results/placement.txt"
    format: str = "csv"


_SECTIONS = {
    "carrier": CarrierSection,
    "transmitter": TransmitterSection,
    "receiver": ReceiverSection,
    "budget": BudgetSection,
    "ensemble": EnsembleSection,
    "target": TargetSection,
    "sweep": SweepSection,
    "placement": PlacementSection,
    "validate": ValidateSection,
    "run": RunSection,
}

_TX_TOKEN = re.compile(r"^(PAS|ULA):(\d+)$", re.IGNORECASE)


def _parse_value(text: str, annotation: str) -> Any:
    text = text.strip()
    optional = annotation.endswith("| None")
    if optional and text.lower() in ("", "none", "auto"):
        return None
    base = annotation.replace(" | None", "")
    if base == "float":
        return float(text)
    if base == "int":
        value = float(text)
        if value != int(value):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    if base == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if base == "str":
        return text
    if base.startswith("tuple["):
        items = [t for t in re.split(r"[,\s]+", text) if t]
        inner = base[len("tuple["):].split(",")[0].strip()
        return tuple(_parse_value(t, inner) for t in items)
    raise TypeError(f"unsupported field type {annotation}")


def _render_value(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_render_value(v) for v in value)
    return str(value)


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> line number, for error messages."""
    out, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip().lower()
            out[(section, "")] = no
            continue
        key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
        if section is not None:
            out[(section, key)] = no
    return out


@dataclass
class RunConfig:
    carrier: CarrierSection = field(default_factory=CarrierSection)
    transmitter: TransmitterSection = field(default_factory=TransmitterSection)
    receiver: ReceiverSection = field(default_factory=ReceiverSection)
    budget: BudgetSection = field(default_factory=BudgetSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    target: TargetSection = field(default_factory=TargetSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    placement: PlacementSection = field(default_factory=PlacementSection)
    validate: ValidateSection = field(default_factory=ValidateSection)
    run: RunSection = field(default_factory=RunSection)
    source: str | None = field(default=None, compare=False)
    _lines: dict = field(default_factory=dict, compare=False, repr=False)

    # --- loading -----------------------------------------------------------

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str.lower
        lines = _line_index(text)
        try:
            parser.read_string(text, source=source or "<config>")
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError("<syntax>", str(exc).splitlines()[0], line, source) from None
        cfg = cls(source=source, _lines=lines)
        for section in parser.sections():
            name = section.strip().lower()
            if name not in _SECTIONS:
                raise ConfigError(name, "unknown section", lines.get((name, "")), source)
            target = getattr(cfg, name)
            known = {f.name: f for f in fields(target)}
            for key, raw in parser.items(section):
                if key not in known:
                    raise ConfigError(f"{name}.{key}", "unknown key", lines.get((name, key)), source)
                try:
                    value = _parse_value(raw, known[key].type)
                except ValueError as exc:
                    raise ConfigError(f"{name}.{key}", str(exc), lines.get((name, key)), source) from None
                setattr(target, key, value)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), source=str(path))

    def to_text(self) -> str:
        parts = []
        for name in _SECTIONS:
            parts.append(f"[{name}]")
            for f in fields(getattr(self, name)):
                parts.append(f"{f.name} = {_render_value(getattr(getattr(self, name), f.name))}")
            parts.append("")
        return "\n".join(parts)

    def replace(self, section: str, **changes) -> "RunConfig":
        """Copy with fields of one section overridden (values already typed)."""
        new = dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})
        new._lines = {}
        return new

    # --- validation --------------------------------------------------------

    def _fail(self, section: str, key: str, message: str):
        raise ConfigError(f"{section}.{key}", message, self._lines.get((section, key)), self.source)

    def check(self) -> None:
        def positive(section, key):
            value = getattr(getattr(self, section), key)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                self._fail(section, key, f"must be positive, got {value!r}")

        def finite(section, key):
            value = getattr(getattr(self, section), key)
            if not math.isfinite(value):
                self._fail(section, key, f"must be finite, got {value!r}")

        for key in ("frequency_ghz", "n_eff"):
            positive("carrier", key)
        for key in ("n_antennas", "waveguide_length_m"):
            positive("transmitter", key)
        for key in ("n_elements", "spacing_wavelengths", "baseline_m"):
            positive("receiver", key)
        if self.receiver.mode not in (m.value for m in RxMode):
            self._fail("receiver", "mode", f"must be 'exact' or 'plane-wave', got {self.receiver.mode!r}")
        for key in ("power_dbm", "noise_dbm", "kappa_phase_deg"):
            finite("budget", key)
        for key in ("kappa_abs", "time_bandwidth", "bandwidth_mhz"):
            positive("budget", key)
        e = self.ensemble
        for key in ("theta_min_deg", "theta_max_deg"):
            value = getattr(e, key)
            if not -90 < value < 90:
                self._fail("ensemble", key, f"must lie in (-90, 90) degrees, got {value!r}")
        if e.theta_min_deg > e.theta_max_deg:
            self._fail("ensemble", "theta_max_deg", "must be >= theta_min_deg")
        for key in ("r_min_m", "r_max_m", "grid_theta", "grid_range"):
            positive("ensemble", key)
        if e.r_min_m > e.r_max_m:
            self._fail("ensemble", "r_max_m", "must be >= r_min_m")
        positive("target", "range_m")
        if not -90 < self.target.direction_deg < 90:
            self._fail("target", "direction_deg", f"must lie in (-90, 90), got {self.target.direction_deg!r}")
        n = self.sweep.n_values
        if not n or any(v < 1 for v in n) or any(b <= a for a, b in zip(n, n[1:])):
            self._fail("sweep", "n_values", "must be positive and strictly ascending")
        positive("sweep", "samples")
        if not self.sweep.transmitters:
            self._fail("sweep", "transmitters", "at least one transmitter is required")
        for token in self.sweep.transmitters:
            m = _TX_TOKEN.match(token)
            if not m or int(m.group(2)) < 1:
                self._fail("sweep", "transmitters", f"entries look like PAS:4 or ULA:8, got {token!r}")
        for key in ("restarts", "reference_n", "penalty"):
            positive("placement", key)
        if self.placement.objective not in ("range", "angle", "weighted"):
            self._fail("placement", "objective", "must be range, angle or weighted")
        for key in ("w_range", "w_angle"):
            value = getattr(self.placement, key)
            if not (math.isfinite(value) and value >= 0):
                self._fail("placement", key, f"must be non-negative, got {value!r}")
        for key in ("fd_configs", "fim_configs", "fd_tolerance", "fim_tolerance"):
            positive("validate", key)
        if self.run.seed < 0:
            self._fail("run", "seed", "must be non-negative")
        if self.run.format not in ("csv", "json"):
            self._fail("run", "format", f"must be csv or json, got {self.run.format!r}")
        if self.transmitter.positions_m is not None:
            try:
                self.transmitter_layout()
            except ValueError as exc:
                self._fail("transmitter", "positions_m", str(exc))

    # --- conversion to SI objects -----------------------------------------

    @property
    def wavelength(self) -> float:
        return wavelength_for(self.carrier.frequency_ghz * 1e9)

    @property
    def guided_wavelength(self) -> float:
        return self.wavelength / self.carrier.n_eff

    def budget_model(self) -> SensingBudget:
        b = self.budget
        kappa = b.kappa_abs * complex(math.cos(math.radians(b.kappa_phase_deg)),
                                      math.sin(math.radians(b.kappa_phase_deg)))
        return SensingBudget.from_levels(b.power_dbm, b.noise_dbm, kappa, b.time_bandwidth,
                                         b.bandwidth_mhz * 1e6)

    def receiver_layout(self, n_elements: int | None = None) -> ReceiverLayout:
        r = self.receiver
        return ReceiverLayout(r.n_elements if n_elements is None else n_elements,
                              r.spacing_wavelengths * self.wavelength, r.baseline_m, self.wavelength,
                              mode=RxMode(r.mode))

    def transmitter_layout(self) -> TransmitterLayout:
        """Fixed layout from ``positions_m``, or the lambda/2 array for ``n_antennas``."""
        t = self.transmitter
        lam = self.wavelength
        if t.positions_m is None:
            pos = [(m - (t.n_antennas - 1) / 2) * lam / 2 for m in range(t.n_antennas)]
        else:
            pos = list(t.positions_m)
        return TransmitterLayout(pos, lam, self.guided_wavelength, t.waveguide_length_m,
                                 feed_y=t.feed_y_m, waveguide_phase_enabled=t.waveguide_phase)

    def target_model(self) -> Target:
        return Target(self.target.range_m, math.radians(self.target.direction_deg))

    def ensemble_bounds(self) -> EnsembleBounds:
        e = self.ensemble
        return EnsembleBounds(math.radians(e.theta_min_deg), math.radians(e.theta_max_deg),
                              e.r_min_m, e.r_max_m)

    def objective(self) -> Objective:
        p = self.placement
        if p.objective == "range":
            return Objective.range()
        if p.objective == "angle":
            return Objective.angle()
        return Objective.weighted(p.w_range, p.w_angle)

    def placement_problem(self, m_antennas: int | None = None) -> PlacementProblem:
        e = self.ensemble_bounds()
        r, th = grid_ensemble(self.ensemble.grid_theta, self.ensemble.grid_range,
                              e.theta_min, e.theta_max, e.r_min, e.r_max)
        m = self.transmitter.n_antennas if m_antennas is None else m_antennas
        return PlacementProblem(
            m, self.transmitter.waveguide_length_m, self.wavelength, self.guided_wavelength,
            self.receiver_layout(self.placement.reference_n), self.budget_model(), r, th,
            objective=self.objective(), feed_y=self.transmitter.feed_y_m,
            divergent_penalty=self.placement.penalty,
        )

    def sweep_spec(self) -> SweepSpec:
        txs = []
        for token in self.sweep.transmitters:
            kind, m = _TX_TOKEN.match(token).groups()
            m = int(m)
            label = f"{kind.upper()} M={m}"
            if kind.upper() == "ULA":
                txs.append((label, ula_baseline(m, self.wavelength)))
            else:
                txs.append((label, PlacementDirective(
                    m, self.transmitter.waveguide_length_m, self.wavelength, self.guided_wavelength,
                    objective=self.objective(), restarts=self.placement.restarts,
                    reference_n=self.placement.reference_n,
                    grid=(self.ensemble.grid_theta, self.ensemble.grid_range),
                    feed_y=self.transmitter.feed_y_m, penalty=self.placement.penalty,
                )))
        return SweepSpec(txs, self.receiver_layout(), self.budget_model(), self.sweep.n_values,
                         self.ensemble_bounds(), self.sweep.samples, self.run.seed)

    def config_space(self) -> ConfigSpace:
        e = self.ensemble_bounds()
        return ConfigSpace(self.wavelength, self.carrier.n_eff, self.transmitter.waveguide_length_m,
                           self.receiver.baseline_m, self.receiver.spacing_wavelengths,
                           e.theta_min, e.theta_max, e.r_min, e.r_max)
