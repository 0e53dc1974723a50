"""Line-oriented experiment description language and dataset serialization.

Grammar, one construct per line:

    [section]          sections: system, electron, nucleus (repeatable),
                       resonator, sequence, noise, sweep, output
    key = value        value: number list with optional unit suffix, a bare
                       word, true/false, or free text depending on the key
    # comment          anywhere; the rest of the line is ignored

Unit suffixes: T mT GHz MHz kHz s ms us ns K W mW deg.  Quantity keys
require a unit of the right dimension; counts and fractions are bare
numbers.  Parsing never stops at the first problem: every error is
collected with its line and column and no partial config is ever returned.

Every key has a default in a versioned table; parsing resolves all defaults
immediately, so a parsed config is always complete and can be re-rendered
as an explicit file that parses back to the same config bit for bit.
"""

from __future__ import annotations

import io
import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .acquisition import (
    Axis,
    Dataset,
    SweepPlan,
    decay_sweep,
    endor_sweep,
    field_sweep_ese,
    scan_2d,
    MAGNET_MAX_T,
)
from .constants import CONSTANTS
from .detection import NoiseModel
from .errors import DomainError
from .pulses import PulseSpec, b1_for_angle
from .resonator import ResonatorModel, b1_from_power
from .sequences import SequenceSpec
from .spinsys import ElectronSpin, NuclearSpecies, SpinSystem

DEFAULTS_VERSION = "1"

UNIT_FACTORS_SI = {
    "T": 1.0,
    "mT": 1e-3,
    "GHz": 1e9,
    "MHz": 1e6,
    "kHz": 1e3,
    "s": 1.0,
    "ms": 1e-3,
    "us": 1e-6,
    "ns": 1e-9,
    "K": 1.0,
    "W": 1.0,
    "mW": 1e-3,
    "deg": math.pi / 180.0,
}

_DIMENSIONS = {
    "T": ("T", "mT"),
    "mT": ("T", "mT"),
    "GHz": ("GHz", "MHz", "kHz"),
    "MHz": ("GHz", "MHz", "kHz"),
    "s": ("s", "ms", "us", "ns"),
    "K": ("K",),
    "W": ("W", "mW"),
    "deg": ("deg",),
}

# Exact unit-to-canonical ratios, computed once so every conversion is a
# single rounding.
_RATIOS = {
    (u, t): UNIT_FACTORS_SI[u] / UNIT_FACTORS_SI[t]
    for t, units in _DIMENSIONS.items()
    for u in units
}


@dataclass(frozen=True)
class ParseError:
    line: int
    column: int
    message: str
    snippet: str

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}: {self.message}"


class ExperimentSyntaxError(Exception):
    """Raised with the full list of collected parse/validation errors."""

    def __init__(self, errors: list[ParseError]):
        self.errors = sorted(errors, key=lambda e: (e.line, e.column))
        lines = "\n".join(str(e) for e in self.errors)
        super().__init__(f"{len(self.errors)} error(s):\n{lines}")


@dataclass(frozen=True)
class _Key:
    kind: str                       # quantity, number, int, word, bool, text, numlist
    unit: str | None = None         # canonical unit for quantity/numlist keys
    default: object = None
    choices: tuple[str, ...] | None = None
    count: tuple[int, ...] | None = None  # allowed list lengths for numlist


_SECTIONS: dict[str, dict[str, _Key]] = {
    "system": {
        "name": _Key("text", default="spin system"),
        "spins_count": _Key("number", default=1e12),
        "temperature": _Key("quantity", unit="K", default=5.0),
    },
    "electron": {
        "s": _Key("number", default=0.5),
        "g": _Key("numlist", count=(1, 3), default=(2.0023,)),
        "g_euler": _Key("numlist", unit="deg", count=(3,), default=(0.0, 0.0, 0.0)),
        "d": _Key("quantity", unit="MHz", default=0.0),
        "e": _Key("quantity", unit="MHz", default=0.0),
        "linewidth": _Key("quantity", unit="mT", default=1.0),
        "t1": _Key("quantity", unit="s", default=1e-3),
        "t2": _Key("quantity", unit="s", default=1e-6),
    },
    "nucleus": {
        "label": _Key("text", default="nucleus"),
        "i": _Key("number", default=0.5),
        "gn": _Key("number", default=1.0),
        "a": _Key("quantity", unit="MHz", default=0.0),
        "p": _Key("quantity", unit="MHz", default=0.0),
        "multiplicity": _Key("int", default=1),
        "spread_a": _Key("numlist", unit="MHz", count=(), default=None),
        "spread_p": _Key("numlist", unit="MHz", count=(), default=None),
    },
    "resonator": {
        "freq": _Key("quantity", unit="GHz", default=240.0),
        "n_halfwaves": _Key("int", default=6),
        "beam_waist": _Key("number", default=1.5e-3),
        "mesh_transmission": _Key("number", default=0.005),
        "other_loss": _Key("number", default=0.07),
        "power": _Key("quantity", unit="W", default=0.03),
        "polarization": _Key("word", choices=("circular", "linear"), default="linear"),
    },
    "sequence": {
        "kind": _Key("word", choices=("hahn", "stimulated", "mims"), default="hahn"),
        "carrier": _Key("quantity", unit="GHz", default=None),  # derived: resonator freq
        "tau": _Key("quantity", unit="s", default=1e-6),
        "t_wait": _Key("quantity", unit="s", default=100e-6),
        # 300/600/300 ns at 90/180/90 deg need b1 = 0.0297 mT, within a few
        # percent of what the default 30 mW linear resonator delivers, so a
        # minimal config passes the calibration cross-check.
        "pulse1": _Key("quantity", unit="s", default=300e-9),
        "pulse2": _Key("quantity", unit="s", default=600e-9),
        "pulse3": _Key("quantity", unit="s", default=300e-9),
        "flip1": _Key("quantity", unit="deg", default=90.0),
        "flip2": _Key("quantity", unit="deg", default=180.0),
        "flip3": _Key("quantity", unit="deg", default=90.0),
        "rf_freq": _Key("quantity", unit="MHz", default=17.0),
        "rf_duration": _Key("quantity", unit="s", default=150e-6),
        "rf_power": _Key("quantity", unit="W", default=10.0),
        "rf_scale": _Key("number", default=1.0),
        "endor_linewidth": _Key("quantity", unit="MHz", default=0.05),
        "allow_b1_mismatch": _Key("bool", default=False),
    },
    "noise": {
        "sigma": _Key("number", default=0.0),
        "phase_mode": _Key(
            "word", choices=("fixed", "uniform_random", "random_walk"), default="uniform_random"
        ),
        "walk_rate": _Key("number", default=0.0),
        "fixed_phase": _Key("quantity", unit="deg", default=0.0),
    },
    "sweep": {
        "axis": _Key("word", choices=("field", "tau", "rf"), default="field"),
        "start": _Key("quantity", unit=None, default=None),   # unit set by axis
        "stop": _Key("quantity", unit=None, default=None),
        "points": _Key("int", default=201),
        "axis2": _Key("word", choices=("tau",), default=None),
        "start2": _Key("quantity", unit="s", default=0.5e-6),
        "stop2": _Key("quantity", unit="s", default=2e-6),
        "points2": _Key("int", default=8),
        "field": _Key("quantity", unit="T", default=None),    # derived: resonance center
        "shots": _Key("int", default=1),
        "repetition_time": _Key("quantity", unit="s", default=10e-3),
        "seed": _Key("int", default=0),
    },
    "output": {
        "format": _Key("word", choices=("csv", "json"), default="csv"),
        "path": _Key("text", default=""),
    },
}

_AXIS_UNIT = {"field": "T", "tau": "s", "rf": "MHz"}
_AXIS_DEFAULTS = {
    "field": (None, None),       # derived around the resonance center
    "tau": (0.2e-6, 2e-6),
    "rf": (10.0, 25.0),
}

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_INT_RE = re.compile(r"^[+-]?\d+$")
_HEADER_RE = re.compile(r"^\s*\[([^\]\s]*)\]\s*$")
_ASSIGN_RE = re.compile(r"^(\s*)([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_TOKEN_RE = re.compile(r"[^,\s]+")


@dataclass
class ExperimentConfig:
    """A fully resolved experiment: raw key table plus assembled objects."""

    raw: dict
    system: SpinSystem
    resonator: ResonatorModel
    seq: SequenceSpec
    noise: NoiseModel
    plan: SweepPlan
    temperature_k: float
    carrier_ghz: float
    b0_t: float
    endor_linewidth_mhz: float
    rf_scale: float
    output_format: str
    output_path: str


def parse_quantity(text: str) -> tuple[float, str]:
    """Parse 'NUMBER UNIT' into (SI value, unit).  Raises DomainError."""
    parts = text.split()
    if len(parts) != 2:
        raise DomainError(f"expected 'number unit', got {text!r}")
    if not _NUMBER_RE.match(parts[0]):
        raise DomainError(f"bad number {parts[0]!r}")
    if parts[1] not in UNIT_FACTORS_SI:
        raise DomainError(f"unknown unit {parts[1]!r}")
    return float(parts[0]) * UNIT_FACTORS_SI[parts[1]], parts[1]


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.errors: list[ParseError] = []
        # scope values: section -> {key: value}; nucleus -> list of dicts
        self.scalars: dict[str, dict] = {}
        self.nuclei: list[dict] = []
        # provenance: (scope marker, key) -> (line, col)
        self.where: dict[tuple[str, str], tuple[int, int]] = {}
        self.section_lines: dict[str, int] = {}

    def err(self, line_no: int, col: int, message: str) -> None:
        snippet = self.lines[line_no - 1] if 0 < line_no <= len(self.lines) else ""
        self.errors.append(ParseError(line=line_no, column=col, message=message, snippet=snippet))

    def run(self) -> None:
        current: dict | None = None
        current_name = ""
        skipping = False
        for idx, raw_line in enumerate(self.lines, start=1):
            cut = raw_line.find("#")
            code = raw_line[:cut] if cut >= 0 else raw_line
            if not code.strip():
                continue
            header = _HEADER_RE.match(code)
            if header:
                name = header.group(1)
                col = code.index("[") + 1
                if name not in _SECTIONS:
                    self.err(idx, col, f"unknown section [{name}]")
                    skipping = True
                    current = None
                    continue
                skipping = False
                if name == "nucleus":
                    current = {}
                    self.nuclei.append(current)
                    current_name = f"nucleus{len(self.nuclei)}"
                else:
                    if name in self.scalars:
                        self.err(idx, col, f"duplicate section [{name}]")
                        skipping = True
                        current = None
                        continue
                    current = {}
                    self.scalars[name] = current
                    current_name = name
                self.section_lines[current_name] = idx
                continue
            if "[" in code and "]" in code and code.strip().startswith("["):
                self.err(idx, code.index("[") + 1, "malformed section header")
                skipping = True
                current = None
                continue
            assign = _ASSIGN_RE.match(code)
            if not assign:
                self.err(idx, len(code) - len(code.lstrip()) + 1, "expected 'key = value'")
                continue
            if skipping:
                continue
            if current is None:
                self.err(idx, assign.start(2) + 1, "assignment before any [section]")
                continue
            key = assign.group(2)
            key_col = assign.start(2) + 1
            table = _SECTIONS["nucleus" if current_name.startswith("nucleus") else current_name]
            if key not in table:
                self.err(idx, key_col, f"unknown key {key!r} in [{current_name.rstrip('0123456789')}]")
                continue
            if key in current:
                self.err(idx, key_col, f"duplicate key {key!r}")
                continue
            value_col = assign.end(0) - len(assign.group(3)) + 1
            value_text = assign.group(3).strip()
            if not value_text:
                self.err(idx, value_col, f"missing value for {key!r}")
                continue
            spec = table[key]
            parsed = self.parse_value(spec, key, value_text, idx, value_col, current_name)
            if parsed is not _FAILED:
                current[key] = parsed
                self.where[(current_name, key)] = (idx, key_col)

    def parse_value(self, spec: _Key, key: str, text: str, line: int, col: int, scope: str):
        if spec.kind == "text":
            return text
        if spec.kind == "word":
            if spec.choices and text not in spec.choices:
                self.err(line, col, f"{key!r} must be one of {', '.join(spec.choices)}; got {text!r}")
                return _FAILED
            return text
        if spec.kind == "bool":
            if text == "true":
                return True
            if text == "false":
                return False
            self.err(line, col, f"{key!r} must be true or false; got {text!r}")
            return _FAILED
        if spec.kind == "int":
            if not _INT_RE.match(text):
                self.err(line, col, f"{key!r} must be an integer; got {text!r}")
                return _FAILED
            return int(text)

        # Numeric kinds: numbers separated by commas, optional trailing unit.
        tokens = [(m.group(0), col + m.start()) for m in _TOKEN_RE.finditer(text)]
        unit = None
        unit_col = 0
        if tokens and not _NUMBER_RE.match(tokens[-1][0]):
            unit, unit_col = tokens[-1]
            tokens = tokens[:-1]
        numbers = []
        ok = True
        for tok, tok_col in tokens:
            if not _NUMBER_RE.match(tok):
                self.err(line, tok_col, f"bad number {tok!r}")
                ok = False
                continue
            numbers.append(float(tok))
        if not ok:
            return _FAILED
        if not numbers:
            self.err(line, col, f"{key!r} needs at least one number")
            return _FAILED

        target = spec.unit
        if target is None:
            if key in ("start", "stop"):
                # Axis unit is only known after the whole file is read;
                # stash the raw quantity and convert during resolution.
                if unit is None:
                    self.err(line, col, f"{key!r} needs a unit matching the sweep axis")
                    return _FAILED
                if unit not in UNIT_FACTORS_SI:
                    self.err(line, unit_col, f"unknown unit {unit!r}")
                    return _FAILED
                if len(numbers) != 1:
                    self.err(line, col, f"{key!r} takes a single number")
                    return _FAILED
                return _Pending(numbers[0], unit, line, unit_col)
            if unit is not None:
                self.err(line, unit_col, f"{key!r} takes a bare number, not a unit")
                return _FAILED
        if target is not None:
            if unit is None:
                self.err(line, col, f"{key!r} needs a unit ({', '.join(_DIMENSIONS[target])})")
                return _FAILED
            if unit not in UNIT_FACTORS_SI:
                self.err(line, unit_col, f"unknown unit {unit!r}")
                return _FAILED
            if unit not in _DIMENSIONS[target]:
                self.err(
                    line, unit_col,
                    f"{key!r} needs a {'/'.join(_DIMENSIONS[target])} unit, not {unit!r}",
                )
                return _FAILED
            ratio = _RATIOS[(unit, target)]
            numbers = [n * ratio for n in numbers]

        if spec.kind == "quantity" or (spec.kind == "number" and spec.count is None):
            if len(numbers) != 1:
                self.err(line, col, f"{key!r} takes a single number")
                return _FAILED
            return numbers[0]
        # numlist
        if spec.count and len(numbers) not in spec.count:
            allowed = " or ".join(str(c) for c in spec.count)
            self.err(line, col, f"{key!r} needs {allowed} numbers, got {len(numbers)}")
            return _FAILED
        return tuple(numbers)

    def locate(self, scope: str, key: str) -> tuple[int, int]:
        """Best source position for an error about scope.key."""
        if (scope, key) in self.where:
            return self.where[(scope, key)]
        if scope in self.section_lines:
            return self.section_lines[scope], 1
        return 1, 1


_FAILED = object()


@dataclass(frozen=True)
class _Pending:
    """A quantity whose target unit depends on another key (the sweep axis)."""

    value: float
    unit: str
    line: int
    column: int


def _resolve(parser: _Parser) -> dict:
    """Fill every key from the defaults table; derived defaults last."""
    raw: dict = {}
    for section, table in _SECTIONS.items():
        if section == "nucleus":
            continue
        got = parser.scalars.get(section, {})
        raw[section] = {k: got.get(k, spec.default) for k, spec in table.items()}
    raw["nucleus"] = []
    for nuc in parser.nuclei:
        table = _SECTIONS["nucleus"]
        raw["nucleus"].append({k: nuc.get(k, spec.default) for k, spec in table.items()})

    # Derived defaults.
    if raw["sequence"]["carrier"] is None:
        raw["sequence"]["carrier"] = raw["resonator"]["freq"]
    g = raw["electron"]["g"]
    g_iso = sum(g) / len(g)
    center_t = raw["sequence"]["carrier"] * 1e9 * CONSTANTS.h / (g_iso * CONSTANTS.muB)
    if raw["sweep"]["field"] is None:
        raw["sweep"]["field"] = center_t
    axis = raw["sweep"]["axis"]
    target = _AXIS_UNIT[axis]
    for key in ("start", "stop"):
        v = raw["sweep"][key]
        if isinstance(v, _Pending):
            if v.unit not in _DIMENSIONS[target]:
                parser.err(
                    v.line, v.column,
                    f"{key!r} needs a {'/'.join(_DIMENSIONS[target])} unit for a "
                    f"{axis} sweep, not {v.unit!r}",
                )
                raw["sweep"][key] = None
            else:
                raw["sweep"][key] = v.value * _RATIOS[(v.unit, target)]
    lo, hi = _AXIS_DEFAULTS[axis]
    if lo is None:
        lo, hi = center_t - 0.05, center_t + 0.05
    if raw["sweep"]["start"] is None:
        raw["sweep"]["start"] = lo
    if raw["sweep"]["stop"] is None:
        raw["sweep"]["stop"] = hi
    for nuc in raw["nucleus"]:
        m = nuc["multiplicity"]
        if nuc["spread_a"] is None:
            nuc["spread_a"] = tuple(0.0 for _ in range(max(m, 1)))
        if nuc["spread_p"] is None:
            nuc["spread_p"] = tuple(0.0 for _ in range(max(m, 1)))
    return raw


def _assemble(raw: dict, parser: _Parser) -> ExperimentConfig | None:
    """Build simulator objects from a resolved raw table, collecting errors."""
    errors_before = len(parser.errors)

    def fail(scope: str, key: str, message: str) -> None:
        line, col = parser.locate(scope, key)
        parser.err(line, col, message)

    g = raw["electron"]["g"]
    g_principal = tuple(g) if len(g) == 3 else (g[0], g[0], g[0])
    g_euler = tuple(v * math.pi / 180.0 for v in raw["electron"]["g_euler"])
    electron = None
    try:
        electron = ElectronSpin(
            s=raw["electron"]["s"],
            g_principal=g_principal,
            g_orientation=g_euler,
            d_mhz=raw["electron"]["d"],
            e_mhz=raw["electron"]["e"],
            linewidth_fwhm_mt=raw["electron"]["linewidth"],
            t1_s=raw["electron"]["t1"],
            t2_s=raw["electron"]["t2"],
        )
    except DomainError as exc:
        fail("electron", "s", f"bad electron: {exc}")

    nuclei = []
    for n_idx, nuc in enumerate(raw["nucleus"], start=1):
        scope = f"nucleus{n_idx}"
        m = nuc["multiplicity"]
        if len(nuc["spread_a"]) != m:
            fail(scope, "spread_a", f"spread_a needs {m} values (one per site)")
            continue
        if len(nuc["spread_p"]) != m:
            fail(scope, "spread_p", f"spread_p needs {m} values (one per site)")
            continue
        spread = tuple(zip(nuc["spread_a"], nuc["spread_p"]))
        try:
            nuclei.append(
                NuclearSpecies(
                    label=nuc["label"],
                    i=nuc["i"],
                    gn=nuc["gn"],
                    a_mhz=nuc["a"],
                    p_mhz=nuc["p"],
                    multiplicity=m,
                    site_spread=spread,
                )
            )
        except DomainError as exc:
            fail(scope, "i", f"bad nucleus: {exc}")

    system = None
    if electron is not None:
        try:
            system = SpinSystem(
                name=raw["system"]["name"],
                electron=electron,
                nuclei=tuple(nuclei),
                spins_count=raw["system"]["spins_count"],
            )
        except DomainError as exc:
            fail("system", "spins_count", f"bad system: {exc}")

    resonator = None
    try:
        resonator = ResonatorModel(
            freq_ghz=raw["resonator"]["freq"],
            n_halfwaves=raw["resonator"]["n_halfwaves"],
            beam_waist_m=raw["resonator"]["beam_waist"],
            mesh_transmission=raw["resonator"]["mesh_transmission"],
            other_loss=raw["resonator"]["other_loss"],
            incident_power_w=raw["resonator"]["power"],
            polarization_mode=raw["resonator"]["polarization"],
        )
    except DomainError as exc:
        fail("resonator", "freq", f"bad resonator: {exc}")

    temperature = raw["system"]["temperature"]
    if temperature <= 0:
        fail("system", "temperature", "temperature must be positive")

    carrier = raw["sequence"]["carrier"]
    if resonator is not None:
        half_band = resonator.bandwidth_ghz / 2.0
        if abs(carrier - resonator.freq_ghz) > half_band:
            fail(
                "sequence", "carrier",
                f"carrier {carrier} GHz is outside the resonator band "
                f"{resonator.freq_ghz} +- {half_band:.4g} GHz",
            )

    seq = None
    if electron is not None and resonator is not None:
        kind = raw["sequence"]["kind"]
        if kind == "stimulated":
            fail("sequence", "kind", "sweeps support kinds 'hahn' and 'mims' only")
        else:
            n_pulses = 2 if kind == "hahn" else 3
            available_b1 = b1_from_power(resonator)
            g_iso = electron.g_iso
            pulse_specs = []
            for k in range(1, n_pulses + 1):
                dur = raw["sequence"][f"pulse{k}"]
                flip_deg = raw["sequence"][f"flip{k}"]
                if dur <= 0 or flip_deg <= 0:
                    fail("sequence", f"pulse{k}", "pulse duration and flip must be positive")
                    pulse_specs = None
                    break
                required_b1 = b1_for_angle(math.radians(flip_deg), dur, g_iso, "circular")
                if (
                    not raw["sequence"]["allow_b1_mismatch"]
                    and abs(required_b1 - available_b1) > 0.2 * available_b1
                ):
                    fail(
                        "sequence", f"flip{k}",
                        f"pulse {k} needs b1 = {required_b1:.4g} mT but the resonator "
                        f"delivers {available_b1:.4g} mT (more than 20% off); adjust "
                        "power/duration or set allow_b1_mismatch = true",
                    )
                    pulse_specs = None
                    break
                pulse_specs.append(
                    PulseSpec(duration_s=dur, b1_mt=required_b1, polarization_mode="circular")
                )
            if pulse_specs is not None:
                rf = None
                if kind == "mims":
                    rf = (
                        raw["sequence"]["rf_freq"],
                        raw["sequence"]["rf_duration"],
                        raw["sequence"]["rf_power"],
                    )
                try:
                    seq = SequenceSpec(
                        kind=kind,
                        tau_s=raw["sequence"]["tau"],
                        pulses=tuple(pulse_specs),
                        t_wait_s=raw["sequence"]["t_wait"] if kind != "hahn" else 0.0,
                        rf=rf,
                    )
                except DomainError as exc:
                    fail("sequence", "tau", f"bad sequence: {exc}")

    axis = raw["sweep"]["axis"]
    if seq is not None:
        if axis == "rf" and seq.kind != "mims":
            fail("sweep", "axis", "an rf sweep needs kind = mims")
        if axis != "rf" and seq.kind == "mims":
            fail("sweep", "axis", "a mims sequence sweeps the rf axis")

    plan = None
    start, stop, points = raw["sweep"]["start"], raw["sweep"]["stop"], raw["sweep"]["points"]
    if points < 2:
        fail("sweep", "points", "points must be >= 2")
    elif not stop > start:
        fail("sweep", "stop", "stop must exceed start")
    else:
        if axis == "field" and not (0 <= start and stop <= MAGNET_MAX_T):
            fail("sweep", "start", f"field grid must stay within [0, {MAGNET_MAX_T}] T")
        elif axis in ("tau", "rf") and start <= 0:
            fail("sweep", "start", f"{axis} grid must be positive")
        else:
            axis1 = Axis(axis, _AXIS_UNIT[axis], np.linspace(start, stop, points))
            axis2 = None
            if raw["sweep"]["axis2"] is not None:
                if axis != "field":
                    fail("sweep", "axis2", "a second axis is only supported under a field sweep")
                else:
                    s2, e2, p2 = raw["sweep"]["start2"], raw["sweep"]["stop2"], raw["sweep"]["points2"]
                    if p2 < 2 or not e2 > s2 or s2 <= 0:
                        fail("sweep", "start2", "second axis needs points2 >= 2 and 0 < start2 < stop2")
                    else:
                        axis2 = Axis("tau", "s", np.linspace(s2, e2, p2))
            if raw["sweep"]["shots"] < 1:
                fail("sweep", "shots", "shots must be >= 1")
            elif raw["sweep"]["repetition_time"] <= 0:
                fail("sweep", "repetition_time", "repetition time must be positive")
            else:
                try:
                    plan = SweepPlan(
                        axis1=axis1,
                        axis2=axis2,
                        shots_per_point=raw["sweep"]["shots"],
                        repetition_time_s=raw["sweep"]["repetition_time"],
                        master_seed=raw["sweep"]["seed"],
                    )
                except DomainError as exc:
                    fail("sweep", "axis", f"bad sweep: {exc}")

    b0 = raw["sweep"]["field"]
    if not 0 <= b0 <= MAGNET_MAX_T:
        fail("sweep", "field", f"field must stay within [0, {MAGNET_MAX_T}] T")

    noise = None
    try:
        noise = NoiseModel(
            sigma=raw["noise"]["sigma"],
            phase_mode=raw["noise"]["phase_mode"],
            walk_rate_rad2_per_s=raw["noise"]["walk_rate"],
            fixed_phase_rad=math.radians(raw["noise"]["fixed_phase"]),
        )
    except DomainError as exc:
        fail("noise", "sigma", f"bad noise model: {exc}")

    if not 0.0 <= raw["sequence"]["rf_scale"] <= 1.0:
        fail("sequence", "rf_scale", "rf_scale must lie in [0, 1]")
    if raw["sequence"]["endor_linewidth"] <= 0:
        fail("sequence", "endor_linewidth", "endor_linewidth must be positive")

    if len(parser.errors) > errors_before or parser.errors:
        return None
    return ExperimentConfig(
        raw=raw,
        system=system,
        resonator=resonator,
        seq=seq,
        noise=noise,
        plan=plan,
        temperature_k=temperature,
        carrier_ghz=carrier,
        b0_t=b0,
        endor_linewidth_mhz=raw["sequence"]["endor_linewidth"],
        rf_scale=raw["sequence"]["rf_scale"],
        output_format=raw["output"]["format"],
        output_path=raw["output"]["path"],
    )


def parse_experiment(text: str) -> ExperimentConfig:
    """Parse DSL text into a complete config; raises ExperimentSyntaxError
    carrying every collected error when anything is wrong."""
    parser = _Parser(text)
    parser.run()
    if parser.errors:
        raise ExperimentSyntaxError(parser.errors)
    raw = _resolve(parser)
    config = _assemble(raw, parser)
    if config is None:
        raise ExperimentSyntaxError(parser.errors)
    return config


def parse_experiment_file(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_experiment(fh.read())


def _format_value(spec: _Key, value) -> str:
    if spec.kind == "text":
        return value
    if spec.kind == "bool":
        return "true" if value else "false"
    if spec.kind in ("int", "word"):
        return str(value)
    unit = f" {spec.unit}" if spec.unit else ""
    if spec.kind == "numlist":
        return ", ".join(repr(v) for v in value) + unit
    return f"{value!r}{unit}"


def render_config(config: ExperimentConfig) -> str:
    """Render a resolved config as explicit DSL text.

    Every key appears with its canonical unit and full-precision value, so
    parsing the rendering reproduces the config exactly.
    """
    out = io.StringIO()
    out.write(f"# resolved experiment (defaults table version {DEFAULTS_VERSION})\n")
    for section, table in _SECTIONS.items():
        if section == "nucleus":
            for nuc in config.raw["nucleus"]:
                out.write("\n[nucleus]\n")
                for key, spec in table.items():
                    out.write(f"{key} = {_format_value(spec, nuc[key])}\n")
            continue
        out.write(f"\n[{section}]\n")
        axis_unit = _AXIS_UNIT[config.raw["sweep"]["axis"]]
        for key, spec in table.items():
            value = config.raw[section][key]
            if value is None or (spec.kind == "text" and value == ""):
                continue
            if section == "sweep" and key in ("start", "stop"):
                out.write(f"{key} = {value!r} {axis_unit}\n")
                continue
            out.write(f"{key} = {_format_value(spec, value)}\n")
    return out.getvalue()


def run_experiment(config: ExperimentConfig, *, workers: int = 1) -> Dataset:
    """Run the sweep described by a config and stamp it into the metadata."""
    axis = config.plan.axis1.name
    if axis == "field" and config.plan.axis2 is not None:
        ds = scan_2d(
            config.system, config.carrier_ghz, config.plan, config.seq,
            config.noise, config.temperature_k, workers=workers,
        )
    elif axis == "field":
        ds = field_sweep_ese(
            config.system, config.carrier_ghz, config.plan, config.seq,
            config.noise, config.temperature_k, workers=workers,
        )
    elif axis == "tau":
        ds = decay_sweep(
            config.system, config.carrier_ghz, config.b0_t, config.plan,
            config.seq, config.noise, config.temperature_k, workers=workers,
        )
    elif axis == "rf":
        ds = endor_sweep(
            config.system, config.carrier_ghz, config.b0_t, config.plan,
            config.seq, config.noise, config.temperature_k,
            linewidth_mhz=config.endor_linewidth_mhz, rf_scale=config.rf_scale,
            workers=workers,
        )
    else:
        raise DomainError(f"no runner for axis {axis!r}")
    meta = dict(ds.metadata)
    meta["package_version"] = __version__
    meta["defaults_version"] = DEFAULTS_VERSION
    meta["config_source"] = render_config(config)
    return Dataset(axes=ds.axes, values=ds.values, metadata=meta)


# ---------------------------------------------------------------------------
# Dataset serialization

_CSV_FORMAT = "hfepr-csv-1"
_JSON_FORMAT = "hfepr-json-1"


def _nine_digits(x: float) -> str:
    return f"{x:.9g}"


def emit_dataset(ds: Dataset, fmt: str = "csv") -> str:
    """Serialize a Dataset; csv rounds to 9 significant digits, json is exact."""
    if fmt == "json":
        doc = {
            "format": _JSON_FORMAT,
            "metadata": ds.metadata,
            "axes": [
                {"name": ax.name, "unit": ax.unit, "values": list(map(float, ax.values))}
                for ax in ds.axes
            ],
            "values": list(map(float, ds.values.ravel())),
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if fmt != "csv":
        raise DomainError(f"unknown dataset format {fmt!r}")
    out = io.StringIO()
    out.write(f"# format: {_CSV_FORMAT}\n")
    for key in sorted(ds.metadata):
        out.write(f"# {key}: {json.dumps(ds.metadata[key], sort_keys=True)}\n")
    header = [f"{ax.name}_{ax.unit}" for ax in ds.axes] + ["value"]
    out.write(",".join(header) + "\n")
    grids = [ax.values for ax in ds.axes]
    flat = ds.values.ravel()
    index = np.stack(
        [g.ravel() for g in np.meshgrid(*grids, indexing="ij")], axis=-1
    ) if grids else np.zeros((1, 0))
    for row, value in zip(index, flat):
        cells = [_nine_digits(v) for v in row] + [_nine_digits(value)]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def parse_dataset(text: str, fmt: str = "csv") -> Dataset:
    """Read a serialized dataset back; inverse of emit_dataset."""
    if fmt == "json":
        doc = json.loads(text)
        if doc.get("format") != _JSON_FORMAT:
            raise DomainError("not a recognized json dataset")
        axes = tuple(
            Axis(ax["name"], ax["unit"], np.array(ax["values"], dtype=float))
            for ax in doc["axes"]
        )
        shape = tuple(len(ax.values) for ax in axes)
        values = np.array(doc["values"], dtype=float).reshape(shape)
        return Dataset(axes=axes, values=values, metadata=doc["metadata"])
    if fmt != "csv":
        raise DomainError(f"unknown dataset format {fmt!r}")
    lines = text.splitlines()
    if not lines or lines[0] != f"# format: {_CSV_FORMAT}":
        raise DomainError("not a recognized csv dataset")
    metadata = {}
    i = 1
    while i < len(lines) and lines[i].startswith("# "):
        key, _, rest = lines[i][2:].partition(": ")
        metadata[key] = json.loads(rest)
        i += 1
    header = lines[i].split(",")
    if header[-1] != "value":
        raise DomainError("csv header must end with a value column")
    axis_meta = []
    for name_unit in header[:-1]:
        name, _, unit = name_unit.rpartition("_")
        axis_meta.append((name, unit))
    rows = [line.split(",") for line in lines[i + 1 :] if line]
    columns = np.array(rows, dtype=float)
    if columns.shape[1] != len(header):
        raise DomainError("csv row width does not match header")
    grids = []
    for k, (name, unit) in enumerate(axis_meta):
        grids.append(Axis(name, unit, np.unique(columns[:, k])))
    shape = tuple(len(g.values) for g in grids)
    if int(np.prod(shape)) != columns.shape[0]:
        raise DomainError("csv rows do not fill the axis grid")
    values = columns[:, -1].reshape(shape)
    return Dataset(axes=tuple(grids), values=values, metadata=metadata)
