"""Scenario files: flat ``key = value`` text grouped under section headers.

Example::

    [model]
    type = jaynes_cummings
    w0 = 1
    w1 = 1
    J = 1
    n_max = 4

    [evolution]
    tau = 0.5

    [initial]
    rho_B = maximally_mixed

    [run]
    m_max = 20

Matrices referenced from a scenario (``h_A``, ``rho_B = file.json`` ...)
are JSON arrays of rows of ``[re, im]`` pairs; vectors are arrays of
``[re, im]`` pairs. Relative paths resolve against the scenario file.
"""
from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .engine import check_density_matrix, pure
from .errors import InvalidDensityMatrix, MpeaError, ScenarioError
from .models import (
    BipartiteSystem, build_axial_symmetry, build_generic, build_jaynes_cummings, singlet_triplet_basis,
)

MODELS = ("jaynes_cummings", "axial", "generic")
READOUTS = ("none", "qst", "mqft")
MODES = ("exact", "sample")
NAMED_STATES = ("maximally_mixed",) + singlet_triplet_basis().labels

ALLOWED = {
    "model": {"type", "w0", "w1", "j", "n_max", "h_a", "h_b", "h_ab", "phi_a", "basis"},
    "evolution": {"tau"},
    "initial": {"rho_b"},
    "run": {"m", "m_max", "n_traj", "workers"},
    "readout": {"method", "n_bits", "m", "b", "m_b", "copies", "qk_mode", "two_basis"},
    "sampling": {"mode", "seed"},
    "output": {"dir"},
}

BUNDLED = ("jc_fig3", "jc_tplus_digits", "axial_fig4")


# -- JSON matrix I/O --------------------------------------------------------

def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    if isinstance(data, dict):
        data = data["matrix"]
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("expected rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def vector_from_json(data) -> np.ndarray:
    if isinstance(data, dict):
        data = data["vector"]
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[-1] != 2:
        raise ValueError("expected a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


# -- scenario ---------------------------------------------------------------

@dataclass
class Scenario:
    model: str
    system: BipartiteSystem
    tau: float
    rho_B: np.ndarray
    initial_label: str
    m: int | None = None
    m_max: int | None = None
    n_traj: int = 10_000
    workers: int = 1
    readout: str = "none"
    n_bits: int = 8
    readout_m: int = 1
    b: float | None = None
    m_b: int = 1
    copies: int | None = None
    qk_mode: str = "validation"
    two_basis: bool = True
    mode: str = "exact"
    seed: int | None = None
    out_dir: Path | None = None
    source: Path | None = None
    params: dict = field(default_factory=dict)

    @property
    def stochastic(self) -> bool:
        return self.mode == "sample"


def _get(section, key, conv, default=None, required=False, name=None):
    if key not in section:
        if required:
            raise ScenarioError(f"missing required key '{name or key}'")
        return default
    raw = section[key].strip()
    try:
        val = conv(raw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"key '{name or key}': cannot parse {raw!r} ({exc})") from None
    if isinstance(val, float) and not math.isfinite(val):
        raise ScenarioError(f"key '{name or key}' must be finite, got {raw!r}")
    return val


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _load_json(base: Path, raw: str, key: str):
    path = (base / raw).resolve()
    if not path.is_file():
        raise ScenarioError(f"key '{key}': file {raw!r} does not exist")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"key '{key}': {raw!r} is not valid JSON ({exc})") from None


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("mpea") / "scenarios" / f"{name}.ini"))


def resolve_path(name: str | Path) -> Path:
    """A scenario path, or the name of a bundled scenario."""
    p = Path(name)
    if p.is_file():
        return p
    if str(name) in BUNDLED:
        return bundled_path(str(name))
    raise ScenarioError(f"scenario {str(name)!r} not found (bundled: {', '.join(BUNDLED)})")


def parse_scenario_text(text: str, base: Path | None = None, source: Path | None = None) -> Scenario:
    base = base or Path.cwd()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from None
    for sec in cp.sections():
        if sec not in ALLOWED:
            raise ScenarioError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in ALLOWED[sec]:
                raise ScenarioError(f"unknown key '{sec}.{key}'")
    for sec in ("model", "evolution"):
        if sec not in cp:
            raise ScenarioError(f"missing section [{sec}]")
    mdl = cp["model"]
    sect = lambda name: cp[name] if name in cp else {}

    kind = _get(mdl, "type", str, required=True, name="model.type")
    params = {}
    try:
        if kind == "jaynes_cummings":
            params = {
                "w0": _get(mdl, "w0", float, 1.0, name="model.w0"),
                "w1": _get(mdl, "w1", float, 1.0, name="model.w1"),
                "J": _get(mdl, "j", float, 1.0, name="model.J"),
                "n_max": _get(mdl, "n_max", int, 4, name="model.n_max"),
            }
            system = build_jaynes_cummings(**params)
        elif kind == "axial":
            params = {"J": _get(mdl, "j", float, 1.0, name="model.J")}
            system = build_axial_symmetry(**params)
        elif kind == "generic":
            mats = {}
            for key in ("h_a", "h_b", "h_ab"):
                raw = _get(mdl, key, str, required=True, name=f"model.{key}")
                mats[key] = matrix_from_json(_load_json(base, raw, f"model.{key}"))
            raw = _get(mdl, "phi_a", str, required=True, name="model.phi_A")
            phi = vector_from_json(_load_json(base, raw, "model.phi_A"))
            basis = None
            if "basis" in mdl:
                basis = matrix_from_json(_load_json(base, mdl["basis"].strip(), "model.basis"))
            system = build_generic(mats["h_a"], mats["h_b"], mats["h_ab"], phi, basis=basis)
        else:
            raise ScenarioError(f"key 'model.type': expected one of {MODELS}, got {kind!r}")
    except ScenarioError:
        raise
    except (MpeaError, ValueError, KeyError) as exc:
        raise ScenarioError(f"section [model]: {exc}") from None

    tau = _get(cp["evolution"], "tau", float, required=True, name="evolution.tau")

    init = sect("initial")
    label = _get(init, "rho_b", str, "maximally_mixed", name="initial.rho_B")
    try:
        if label == "maximally_mixed":
            rho = np.eye(system.dim_B, dtype=complex) / system.dim_B
        elif label in NAMED_STATES:
            if system.basis_labels is None or label not in system.basis_labels:
                raise ScenarioError(f"key 'initial.rho_B': state {label!r} is not defined for model {kind}")
            k = system.basis_labels.index(label)
            rho = pure(system.basis[:, k])
        else:
            data = _load_json(base, label, "initial.rho_B")
            arr = np.asarray(data["matrix"] if isinstance(data, dict) else data, dtype=float)
            rho = pure(vector_from_json(data)) if arr.ndim == 2 else matrix_from_json(data)
        rho = check_density_matrix(rho, system.dim_B)
    except InvalidDensityMatrix as exc:
        raise ScenarioError(f"key 'initial.rho_B': {exc}") from None

    run = sect("run")
    ro = sect("readout")
    smp = sect("sampling")
    out = sect("output")
    sc = Scenario(
        model=kind, system=system, tau=tau, rho_B=rho, initial_label=label, params=params,
        m=_get(run, "m", int, name="run.m"),
        m_max=_get(run, "m_max", int, name="run.m_max"),
        n_traj=_get(run, "n_traj", int, 10_000, name="run.n_traj"),
        workers=_get(run, "workers", int, 1, name="run.workers"),
        readout=_get(ro, "method", str, "none", name="readout.method"),
        n_bits=_get(ro, "n_bits", int, 8, name="readout.n_bits"),
        readout_m=_get(ro, "m", int, 1, name="readout.m"),
        b=_get(ro, "b", float, name="readout.b"),
        m_b=_get(ro, "m_b", int, 1, name="readout.m_b"),
        copies=_get(ro, "copies", int, name="readout.copies"),
        qk_mode=_get(ro, "qk_mode", str, "validation", name="readout.qk_mode"),
        two_basis=_get(ro, "two_basis", _bool, True, name="readout.two_basis"),
        mode=_get(smp, "mode", str, "exact", name="sampling.mode"),
        seed=_get(smp, "seed", int, name="sampling.seed"),
        out_dir=None if "dir" not in out else Path(out["dir"].strip()),
        source=source,
    )
    validate(sc)
    return sc


def validate(sc: Scenario):
    if sc.readout not in READOUTS:
        raise ScenarioError(f"key 'readout.method': expected one of {READOUTS}, got {sc.readout!r}")
    if sc.mode not in MODES:
        raise ScenarioError(f"key 'sampling.mode': expected one of {MODES}, got {sc.mode!r}")
    if sc.qk_mode not in ("validation", "blind"):
        raise ScenarioError(f"key 'readout.qk_mode': expected validation or blind, got {sc.qk_mode!r}")
    for key, val, lo in (("run.m", sc.m, 1), ("run.m_max", sc.m_max, 0), ("run.n_traj", sc.n_traj, 1),
                         ("run.workers", sc.workers, 1), ("readout.n_bits", sc.n_bits, 1),
                         ("readout.m", sc.readout_m, 1), ("readout.m_b", sc.m_b, 1),
                         ("readout.copies", sc.copies, 1)):
        if val is not None and val < lo:
            raise ScenarioError(f"key '{key}' must be >= {lo}, got {val}")
    if sc.b is not None and sc.b < 0:
        raise ScenarioError(f"key 'readout.b' must be >= 0, got {sc.b}")


def load_scenario(name: str | Path) -> Scenario:
    path = resolve_path(name)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {str(path)!r}: {exc}") from None
    return parse_scenario_text(text, base=path.parent, source=path)
