"""Experiment configuration and runners behind the command line.

Every runner returns a plain dict report. Reports carry no timestamps, so an
identical config and seed give byte-identical JSON.
"""

from __future__ import annotations

import json
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata, resources
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .channel_fit import DEFAULT_FAULT_QUBITS, fit_p
from .circuit import Circuit, cnot_depth, estimate_runtime, gate_counts
from .code513 import ideal_prep_circuit, minus_logical_state
from .device import DeviceModel, NoiseModel, NoiseOptions, load_device, noise_from_device
from .protocol import hardware_circuits, run_hardware_protocol, run_ideal_protocol, IDEAL_WIDTH
from .qasm import load as load_qasm, serialize
from .quantum import as_density, fidelity
from .tomography import (
    Condition,
    build_calibration,
    collect,
    density_from_json,
    density_to_json,
    mitigate,
    reconstruct,
)
from .transpile import CouplingGraph, RoutedCircuit, fixtures, route, verify_equivalence, MAX_EQUIV_WIRES

EXPERIMENTS = (
    "prep",
    "prep-plus-idles",
    "prep-plus-stabilizer",
    "ideal-protocol",
    "hardware-protocol",
    "tomo",
    "fit",
    "route",
)
NOISE_KINDS = ("device", "depolarizing", "none")
REPORT_SCHEMA_VERSION = 1
_LAYOUT_FIXTURES = {
    "A": "melbourne-prep-depth6",
    "B": "melbourne-prep-depth4",
    "C": "melbourne-stab-ZXIXZ",
}


class ConfigError(ValueError):
    """Invalid experiment configuration (command-line exit code 2)."""


class NumericalError(RuntimeError):
    """A numerical step failed (command-line exit code 3)."""


@dataclass
class ExperimentConfig:
    experiment: str = "prep"
    device: str = "melbourne"
    layout: Any = "B"  # "A", "B", "C" or a list of device qubits
    shots: int = 8192
    seed: int = 0
    replicas: int = 3
    noise: str = "device"
    gate_noise: bool = True
    idle_noise: bool = True
    readout_noise: bool = True
    p1: float = 0.0  # depolarizing noise kind only
    p2: float = 0.0
    mitigation: bool = True
    fit: bool | None = None  # None: fit only for prep-plus-stabilizer
    fault_qubits: tuple = DEFAULT_FAULT_QUBITS
    idle_cycles: int = 106
    exact: bool = False
    circuit: str | None = None  # QASM file for tomo / route
    data_qubits: list | None = None
    condition_qubits: list = field(default_factory=list)
    condition_outcome: str = ""
    input: str | None = None  # density JSON or report for fit
    workers: int = 1
    out: str | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**{k.replace("-", "_"): v for k, v in data.items()})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {', '.join(NOISE_KINDS)}")
        if int(self.shots) <= 0:
            raise ConfigError("shots must be positive")
        if int(self.replicas) <= 0:
            raise ConfigError("replicas must be positive")
        if int(self.workers) <= 0:
            raise ConfigError("workers must be positive")
        if int(self.idle_cycles) < 0:
            raise ConfigError("idle_cycles must be nonnegative")
        for name in ("p1", "p2"):
            if not 0.0 <= float(getattr(self, name)) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if isinstance(self.layout, str):
            if self.layout not in _LAYOUT_FIXTURES:
                raise ConfigError("layout must be A, B, C or a list of device qubits")
        elif not isinstance(self.layout, (list, tuple)) or not all(isinstance(q, int) for q in self.layout):
            raise ConfigError("layout must be A, B, C or a list of device qubits")
        fq = tuple(self.fault_qubits)
        if len(fq) != 2 or fq[0] == fq[1] or not all(1 <= int(q) <= 5 for q in fq):
            raise ConfigError("fault_qubits must be two distinct data qubits numbered 1..5")
        self.fault_qubits = (int(fq[0]), int(fq[1]))
        if len(self.condition_qubits) != len(self.condition_outcome):
            raise ConfigError("condition_qubits and condition_outcome differ in length")
        for name in ("circuit", "input"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{name} file {path!r} does not exist")
        if self.experiment == "fit" and self.input is None:
            raise ConfigError("the fit experiment needs an input file (density JSON or report)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fault_qubits"] = list(self.fault_qubits)
        d["layout"] = list(self.layout) if not isinstance(self.layout, str) else self.layout
        d.pop("out")
        d.pop("workers")
        return d


# ---------------------------------------------------------------------------
# Building blocks


def _device(cfg: ExperimentConfig) -> DeviceModel:
    try:
        return load_device(cfg.device)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load device {cfg.device!r}: {exc}") from exc


def _noise(cfg: ExperimentConfig, device: DeviceModel, wires) -> NoiseModel | None:
    if cfg.noise == "none":
        return None
    if cfg.noise == "depolarizing":
        return NoiseModel.depolarizing(cfg.p1, cfg.p2)
    opts = NoiseOptions(gates=cfg.gate_noise, idle=cfg.idle_noise, readout=cfg.readout_noise)
    return noise_from_device(device, wires, opts)


def _prep_routed(cfg: ExperimentConfig, device: DeviceModel) -> RoutedCircuit:
    fx = fixtures()
    if device.name == "vigo":
        return fx["vigo-prep"]
    if isinstance(cfg.layout, str):
        if device.name != "melbourne":
            raise ConfigError("named layouts A/B/C refer to the melbourne device")
        # layout C shares its data placement with B
        return fx[_LAYOUT_FIXTURES["B" if cfg.layout == "C" else cfg.layout]]
    return _route_checked(ideal_prep_circuit(), device, cfg.layout)


def _route_checked(c: Circuit, device: DeviceModel, layout) -> RoutedCircuit:
    if len(layout) != c.num_qubits:
        raise ConfigError(f"layout has {len(layout)} qubits, the circuit needs {c.num_qubits}")
    try:
        return route(c, CouplingGraph.from_device(device), layout)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def with_idle_cycles(rc: RoutedCircuit, cycles: int) -> RoutedCircuit:
    """Append ``cycles`` rounds of one id gate per data wire plus a barrier."""
    c = rc.circuit.copy()
    data = list(rc.output_order())
    for _ in range(cycles):
        for w in data:
            c.id(w)
        c.barrier(*data)
    c.metadata["name"] = f"{rc.name}+{cycles}id"
    return RoutedCircuit(c, rc.wires, rc.initial_layout, rc.final_permutation, rc.swap_count, c.metadata["name"])


def _circuit_summary(rc: RoutedCircuit, device: DeviceModel) -> dict:
    return {
        "name": rc.name,
        "num_qubits": rc.circuit.num_qubits,
        "wires": list(rc.wires),
        "cnot_depth": cnot_depth(rc.circuit),
        "gate_counts": dict(sorted(gate_counts(rc.circuit).items())),
        "runtime_us": estimate_runtime(rc.circuit, device, rc.wires),
        "swap_count": rc.swap_count,
    }


def _stats(values) -> dict:
    v = [float(x) for x in values]
    return {
        "mean": float(np.mean(v)),
        "std": float(np.std(v, ddof=1)) if len(v) > 1 else 0.0,
        "values": v,
    }


def _replica_seeds(cfg: ExperimentConfig) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.replicas)]


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# ---------------------------------------------------------------------------
# Tomography-based experiments


def _tomo_replica(c, data, cond, noise, shots, seed, exact, mitigation, target):
    ds = collect(c, data, condition=cond, shots_per_setting=shots, noise=noise, seed=seed, exact=exact)
    rho = reconstruct(ds)
    out = {
        "accepted_fraction": float(np.mean(ds.accepted_fraction)),
        "fidelity": fidelity(rho, target) if target is not None else None,
        "rho": rho,
    }
    if mitigation and noise is not None and noise.readout:
        cal = build_calibration(noise, list(data) + list(cond.qubits), shots, seed=seed + 1, exact=exact)
        try:
            rho_m = reconstruct(mitigate(ds, cal))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(str(exc)) from exc
        out["rho_mitigated"] = rho_m
        out["fidelity_mitigated"] = fidelity(rho_m, target) if target is not None else None
    return out


def _tomography_report(cfg, device, rc: RoutedCircuit, cond: Condition, data, target) -> dict:
    noise = _noise(cfg, device, rc.wires)
    seeds = _replica_seeds(cfg)
    jobs = [(rc.circuit, data, cond, noise, cfg.shots, s, cfg.exact, cfg.mitigation, target) for s in seeds]
    results = _map(_tomo_replica, jobs, cfg.workers)
    metrics = {"accepted_fraction": _stats(r["accepted_fraction"] for r in results)}
    if target is not None:
        metrics["fidelity"] = _stats(r["fidelity"] for r in results)
        if "fidelity_mitigated" in results[0]:
            metrics["fidelity_mitigated"] = _stats(r["fidelity_mitigated"] for r in results)
    report: dict = {"metrics": metrics, "replica_seeds": seeds}
    best = "rho_mitigated" if "rho_mitigated" in results[0] else "rho"
    report["state"] = {"source": best, "replica": 0, "matrix": density_to_json(results[0][best])}
    want_fit = cfg.fit if cfg.fit is not None else cfg.experiment == "prep-plus-stabilizer"
    if want_fit and target is not None:
        fits = [fit_p(r[best], target, cfg.fault_qubits) for r in results]
        report["fit"] = {
            "fault_qubits": list(cfg.fault_qubits),
            "objective": "spectral",
            "source": best,
            "p_opt": _stats(f.p_opt for f in fits),
            "per_pauli_error_rate": _stats(f.per_pauli_error_rate for f in fits),
            "residual": _stats(f.residual for f in fits),
            "scan": [[p, r] for p, r in fits[0].scan],
        }
    return report


def _run_prep(cfg, device) -> dict:
    rc = _prep_routed(cfg, device)
    if cfg.experiment == "prep-plus-idles":
        rc = with_idle_cycles(rc, cfg.idle_cycles)
    body = _tomography_report(cfg, device, rc, Condition(), rc.output_order(), as_density(minus_logical_state()))
    return {"circuit": _circuit_summary(rc, device), **body}


def _run_prep_plus_stabilizer(cfg, device) -> dict:
    if device.name != "melbourne":
        raise ConfigError("prep-plus-stabilizer ships a melbourne fixture only")
    rc = fixtures()["melbourne-stab-ZXIXZ"]
    order = rc.output_order()
    cond = Condition((5, 6), "00")
    body = _tomography_report(cfg, device, rc, cond, order[:5], as_density(minus_logical_state()))
    return {"circuit": _circuit_summary(rc, device), **body}


def _run_tomo(cfg, device) -> dict:
    if cfg.circuit is None:
        return _run_prep(cfg, device)
    c = load_qasm(cfg.circuit)
    layout = list(range(c.num_qubits)) if isinstance(cfg.layout, str) else list(cfg.layout)
    if len(layout) != c.num_qubits or max(layout) >= device.num_qubits:
        raise ConfigError("layout does not match the circuit width or the device")
    rc = RoutedCircuit(c, tuple(layout), tuple(layout), tuple(layout), 0, Path(cfg.circuit).stem)
    data = cfg.data_qubits if cfg.data_qubits is not None else list(range(c.num_qubits))
    cond = Condition(tuple(cfg.condition_qubits), cfg.condition_outcome)
    target = as_density(minus_logical_state()) if len(data) == 5 else None
    body = _tomography_report(cfg, device, rc, cond, data, target)
    return {"circuit": _circuit_summary(rc, device), **body}


# ---------------------------------------------------------------------------
# Fit, route and protocol experiments


def _load_density(path: str):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        if "state" in data:
            data = data["state"]["matrix"]
        elif "matrix" in data:
            data = data["matrix"]
        else:
            raise ConfigError("input JSON has no density matrix")
    try:
        return density_from_json(data)
    except ValueError as exc:
        raise ConfigError(f"input is not a valid density matrix: {exc}") from exc


def _run_fit(cfg, device) -> dict:
    rho = _load_density(cfg.input)
    if rho.num_qubits != 5:
        raise ConfigError("fit needs a 5-qubit density matrix")
    target = as_density(minus_logical_state())
    res = fit_p(rho, target, cfg.fault_qubits)
    return {
        "metrics": {"fidelity": _stats([fidelity(rho, target)])},
        "fit": {
            "fault_qubits": list(res.fault_qubits),
            "objective": res.objective,
            "source": Path(cfg.input).name,
            "p_opt": _stats([res.p_opt]),
            "per_pauli_error_rate": _stats([res.per_pauli_error_rate]),
            "residual": _stats([res.residual]),
            "scan": [[p, r] for p, r in res.scan],
        },
    }


def _run_route(cfg, device) -> dict:
    c = load_qasm(cfg.circuit) if cfg.circuit is not None else ideal_prep_circuit()
    if isinstance(cfg.layout, str):
        if cfg.circuit is None and device.name == "melbourne":
            rc = _prep_routed(cfg, device)
            original = ideal_prep_circuit()
        else:
            raise ConfigError("route needs an explicit layout list for this circuit")
    else:
        original = c
        rc = _route_checked(c, device, cfg.layout)
    equivalent = None
    if rc.circuit.num_qubits <= MAX_EQUIV_WIRES and all(i.kind != "reset" and i.condition is None for i in original.instructions):
        equivalent = verify_equivalence(original, rc)
    qasm_text = serialize(rc.circuit)
    return {
        "circuit": _circuit_summary(rc, device),
        "metrics": {},
        "route": {
            "initial_layout": list(rc.initial_layout),
            "final_permutation": list(rc.final_permutation),
            "equivalent": equivalent,
            "qasm": qasm_text,
        },
    }


def _protocol_replica(kind, noise, noise_c1, shots, seed):
    if kind == "ideal-protocol":
        return run_ideal_protocol(noise, shots, seed).to_dict(include_state=False)
    return run_hardware_protocol(noise, shots, seed, noise_c1=noise_c1).to_dict(include_state=False)


def _protocol_layout(cfg, device, width: int) -> list[int]:
    if isinstance(cfg.layout, str):
        if width > device.num_qubits:
            raise ConfigError(f"{device.name} has fewer than {width} qubits")
        return list(range(width))
    if len(cfg.layout) < width:
        raise ConfigError(f"protocol needs a layout of {width} device qubits")
    return list(cfg.layout[:width])


def _run_protocol(cfg, device) -> dict:
    if cfg.experiment == "ideal-protocol":
        noise = _noise(cfg, device, _protocol_layout(cfg, device, IDEAL_WIDTH))
        noise_c1 = None
        circuits = {}
    else:
        circuits = hardware_circuits()
        noise = _noise(cfg, device, _protocol_layout(cfg, device, circuits["C0"].num_qubits))
        noise_c1 = _noise(cfg, device, _protocol_layout(cfg, device, circuits["C1"].num_qubits))
    seeds = _replica_seeds(cfg)
    results = _map(_protocol_replica, [(cfg.experiment, noise, noise_c1, cfg.shots, s) for s in seeds], cfg.workers)
    metrics = {
        key: _stats(r[key] for r in results)
        for key in ("accepted_fraction", "logical_fidelity", "conditioned_fidelity", "uncorrected_fidelity")
    }
    report = {"metrics": metrics, "replica_seeds": seeds, "protocol": results}
    if circuits:
        report["circuits"] = {
            name: {
                "num_qubits": c.num_qubits,
                "cnot_depth": cnot_depth(c),
                "gate_counts": dict(sorted(gate_counts(c).items())),
                "qasm": serialize(c),
            }
            for name, c in circuits.items()
        }
    return report


_RUNNERS = {
    "prep": _run_prep,
    "prep-plus-idles": _run_prep,
    "prep-plus-stabilizer": _run_prep_plus_stabilizer,
    "tomo": _run_tomo,
    "fit": _run_fit,
    "route": _run_route,
    "ideal-protocol": _run_protocol,
    "hardware-protocol": _run_protocol,
}


def _versions() -> dict:
    out = {"flagbench": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def _clean(x):
    """JSON-safe copy: NaN becomes None, tuples become lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return None if not np.isfinite(x) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one configured experiment and return its report."""
    cfg.validate()
    device = _device(cfg)
    try:
        body = _RUNNERS[cfg.experiment](cfg, device)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericalError(str(exc)) from exc
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "provenance": {
            "device": device.name,
            "device_sha256": device.source_sha256,
            "versions": _versions(),
        },
        **body,
    }
    return _clean(report)


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_schema() -> dict:
    text = (resources.files("flagbench") / "schemas" / "report.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, report_schema())


_FAMILIES = {
    "prep": "state",
    "prep-plus-idles": "state",
    "prep-plus-stabilizer": "state",
    "tomo": "state",
    "ideal-protocol": "protocol",
    "hardware-protocol": "protocol",
}


def _family(kind) -> str:
    return _FAMILIES.get(kind, kind)


def _with_final_fidelity(report: dict) -> dict:
    # mitigated when available, so mitigated and unmitigated runs line up in a diff
    metrics = report.get("metrics") or {}
    final = metrics.get("fidelity_mitigated") or metrics.get("fidelity")
    if final is None:
        return report
    return {**report, "metrics": {**metrics, "fidelity_final": final}}


def report_diff(a: dict, b: dict) -> str:
    """Side-by-side comparison of the numeric fields two reports share.

    Reports must come from the same experiment family: the state
    experiments (prep variants and tomo) compare with each other, as do the
    two protocols.
    """
    if _family(a.get("experiment")) != _family(b.get("experiment")):
        raise ConfigError(f"cannot compare a {a.get('experiment')!r} report with a {b.get('experiment')!r} report")
    rows = []

    def walk(x, y, path):
        if isinstance(x, dict) and isinstance(y, dict):
            for k in sorted(set(x) & set(y)):
                if k in ("values", "scan", "matrix", "qasm", "replica_seeds", "config", "protocol", "provenance"):
                    continue
                walk(x[k], y[k], f"{path}.{k}" if path else k)
        elif isinstance(x, (int, float)) and isinstance(y, (int, float)) and not isinstance(x, bool):
            rows.append((path, float(x), float(y)))

    walk(_with_final_fidelity(a), _with_final_fidelity(b), "")
    width = max((len(r[0]) for r in rows), default=10)
    lines = [f"{'field':<{width}}  {'a':>14}  {'b':>14}  {'delta':>14}"]
    for path, x, y in rows:
        lines.append(f"{path:<{width}}  {x:>14.6g}  {y:>14.6g}  {y - x:>+14.6g}")
    return "\n".join(lines) + "\n"
