"""File formats: expansions and configs as JSON, trajectories as CSV plus a JSON sidecar.

Writes are atomic (temp file + rename) and deterministic, so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from .expansion import ForceExpansion, SolutionExpansion, _Expansion
from .exponents import ExponentSequence, generate_semigroup, parse_exponents
from .solver import ForceModel, SolverConfig, Trajectory
from .spectral import GevreyParams, SpectralField, basis, field_from_dict, field_to_dict


# mkstemp creates 0600 files; give outputs the usual umask-derived mode
_UMASK = os.umask(0)
os.umask(_UMASK)


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def atomic_write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps(obj))


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------- small types


def gevrey_to_dict(p: GevreyParams) -> dict:
    return {"alpha": str(p.alpha), "sigma": p.sigma}


def gevrey_from_dict(d) -> GevreyParams:
    return GevreyParams(Fraction(str(d.get("alpha", "1/2"))), float(d.get("sigma", 0.0)))


def sequence_to_dict(seq: ExponentSequence) -> dict:
    return {"gammas": [str(g) for g in seq.gammas], "cutoff_mu": str(seq.cutoff)}


# ---------------------------------------------------------------- expansions


def expansion_to_dict(exp: _Expansion) -> dict:
    kind = "force" if isinstance(exp, ForceExpansion) else "solution"
    d = sequence_to_dict(exp.seq)
    d["kind"] = kind
    d["field_cutoff"] = exp.cutoff
    d["terms"] = [{"mu": str(m), "field": field_to_dict(x)} for m, x in zip(exp.seq.mus, exp.terms)]
    return d


def expansion_from_dict(d: dict, kind: str | None = None) -> _Expansion:
    """Parse an expansion object; exponents absent from ``terms`` get zero fields."""
    kind = kind or d.get("kind", "force")
    if kind not in ("force", "solution"):
        raise ValueError(f"unknown expansion kind {kind!r}")
    gammas = parse_exponents(d["gammas"])
    seq = generate_semigroup(gammas, d["cutoff_mu"])
    terms = d.get("terms", [])
    given: dict[Fraction, SpectralField] = {}
    for t in terms:
        mu = Fraction(str(t["mu"]))
        if mu not in seq.mus:
            raise ValueError(f"exponent {mu} is not in the semigroup generated by {d['gammas']} up to {seq.cutoff}")
        if mu in given:
            raise ValueError(f"exponent {mu} listed twice")
        given[mu] = field_from_dict(t["field"])
    cutoff = max([int(d.get("field_cutoff", 1))] + [f.cutoff for f in given.values()])
    fields = tuple(given.get(m, SpectralField(cutoff)).with_cutoff(cutoff) for m in seq.mus)
    cls = ForceExpansion if kind == "force" else SolutionExpansion
    return cls(seq, fields)


def save_expansion(path, exp: _Expansion) -> Path:
    return atomic_write_json(path, expansion_to_dict(exp))


def load_expansion(path, kind: str | None = None) -> _Expansion:
    return expansion_from_dict(read_json(path), kind)


# ---------------------------------------------------------------- solver objects


def force_model_to_dict(F: ForceModel) -> dict:
    return {
        "expansion": None if F.expansion is None else expansion_to_dict(F.expansion),
        "T0": F.T0,
        "mode": F.mode,
        "shift": F.shift,
        "tail": None if F.tail is None else field_to_dict(F.tail),
        "tail_exponent": F.tail_exponent,
    }


def force_model_from_dict(d: dict) -> ForceModel:
    return ForceModel(
        None if d.get("expansion") is None else expansion_from_dict(d["expansion"], "force"),
        float(d.get("T0", 1.0)),
        d.get("mode", "frozen_before"),
        float(d.get("shift", 0.0)),
        None if d.get("tail") is None else field_from_dict(d["tail"]),
        None if d.get("tail_exponent") is None else float(d["tail_exponent"]),
    )


def solver_config_to_dict(c: SolverConfig) -> dict:
    return {
        "cutoff": c.cutoff,
        "dt": c.dt,
        "t_end": c.t_end,
        "scheme": c.scheme,
        "record": c.record if isinstance(c.record, str) else list(c.record),
        "per_decade": c.per_decade,
        "t_start": c.t_start,
    }


def solver_config_from_dict(d: dict) -> SolverConfig:
    rec = d.get("record", "geometric")
    return SolverConfig(
        cutoff=int(d["cutoff"]),
        dt=float(d.get("dt", 1e-2)),
        t_end=float(d.get("t_end", 1.0)),
        scheme=d.get("scheme", "if_rk4"),
        record=rec if isinstance(rec, str) else tuple(rec),
        per_decade=int(d.get("per_decade", 40)),
        t_start=float(d.get("t_start", 0.0)),
    )


# ---------------------------------------------------------------- trajectories


def _mode_label(k) -> str:
    return "_".join(str(int(c)) for c in k)


def trajectory_csv(traj: Trajectory) -> str:
    b = basis(traj.cutoff)
    header = ["t"]
    for k in b.wavevectors:
        lab = _mode_label(k)
        for comp in "xyz":
            header += [f"{lab}:re_{comp}", f"{lab}:im_{comp}"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for t, c in zip(traj.times, traj.coeffs):
        row = np.empty(2 * c.size)
        flat = c.reshape(-1)
        row[0::2], row[1::2] = flat.real, flat.imag
        w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
    return buf.getvalue()


def save_trajectory(path, traj: Trajectory, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``path`` (CSV) and ``path`` with suffix ``.json`` (sidecar with the content hash)."""
    path = Path(path)
    atomic_write_text(path, trajectory_csv(traj))
    side = {
        "csv": path.name,
        "sha256": sha256_file(path),
        "kind": traj.kind,
        "config": solver_config_to_dict(traj.config),
        "force": force_model_to_dict(traj.force),
        "u0": field_to_dict(traj.u0),
        "xi": None if traj.xi is None else field_to_dict(traj.xi),
    }
    if extra:
        side["extra"] = extra
    side_path = atomic_write_json(path.with_suffix(".json"), side)
    return path, side_path


def load_trajectory(path, verify: bool = True) -> Trajectory:
    path = Path(path)
    side = read_json(path.with_suffix(".json"))
    if verify and sha256_file(path) != side["sha256"]:
        raise ValueError(f"content hash mismatch for {path}")
    config = solver_config_from_dict(side["config"])
    b = basis(config.cutoff)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    expected = 1 + 6 * b.size
    if len(header) != expected:
        raise ValueError(f"{path}: {len(header)} columns, expected {expected} for cutoff {config.cutoff}")
    for i, k in enumerate(b.wavevectors):
        if not header[1 + 6 * i].startswith(_mode_label(k) + ":"):
            raise ValueError(f"{path}: column order does not match the cutoff-{config.cutoff} basis")
    times = data[:, 0]
    vals = data[:, 1:]
    coeffs = (vals[:, 0::2] + 1j * vals[:, 1::2]).reshape(len(times), b.size, 3)
    return Trajectory(
        times,
        coeffs,
        config,
        force_model_from_dict(side["force"]),
        field_from_dict(side["u0"]),
        side.get("kind", "nse"),
        None if side.get("xi") is None else field_from_dict(side["xi"]),
    )
