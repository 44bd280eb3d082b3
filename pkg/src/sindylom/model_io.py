"""JSON persistence for identified models.

Layout (keys sorted, two-space indent)::

    {"version": 1,
     "library": {"n_state", "m_input", "descriptors": [...]},
     "phi": [...],
     "xi": {"shape": [p, n], "entries": [[row, col, value], ...]},
     "provenance": {...}}

Only nonzero coefficients are stored.  Floats are written with Python's
shortest round-trip repr, so reloading reproduces every bit.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .library import BasisDescriptor, LibrarySpec
from .loss import LossReport
from .rollout import SindyModel
from .stlsq import CoefficientMatrix

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _descriptor_to_dict(d: BasisDescriptor) -> dict:
    if d.kind == "constant":
        return {"kind": "constant"}
    if d.kind == "monomial":
        return {"kind": "monomial", "exponents": list(d.exponents)}
    return {"kind": "rbf", "over": list(d.over), "center_slots": list(d.center_slots),
            "scale_slots": list(d.scale_slots)}


def _descriptor_from_dict(d: dict) -> BasisDescriptor:
    kind = d["kind"]
    if kind == "constant":
        return BasisDescriptor("constant")
    if kind == "monomial":
        return BasisDescriptor("monomial", exponents=tuple(int(e) for e in d["exponents"]))
    if kind == "rbf":
        return BasisDescriptor("rbf", over=tuple(d["over"]),
                               center_slots=tuple(d["center_slots"]),
                               scale_slots=tuple(d["scale_slots"]))
    raise ModelFormatError(f"unknown basis kind {kind!r}")


def _clean(obj):
    """Make provenance JSON-safe (numpy scalars, tuples, non-finite floats)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def model_to_dict(m: SindyModel, report: LossReport | None = None,
                  provenance: dict | None = None) -> dict:
    spec = m.spec
    entries = [[int(i), int(j), float(m.Xi[i, j])] for i, j in zip(*np.nonzero(m.Xi))]
    prov = {"package_version": __version__, "basis_names": spec.names()}
    if report is not None:
        prov["loss_report"] = report.to_dict()
    if provenance:
        prov.update(provenance)
    return {
        "version": FORMAT_VERSION,
        "library": {
            "n_state": spec.n_state,
            "m_input": spec.m_input,
            "descriptors": [_descriptor_to_dict(d) for d in spec.descriptors],
        },
        "phi": [float(v) for v in m.phi],
        "xi": {"shape": [spec.p, spec.n_state], "entries": entries},
        "provenance": _clean(prov),
    }


def model_from_dict(doc: dict) -> SindyModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must hold a JSON object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version!r}")
    try:
        lib = doc["library"]
        spec = LibrarySpec(tuple(_descriptor_from_dict(d) for d in lib["descriptors"]),
                           int(lib["n_state"]), int(lib["m_input"]))
        phi = np.array(doc["phi"], dtype=float).reshape(-1)
        p, n = (int(v) for v in doc["xi"]["shape"])
        entries = doc["xi"]["entries"]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None
    except ValueError as exc:
        raise ModelFormatError(f"invalid library: {exc}") from None
    if (p, n) != (spec.p, spec.n_state):
        raise ModelFormatError(
            f"Xi shape {(p, n)} does not match library ({spec.p}, {spec.n_state})")
    if phi.size != spec.phi_dim:
        raise ModelFormatError(f"phi has {phi.size} values, library needs {spec.phi_dim}")
    Xi = np.zeros((p, n))
    for e in entries:
        i, j, v = int(e[0]), int(e[1]), float(e[2])
        if not (0 <= i < p and 0 <= j < n):
            raise ModelFormatError(f"coefficient index ({i}, {j}) out of range")
        Xi[i, j] = v
    if not (np.isfinite(Xi).all() and np.isfinite(phi).all()):
        raise ModelFormatError("model contains non-finite numbers")
    return SindyModel(spec, phi, CoefficientMatrix(Xi))


def dumps_model(m: SindyModel, report: LossReport | None = None,
                provenance: dict | None = None) -> str:
    return json.dumps(model_to_dict(m, report, provenance), indent=2, sort_keys=True,
                      allow_nan=False) + "\n"


def save_model(m: SindyModel, path, report: LossReport | None = None,
               provenance: dict | None = None) -> None:
    Path(path).write_text(dumps_model(m, report, provenance), encoding="utf-8")


def load_model(path) -> SindyModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: malformed JSON ({exc})") from None
    return model_from_dict(doc)


def load_provenance(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8")).get("provenance", {})
