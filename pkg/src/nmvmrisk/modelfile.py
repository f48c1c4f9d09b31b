"""JSON model files.

Schema::

    {
      "dimension": 4,
      "mixing": {"type": "gig", "lambda": -1.689, "chi": 1.38, "psi": 4.509e-05},
      "mu": [...], "gamma": [...],
      "sigma": [[...], ...],          # row-major, dimension x dimension
      "labels": ["BA", ...]           # optional, defaults to X1..Xn
    }

``mixing`` may instead be ``{"type": "degenerate", "theta0": 1.0}``.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

from .errors import DataError, ModelValidationError
from .mixing import from_spec, to_spec
from .nmvm import MultivariateNMVM

REQUIRED = ("dimension", "mixing", "mu", "gamma", "sigma")
EXAMPLE_MODEL = "mgh4_equities.json"


def _real(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelValidationError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ModelValidationError(f"{where}: value must be finite, got {value!r}")
    return float(value)


def _vector(doc: dict, name: str, n: int) -> list[float]:
    value = doc[name]
    if not isinstance(value, list):
        raise ModelValidationError(f"{name}: expected a list of {n} numbers")
    if len(value) != n:
        raise ModelValidationError(f"{name}: has length {len(value)}, expected dimension {n}")
    return [_real(v, f"{name}[{i}]") for i, v in enumerate(value)]


def model_from_dict(doc: dict) -> MultivariateNMVM:
    """Validate a parsed model document and build the model."""
    if not isinstance(doc, dict):
        raise ModelValidationError("model file must contain a JSON object at top level")
    missing = [k for k in REQUIRED if k not in doc]
    if missing:
        raise ModelValidationError(f"missing required field(s): {', '.join(missing)}")
    unknown = sorted(set(doc) - set(REQUIRED) - {"labels", "description"})
    if unknown:
        raise ModelValidationError(f"unknown field(s): {', '.join(unknown)}")
    n = doc["dimension"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ModelValidationError(f"dimension: expected a positive integer, got {n!r}")
    mu = _vector(doc, "mu", n)
    gamma = _vector(doc, "gamma", n)
    sigma = doc["sigma"]
    if not isinstance(sigma, list) or len(sigma) != n:
        raise ModelValidationError(f"sigma: expected {n} rows")
    rows = []
    for i, row in enumerate(sigma):
        if not isinstance(row, list) or len(row) != n:
            raise ModelValidationError(f"sigma[{i}]: expected a row of {n} numbers")
        rows.append([_real(v, f"sigma[{i}][{j}]") for j, v in enumerate(row)])
    mixing_doc = doc["mixing"]
    if not isinstance(mixing_doc, dict):
        raise ModelValidationError("mixing: expected an object with a 'type' field")
    for key, value in mixing_doc.items():
        if key != "type":
            _real(value, f"mixing.{key}")
    mixing = from_spec(mixing_doc)
    labels = doc.get("labels") or ()
    if labels:
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise ModelValidationError("labels: expected a list of strings")
        if len(labels) != n:
            raise ModelValidationError(f"labels: has length {len(labels)}, expected dimension {n}")
    return MultivariateNMVM(mu, gamma, rows, mixing, tuple(labels))


def load_model(path) -> MultivariateNMVM:
    """Read and validate a model file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot read model file ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return model_from_dict(doc)
    except ModelValidationError as exc:
        raise ModelValidationError(f"{path}: {exc}") from exc


def model_to_dict(model: MultivariateNMVM) -> dict:
    return {
        "dimension": model.dimension,
        "mixing": to_spec(model.mixing),
        "mu": [float(v) for v in model.mu],
        "gamma": [float(v) for v in model.gamma],
        "sigma": [[float(v) for v in row] for row in model.sigma],
        "labels": list(model.labels),
    }


def dump_model(model: MultivariateNMVM, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def example_model_path() -> Path:
    """Path of the shipped four-stock MGH example."""
    return Path(str(resources.files("nmvmrisk") / "data" / EXAMPLE_MODEL))


def load_example_model() -> MultivariateNMVM:
    return load_model(example_model_path())
