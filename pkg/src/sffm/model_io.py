"""Model files and result tables for the batch front-end.

A model file is a JSON document with a ``model`` section (generator rows and
the two rate vectors), at most one of an ``init`` section (decay rate,
density values at zero, point mass) or a ``tandem`` section (the certified
rate-proportional family), and an optional ``analysis`` section holding
command defaults.  Sections are kept as plain Python values so parsing and
serialization round-trip losslessly.

Result tables are rectangular decimal tables with a metadata header; CSV
output prints 17 significant digits and '#'-prefixed metadata lines, so
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import InitialDistribution, SffmModel, TandemParams, build_tandem_model

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModelFile:
    """Parsed model document; sections are plain dicts (JSON values)."""

    schema: int = SCHEMA_VERSION
    model: dict | None = None
    init: dict | None = None
    tandem: dict | None = None
    analysis: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema version {self.schema}")
        if self.init is not None and self.tandem is not None:
            raise ValidationError("at most one of init/tandem may be present")
        if self.tandem is not None and self.model is not None:
            raise ValidationError("tandem files must not carry a model section")
        if self.tandem is None and self.model is None:
            raise ValidationError("model section is required")

    def to_json_dict(self) -> dict:
        doc: dict = {"schema": self.schema}
        if self.model is not None:
            doc["model"] = self.model
        if self.init is not None:
            doc["init"] = self.init
        if self.tandem is not None:
            doc["tandem"] = self.tandem
        if self.analysis:
            doc["analysis"] = self.analysis
        return doc

    def build(self) -> tuple[SffmModel, InitialDistribution | None]:
        """Materialize the model and, when present, the initial distribution."""
        if self.tandem is not None:
            t = self.tandem
            try:
                params = TandemParams(
                    b=float(t["b"]),
                    beta=float(t["beta"]),
                    gamma=float(t["gamma"]),
                    T_pm=np.array(t["T_pm"], dtype=float),
                    T_mp=np.array(t["T_mp"], dtype=float),
                    abs_r=np.array(t["abs_r"], dtype=float),
                    r_signs=np.array(t["r_signs"], dtype=float),
                    c_signs=np.array(t["c_signs"], dtype=float),
                    P_minus=np.array(t["P_minus"], dtype=float),
                    nu_minus_weights=(
                        np.array(t["nu_minus_weights"], dtype=float)
                        if "nu_minus_weights" in t
                        else None
                    ),
                )
            except KeyError as exc:
                raise ValidationError(f"tandem section missing key {exc}") from None
            return build_tandem_model(params)

        m = self.model
        try:
            model = SffmModel(
                T=np.array(m["T"], dtype=float),
                c=np.array(m["c"], dtype=float),
                r=np.array(m["r"], dtype=float),
            )
        except KeyError as exc:
            raise ValidationError(f"model section missing key {exc}") from None
        if "n" in m and int(m["n"]) != model.n:
            raise ValidationError(
                f"declared n={m['n']} does not match generator size {model.n}"
            )
        init = None
        if self.init is not None:
            i = self.init
            try:
                init = InitialDistribution(
                    lam=float(i["lambda"]),
                    nu0=np.array(i["nu0"], dtype=float),
                    point_mass=np.array(i["P"], dtype=float),
                )
            except KeyError as exc:
                raise ValidationError(f"init section missing key {exc}") from None
        return model, init


def parse_model_file(source) -> ModelFile:
    """Parse a model document from a path, JSON string, or open stream."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
        if "\n" not in text and not text.lstrip().startswith("{"):
            # path-like argument: must exist
            path = Path(text)
            if not path.exists():
                raise FileNotFoundError(f"model file not found: {text}")
            text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("model file must be a JSON object")
    unknown = set(doc) - {"schema", "model", "init", "tandem", "analysis"}
    if unknown:
        raise ValidationError(f"unknown sections: {sorted(unknown)}")
    return ModelFile(
        schema=int(doc.get("schema", SCHEMA_VERSION)),
        model=doc.get("model"),
        init=doc.get("init"),
        tandem=doc.get("tandem"),
        analysis=doc.get("analysis", {}),
    )


def serialize_model_file(mf: ModelFile) -> str:
    return json.dumps(mf.to_json_dict(), sort_keys=True, indent=2) + "\n"


def content_hash(mf: ModelFile) -> str:
    canonical = json.dumps(mf.to_json_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass
class ResultTable:
    """Rectangular table of decimal values with reproducible CSV output."""

    columns: tuple[str, ...]
    rows: list[tuple[float, ...]]
    metadata: dict[str, str]

    def add(self, *values: float) -> None:
        if len(values) != len(self.columns):
            raise ValueError(
                f"row has {len(values)} values, table has {len(self.columns)} columns"
            )
        self.rows.append(tuple(float(v) for v in values))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}: {self.metadata[key]}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())
