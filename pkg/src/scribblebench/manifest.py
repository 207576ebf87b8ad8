"""Dataset manifests: one YAML file per dataset listing its label volumes.

Example::

    name: acdc
    root: labels            # relative to the manifest file
    classes: [background, rv, myo, lv]
    slice_axis: 2           # optional
    config: {erosion_radius: 1}   # optional ScribbleConfig overrides
    cases:
      - patient001_frame01.nii.gz
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

_KEYS = {"name", "root", "classes", "slice_axis", "config", "cases"}


@dataclass
class DatasetManifest:
    name: str
    root: Path
    cases: list[str]
    classes: list[str] = field(default_factory=lambda: ["background"])
    slice_axis: int | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.root = Path(self.root)
        if not self.classes or self.classes[0] != "background":
            raise ValueError("class 0 must be named 'background'")
        if self.slice_axis is not None and self.slice_axis not in (0, 1, 2):
            raise ValueError(f"slice_axis must be 0, 1 or 2, got {self.slice_axis}")
        root = self.root.resolve()
        for case in self.cases:
            resolved = (root / case).resolve()
            if root != resolved and root not in resolved.parents:
                raise ValueError(f"case {case!r} escapes the dataset root")

    def case_path(self, case: str) -> Path:
        return self.root / case

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        with open(path) as fh:
            values = yaml.safe_load(fh)
        if not isinstance(values, dict):
            raise ValueError(f"{path}: manifest must be a mapping")
        unknown = sorted(set(values) - _KEYS)
        if unknown:
            raise ValueError(f"{path}: unknown manifest keys: {', '.join(unknown)}")
        missing = sorted({"name", "cases"} - set(values))
        if missing:
            raise ValueError(f"{path}: missing manifest keys: {', '.join(missing)}")
        root = path.parent / values.get("root", ".")
        return cls(
            name=str(values["name"]),
            root=root,
            cases=[str(c) for c in values["cases"]],
            classes=[str(c) for c in values.get("classes", ["background"])],
            slice_axis=values.get("slice_axis"),
            config=dict(values.get("config") or {}),
        )

    def dump(self, path) -> None:
        path = Path(path)
        try:
            root = str(self.root.resolve().relative_to(path.parent.resolve()))
        except ValueError:
            root = str(self.root.resolve())
        values = {"name": self.name, "root": root, "classes": list(self.classes)}
        if self.slice_axis is not None:
            values["slice_axis"] = self.slice_axis
        if self.config:
            values["config"] = dict(self.config)
        values["cases"] = list(self.cases)
        path.write_text(yaml.safe_dump(values, sort_keys=False))
