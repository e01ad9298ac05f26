"""Rebuild the LIBSVM ``a9a`` encoding from the raw UCI Adult training file.

The encoding is 123 binary indicators (Platt's scheme): each categorical
attribute becomes one indicator per category, age / fnlwgt / education-num /
hours-per-week are binned into quintiles, and capital-gain / capital-loss are
split into zero and nonzero. Missing values (``?``) set no indicator.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

QUINTILE = "quintile"
ZERO_NONZERO = "zero_nonzero"

# (name, kind or category list), in the Adult column order.
ADULT_SCHEMA: list[tuple[str, object]] = [
    ("age", QUINTILE),
    ("workclass", ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov",
                   "Local-gov", "State-gov", "Without-pay", "Never-worked"]),
    ("fnlwgt", QUINTILE),
    ("education", ["Bachelors", "Some-college", "11th", "HS-grad", "Prof-school",
                   "Assoc-acdm", "Assoc-voc", "9th", "7th-8th", "12th", "Masters",
                   "1st-4th", "10th", "Doctorate", "5th-6th", "Preschool"]),
    ("education-num", QUINTILE),
    ("marital-status", ["Married-civ-spouse", "Divorced", "Never-married",
                        "Separated", "Widowed", "Married-spouse-absent",
                        "Married-AF-spouse"]),
    ("occupation", ["Tech-support", "Craft-repair", "Other-service", "Sales",
                    "Exec-managerial", "Prof-specialty", "Handlers-cleaners",
                    "Machine-op-inspct", "Adm-clerical", "Farming-fishing",
                    "Transport-moving", "Priv-house-serv", "Protective-serv",
                    "Armed-Forces"]),
    ("relationship", ["Wife", "Own-child", "Husband", "Not-in-family",
                      "Other-relative", "Unmarried"]),
    ("race", ["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"]),
    ("sex", ["Female", "Male"]),
    ("capital-gain", ZERO_NONZERO),
    ("capital-loss", ZERO_NONZERO),
    ("hours-per-week", QUINTILE),
    ("native-country", ["United-States", "Cambodia", "England", "Puerto-Rico",
                        "Canada", "Germany", "Outlying-US(Guam-USVI-etc)", "India",
                        "Japan", "Greece", "South", "China", "Cuba", "Iran",
                        "Honduras", "Philippines", "Italy", "Poland", "Jamaica",
                        "Vietnam", "Mexico", "Portugal", "Ireland", "France",
                        "Dominican-Republic", "Laos", "Ecuador", "Taiwan", "Haiti",
                        "Columbia", "Hungary", "Guatemala", "Nicaragua", "Scotland",
                        "Thailand", "Yugoslavia", "El-Salvador", "Trinadad&Tobago",
                        "Peru", "Hong", "Holand-Netherlands"]),
]


def _width(kind) -> int:
    if kind == QUINTILE:
        return 5
    if kind == ZERO_NONZERO:
        return 2
    return len(kind)


A9A_RAW_DIM = sum(_width(kind) for _, kind in ADULT_SCHEMA)  # 123


def quintile_edges(values: np.ndarray) -> np.ndarray:
    """Four strictly increasing cut points at the 20/40/60/80% quantiles.

    A cut point that collides with the previous one is moved up to the next
    distinct observed value, so heavily tied attributes still get 5 bins.
    """
    distinct = np.unique(values)
    edges = []
    for q in np.quantile(values, [0.2, 0.4, 0.6, 0.8]):
        if edges and q <= edges[-1]:
            above = distinct[distinct > edges[-1]]
            q = above[0] if above.size else edges[-1] + 1.0
        edges.append(float(q))
    return np.asarray(edges)


def _read_rows(lines: Iterable[str]) -> list[list[str]]:
    rows = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("|"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 15:
            raise ValueError(f"expected 15 comma-separated fields, got {len(fields)}: {line!r}")
        rows.append(fields)
    return rows


def adult_to_libsvm(lines: Iterable[str], out: TextIO) -> int:
    """Encode raw Adult records as LIBSVM lines with labels -1/+1.

    Returns the number of records written.
    """
    rows = _read_rows(lines)
    edges = {}
    for col, (name, kind) in enumerate(ADULT_SCHEMA):
        if kind == QUINTILE:
            vals = np.array([float(r[col]) for r in rows if r[col] != "?"])
            edges[col] = quintile_edges(vals)

    for r in rows:
        label = "+1" if r[14].rstrip(".") == ">50K" else "-1"
        feats = []
        offset = 1
        for col, (name, kind) in enumerate(ADULT_SCHEMA):
            raw = r[col]
            if raw != "?":
                if kind == QUINTILE:
                    feats.append(offset + int(np.searchsorted(edges[col], float(raw), side="right")))
                elif kind == ZERO_NONZERO:
                    feats.append(offset + (float(raw) != 0.0))
                else:
                    feats.append(offset + kind.index(raw))
            offset += _width(kind)
        out.write(label + "".join(f" {j}:1" for j in feats) + "\n")
    return len(rows)


def bundled_a9a_path() -> Path:
    """Path of the a9a file shipped with the package (rebuilt from Adult)."""
    return Path(str(resources.files("zomgt") / "data" / "a9a"))
