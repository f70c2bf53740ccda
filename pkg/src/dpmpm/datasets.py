"""Synthetic stand-ins for the ACS samples used in the demonstrations.

The real microdata are not redistributable, so these helpers build schemas
with the same variables and levels and draw records from a fixed latent
class truth.
"""

from __future__ import annotations

import numpy as np

from .catdata import (
    WILDCARD,
    CategoricalDataset,
    DisallowedPatternSet,
    MixtureTruth,
    Schema,
    generate_from_mixture,
    inject_mcar,
)

AGEP_LEVELS = ("16", "17", "[18, 24]", "[25, 35]", "[36, 50]", "[51, 70]", "(70, )")
MAR_LEVELS = ("Married", "Widowed", "Divorced", "Separated", "Never married or age<15")
SCHL_LEVELS = (
    "Up to K0",
    "Some K12, no diploma",
    "High school diploma or GED",
    "Some college, no degree",
    "Associate's degree",
    "Bachelor's degree",
    "Master's degree",
    "Professional degree",
    "Doctorate degree",
)
SEX_LEVELS = ("Male", "Female")
WKL_LEVELS = ("Within the last 12 months", "1-5 years ago", "Over 5 years ago or never worked")

DEGREES = ("Bachelor's degree", "Doctorate degree", "Master's degree", "Professional degree")


def acs_sample1_schema() -> Schema:
    """AGEP, MAR, SCHL, SEX, WKL with d = (7, 5, 9, 2, 3)."""
    return Schema.from_levels([
        ("AGEP", AGEP_LEVELS),
        ("MAR", MAR_LEVELS),
        ("SCHL", SCHL_LEVELS),
        ("SEX", SEX_LEVELS),
        ("WKL", WKL_LEVELS),
    ])


def acs_sample2_schema() -> Schema:
    """MAR, SEX, WKL with d = (5, 2, 3)."""
    return acs_sample1_schema().subset(["MAR", "SEX", "WKL"])


def age_degree_zeros(schema: Schema) -> DisallowedPatternSet:
    """The eight AGEP x SCHL structural zeros (ages 16-17 with a degree)."""
    rows = []
    iage, ischl = schema.index("AGEP"), schema.index("SCHL")
    for age in ("16", "17"):
        for degree in DEGREES:
            pat = [WILDCARD] * schema.p
            pat[iage] = schema.code("AGEP", age)
            pat[ischl] = schema.code("SCHL", degree)
            rows.append(pat)
    return DisallowedPatternSet(schema, np.array(rows))


def random_truth(schema: Schema, n_classes: int, seed: int,
                 concentration: float = 1.0, weight_concentration: float = 3.0) -> MixtureTruth:
    """Dirichlet-drawn latent class truth; pmfs are floored away from zero."""
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.full(n_classes, weight_concentration))
    comps = []
    for _ in range(n_classes):
        comp = []
        for d in schema.d:
            v = rng.dirichlet(np.full(int(d), concentration)) + 0.02
            comp.append(v / v.sum())
        comps.append(tuple(comp))
    weights = weights / weights.sum()
    return MixtureTruth(weights, tuple(comps))


def acs_sample1(n: int = 1000, seed: int = 2016, mcar: float | None = None,
                mcar_seed: int = 30) -> tuple[CategoricalDataset, DisallowedPatternSet, MixtureTruth]:
    schema = acs_sample1_schema()
    mcz = age_degree_zeros(schema)
    truth = random_truth(schema, 6, seed)
    data = generate_from_mixture(truth, n, schema, seed + 1, mcz=mcz)
    if mcar:
        data = inject_mcar(data, mcar, mcar_seed)
    return data, mcz, truth


def acs_sample2(n: int = 1000, seed: int = 2016, mcar: float | None = None,
                mcar_seed: int = 30) -> tuple[CategoricalDataset, MixtureTruth]:
    schema = acs_sample2_schema()
    truth = random_truth(schema, 4, seed)
    data = generate_from_mixture(truth, n, schema, seed + 1)
    if mcar:
        data = inject_mcar(data, mcar, mcar_seed)
    return data, truth
