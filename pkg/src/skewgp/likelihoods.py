"""Translate raw observations into canonical likelihood blocks.

Every supported observation type reduces to one of two blocks on the
latent values f at the n training inputs:

* numeric block: density  phi_mr(Y - C f; R)
* probit block:  mass     Phi_ma(Z + W f; Sigma)

Numeric values use indicator (or general linear) selector rows with
R = noise^2 I.  Binary labels give W = diag(2y - 1), Z = 0, Sigma = I.
A preference duel (winner i over loser j) gives the row
(+1/noise at i, -1/noise at j).  Ordinal categories map to one row at
the boundary categories and to a near-perfectly anticorrelated pair of
rows for interior categories (correlation -1 + 1e-6; an exactly singular
Sigma is outside the conjugate family).  Valid/non-valid outcomes emit a
numeric row plus a one-sided probit row, or a single opposite-signed
probit row.

The dataset JSON schema is
``{"inputs": [[...]], "observations": [{"type": ..., ...}]}`` with
per-type fields: num(index|row, value), class(index, label),
pref(winner, loser), ordinal(index, category), valid(index, valid,
value?).  Optional top-level fields: "noise", "ordinal_spec"
({"thresholds", "noise"}), "threshold".
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .linalg import mvn_logpdf
from .mvncdf import log_mvn_cdf

ORDINAL_PAIR_EPS = 1e-6
EXACT_NOISE_JITTER = 1e-6


@dataclass(frozen=True)
class NumericBlock:
    y: np.ndarray
    c: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        r = np.atleast_2d(np.asarray(self.r, dtype=float))
        for name, val in (("y", y), ("c", c), ("r", r)):
            object.__setattr__(self, name, val)
        if c.shape[0] != y.size or r.shape != (y.size, y.size):
            raise InputError("numeric block shapes inconsistent")

    @property
    def size(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class ProbitBlock:
    z: np.ndarray
    w: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        for name, val in (("z", z), ("w", w), ("sigma", sigma)):
            object.__setattr__(self, name, val)
        if w.shape[0] != z.size or sigma.shape != (z.size, z.size):
            raise InputError("probit block shapes inconsistent")

    @property
    def size(self) -> int:
        return self.z.size


@dataclass(frozen=True)
class ObservationSet:
    """Mixed observations on n inputs; at least one block present."""

    n: int
    numeric: NumericBlock | None = None
    probit: ProbitBlock | None = None

    def __post_init__(self):
        if self.numeric is None and self.probit is None:
            raise InputError("at least one observation block is required")
        if self.numeric is not None and self.numeric.c.shape[1] != self.n:
            raise InputError("numeric selector columns must equal n")
        if self.probit is not None and self.probit.w.shape[1] != self.n:
            raise InputError("probit weight columns must equal n")

    @property
    def m_r(self) -> int:
        return self.numeric.size if self.numeric is not None else 0

    @property
    def m_a(self) -> int:
        return self.probit.size if self.probit is not None else 0

    def to_dict(self) -> dict:
        d: dict = {"n": self.n}
        if self.numeric is not None:
            d["numeric"] = {
                "y": self.numeric.y.tolist(),
                "c": self.numeric.c.tolist(),
                "r": self.numeric.r.tolist(),
            }
        if self.probit is not None:
            d["probit"] = {
                "z": self.probit.z.tolist(),
                "w": self.probit.w.tolist(),
                "sigma": self.probit.sigma.tolist(),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObservationSet":
        num = None
        if "numeric" in d:
            nb = d["numeric"]
            num = NumericBlock(
                y=np.asarray(nb["y"], dtype=float),
                c=np.asarray(nb["c"], dtype=float).reshape(len(nb["y"]), d["n"]),
                r=np.asarray(nb["r"], dtype=float),
            )
        pro = None
        if "probit" in d:
            pb = d["probit"]
            pro = ProbitBlock(
                z=np.asarray(pb["z"], dtype=float),
                w=np.asarray(pb["w"], dtype=float).reshape(len(pb["z"]), d["n"]),
                sigma=np.asarray(pb["sigma"], dtype=float),
            )
        return cls(n=int(d["n"]), numeric=num, probit=pro)


@dataclass(frozen=True)
class OrdinalSpec:
    """Category cut points b_1 < ... < b_{r-1} and the shared noise scale."""

    thresholds: np.ndarray
    noise: float

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.thresholds, dtype=float))
        object.__setattr__(self, "thresholds", th)
        if th.size < 1 or np.any(np.diff(th) <= 0.0):
            raise InputError("thresholds must be strictly increasing, length >= 1")
        if self.noise <= 0.0:
            raise InputError("ordinal noise must be positive")

    @property
    def n_categories(self) -> int:
        return self.thresholds.size + 1


def _n_inputs(x) -> int:
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = np.asarray(x, dtype=float)
    return x.shape[0] if x.ndim > 1 else x.size


def _checked_noise(noise: float) -> float:
    if noise < 0.0:
        raise InputError("noise must be nonnegative")
    if noise == 0.0:
        warnings.warn(
            "noise = 0 replaced by jitter 1e-6 (exact interpolation)",
            RuntimeWarning,
        )
        return EXACT_NOISE_JITTER
    return float(noise)


def numeric_block(x, pairs, noise: float) -> ObservationSet:
    """Numeric observations: pairs of (selector, value).

    A selector may be an input index (indicator row) or a length-n vector
    defining a linear functional of f.
    """
    n = _n_inputs(x)
    noise = _checked_noise(noise)
    rows, values = [], []
    for sel, value in pairs:
        if isinstance(sel, (int, np.integer)):
            if not 0 <= sel < n:
                raise InputError(f"selector index {sel} out of range")
            row = np.zeros(n)
            row[sel] = 1.0
        else:
            row = np.asarray(sel, dtype=float)
            if row.shape != (n,):
                raise InputError("selector rows must have length n")
        rows.append(row)
        values.append(float(value))
    if not rows:
        raise InputError("numeric_block needs at least one observation")
    m = len(rows)
    return ObservationSet(
        n=n,
        numeric=NumericBlock(
            y=np.array(values), c=np.array(rows), r=noise**2 * np.eye(m)
        ),
    )


def classification_block(x, labels) -> ObservationSet:
    """Binary labels in {-1, +1} or {0, 1}; one per input row."""
    n = _n_inputs(x)
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise InputError("need exactly one label per input row")
    uniq = set(np.unique(labels).tolist())
    if uniq <= {0, 1}:
        signs = 2.0 * labels - 1.0
    elif uniq <= {-1, 1}:
        signs = labels.astype(float)
    else:
        raise InputError(f"labels must be in {{-1,+1}} or {{0,1}}, got {sorted(uniq)}")
    return ObservationSet(
        n=n,
        probit=ProbitBlock(z=np.zeros(n), w=np.diag(signs), sigma=np.eye(n)),
    )


def preference_block(x, duels, noise: float) -> ObservationSet:
    """Pairwise duels (winner index, loser index) over the training inputs."""
    n = _n_inputs(x)
    noise = _checked_noise(noise)
    rows = []
    for winner, loser in duels:
        winner, loser = int(winner), int(loser)
        if winner == loser:
            raise InputError(f"degenerate duel ({winner}, {winner})")
        if not (0 <= winner < n and 0 <= loser < n):
            raise InputError(f"duel ({winner}, {loser}) out of range")
        row = np.zeros(n)
        row[winner] = 1.0 / noise
        row[loser] = -1.0 / noise
        rows.append(row)
    if not rows:
        raise InputError("preference_block needs at least one duel")
    m = len(rows)
    return ObservationSet(
        n=n, probit=ProbitBlock(z=np.zeros(m), w=np.array(rows), sigma=np.eye(m))
    )


def ordinal_block(x, categories, spec: OrdinalSpec) -> ObservationSet:
    """Ordered categories in 1..r against the cut points in ``spec``.

    Boundary categories produce a single one-sided row; interior ones a
    pair of rows sharing one noise variable, encoded with pair
    correlation -1 + eps.
    """
    n = _n_inputs(x)
    categories = np.asarray(categories, dtype=int)
    if categories.shape != (n,):
        raise InputError("need exactly one category per input row")
    r = spec.n_categories
    if np.any(categories < 1) or np.any(categories > r):
        raise InputError(f"categories must lie in 1..{r}")
    sv = spec.noise
    b = spec.thresholds
    z_rows, w_rows = [], []
    pair_starts = []
    for i, cat in enumerate(categories):
        w_lo = np.zeros(n)
        if cat == 1:
            w_lo[i] = -1.0 / sv
            z_rows.append(b[0] / sv)
            w_rows.append(w_lo)
        elif cat == r:
            w_lo[i] = 1.0 / sv
            z_rows.append(-b[r - 2] / sv)
            w_rows.append(w_lo)
        else:
            pair_starts.append(len(z_rows))
            w_up = np.zeros(n)
            w_up[i] = -1.0 / sv
            z_rows.append(b[cat - 1] / sv)
            w_rows.append(w_up)
            w_dn = np.zeros(n)
            w_dn[i] = 1.0 / sv
            z_rows.append(-b[cat - 2] / sv)
            w_rows.append(w_dn)
    m = len(z_rows)
    sigma = np.eye(m)
    for j in pair_starts:
        sigma[j, j + 1] = sigma[j + 1, j] = -1.0 + ORDINAL_PAIR_EPS
    return ObservationSet(
        n=n, probit=ProbitBlock(z=np.array(z_rows), w=np.array(w_rows), sigma=sigma)
    )


def valid_invalid_block(x, outcomes, threshold: float, noise: float) -> ObservationSet:
    """Valid outcomes carry a numeric value plus the one-sided validity row;
    non-valid outcomes carry only the opposite-signed row."""
    n = _n_inputs(x)
    noise = _checked_noise(noise)
    num_pairs = []
    z_rows, w_rows = [], []
    for item in outcomes:
        idx, valid = int(item[0]), bool(item[1])
        value = item[2] if len(item) > 2 else None
        if not 0 <= idx < n:
            raise InputError(f"outcome index {idx} out of range")
        row = np.zeros(n)
        if valid:
            if value is None:
                raise InputError("valid outcomes must carry a value")
            num_pairs.append((idx, float(value)))
            row[idx] = 1.0 / noise
            z_rows.append(-threshold / noise)
        else:
            if value is not None:
                raise InputError("non-valid outcomes must not carry a value")
            row[idx] = -1.0 / noise
            z_rows.append(threshold / noise)
        w_rows.append(row)
    if not w_rows:
        raise InputError("valid_invalid_block needs at least one outcome")
    m = len(w_rows)
    probit = ProbitBlock(z=np.array(z_rows), w=np.array(w_rows), sigma=np.eye(m))
    if num_pairs:
        numeric = numeric_block(n, num_pairs, noise).numeric
        return ObservationSet(n=n, numeric=numeric, probit=probit)
    return ObservationSet(n=n, probit=probit)


def merge(*blocks: ObservationSet) -> ObservationSet:
    """Stack observation sets; R and Sigma become block diagonal."""
    blocks = [b for b in blocks if b is not None]
    if not blocks:
        raise InputError("merge needs at least one ObservationSet")
    n = blocks[0].n
    if any(b.n != n for b in blocks):
        raise InputError("all blocks must share the same number of inputs n")
    numerics = [b.numeric for b in blocks if b.numeric is not None]
    probits = [b.probit for b in blocks if b.probit is not None]
    numeric = None
    if numerics:
        numeric = NumericBlock(
            y=np.concatenate([nb.y for nb in numerics]),
            c=np.vstack([nb.c for nb in numerics]),
            r=_block_diag([nb.r for nb in numerics]),
        )
    probit = None
    if probits:
        probit = ProbitBlock(
            z=np.concatenate([pb.z for pb in probits]),
            w=np.vstack([pb.w for pb in probits]),
            sigma=_block_diag([pb.sigma for pb in probits]),
        )
    return ObservationSet(n=n, numeric=numeric, probit=probit)


def _block_diag(mats) -> np.ndarray:
    sizes = [m.shape[0] for m in mats]
    out = np.zeros((sum(sizes), sum(sizes)))
    at = 0
    for m in mats:
        k = m.shape[0]
        out[at : at + k, at : at + k] = m
        at += k
    return out


def log_likelihood(obs: ObservationSet, f: np.ndarray) -> float:
    """Canonical mixed log likelihood at latent values f."""
    f = np.asarray(f, dtype=float)
    if f.shape != (obs.n,):
        raise InputError(f"f must have length {obs.n}")
    total = 0.0
    if obs.numeric is not None:
        nb = obs.numeric
        total += mvn_logpdf(nb.y - nb.c @ f, nb.r)
    if obs.probit is not None:
        pb = obs.probit
        total += log_mvn_cdf(pb.z + pb.w @ f, pb.sigma)
    return float(total)


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------

_OBS_TYPES = ("num", "class", "pref", "ordinal", "valid")


def validate_dataset(data: dict) -> dict:
    """Schema checks for the dataset JSON structure; returns ``data``."""
    if not isinstance(data, dict):
        raise InputError("dataset must be a JSON object")
    if "inputs" not in data or "observations" not in data:
        raise InputError('dataset needs "inputs" and "observations"')
    inputs = np.asarray(data["inputs"], dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise InputError('"inputs" must be a nonempty 2-d array')
    n = inputs.shape[0]
    if not isinstance(data["observations"], list) or not data["observations"]:
        raise InputError('"observations" must be a nonempty list')
    for k, ob in enumerate(data["observations"]):
        t = ob.get("type")
        if t not in _OBS_TYPES:
            raise InputError(f"observation {k}: unknown type {t!r}")
        if t == "num" and "row" not in ob:
            _require(ob, k, "index", "value")
        elif t == "num":
            if len(ob["row"]) != n:
                raise InputError(f"observation {k}: row must have length {n}")
            _require(ob, k, "value")
        elif t == "class":
            _require(ob, k, "index", "label")
        elif t == "pref":
            _require(ob, k, "winner", "loser")
        elif t == "ordinal":
            _require(ob, k, "index", "category")
        elif t == "valid":
            _require(ob, k, "index", "valid")
        for key in ("index", "winner", "loser"):
            if key in ob and not 0 <= int(ob[key]) < n:
                raise InputError(f"observation {k}: {key} out of range")
    return data


def _require(ob: dict, k: int, *fields):
    for fld in fields:
        if fld not in ob:
            raise InputError(f'observation {k}: missing field "{fld}"')


def load_dataset(path) -> dict:
    with open(path) as fh:
        return validate_dataset(json.load(fh))


def save_dataset(data: dict, path):
    validate_dataset(data)
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, indent=1)
        fh.write("\n")


def dataset_to_observations(data: dict) -> tuple[np.ndarray, ObservationSet]:
    """Build (inputs, ObservationSet) from a validated dataset dict."""
    validate_dataset(data)
    x = np.asarray(data["inputs"], dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    noise = float(data.get("noise", 1.0))
    threshold = float(data.get("threshold", 0.0))
    ordinal_spec = None
    if "ordinal_spec" in data:
        ordinal_spec = OrdinalSpec(
            thresholds=np.asarray(data["ordinal_spec"]["thresholds"], dtype=float),
            noise=float(data["ordinal_spec"].get("noise", noise)),
        )
    num_pairs, labels_items, duels, ordinal_items, valid_items = [], [], [], [], []
    for ob in data["observations"]:
        t = ob["type"]
        if t == "num":
            sel = np.asarray(ob["row"], dtype=float) if "row" in ob else int(ob["index"])
            num_pairs.append((sel, float(ob["value"])))
        elif t == "class":
            labels_items.append((int(ob["index"]), int(ob["label"])))
        elif t == "pref":
            duels.append((int(ob["winner"]), int(ob["loser"])))
        elif t == "ordinal":
            ordinal_items.append((int(ob["index"]), int(ob["category"])))
        elif t == "valid":
            valid_items.append(
                (int(ob["index"]), bool(ob["valid"]), ob.get("value"))
            )
    parts = []
    if num_pairs:
        parts.append(numeric_block(n, num_pairs, noise))
    if labels_items:
        idx = [i for i, _ in labels_items]
        if len(set(idx)) != len(idx):
            raise InputError("duplicate class label for one input")
        lab = np.zeros(n, dtype=int)
        seen = np.zeros(n, dtype=bool)
        for i, y in labels_items:
            lab[i] = y
            seen[i] = True
        if not np.all(seen):
            raise InputError("class datasets must label every input row")
        parts.append(classification_block(n, lab))
    if duels:
        parts.append(preference_block(n, duels, noise))
    if ordinal_items:
        if ordinal_spec is None:
            raise InputError('ordinal observations need "ordinal_spec"')
        if len(ordinal_items) != n:
            raise InputError("ordinal datasets must categorize every input row")
        cats = np.zeros(n, dtype=int)
        for i, c in ordinal_items:
            cats[i] = c
        parts.append(ordinal_block(n, cats, ordinal_spec))
    if valid_items:
        parts.append(valid_invalid_block(n, valid_items, threshold, noise))
    return x, merge(*parts)
