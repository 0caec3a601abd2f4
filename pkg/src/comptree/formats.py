"""On-disk formats: dataset manifest, per-node CSVs and JSON artifacts.

All files are UTF-8 with ``\\n`` line endings; floats are written with the
shortest round-trip representation so reruns are byte-identical. See
``FORMATS.md`` for the schemas.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .arborescence import TreeStructure
from .edge_model import EdgeParams, RootParams
from .errors import CompTreeError, DimensionMismatch
from .simplex import CompositionSample, validate_rows


class DataValidationError(CompTreeError):
    """A dataset on disk violates the manifest or simplex constraints."""


def _f(x) -> float:
    return float(x)


def dump_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_node_csv(path, rows: np.ndarray) -> None:
    d = rows.shape[1]
    buf = io.StringIO()
    buf.write(",".join(f"part_{r + 1}" for r in range(d)) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def read_node_csv(path, name: str, dim: int) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataValidationError(f"node {name!r}: {path} is empty")
        if len(header) != dim:
            raise DataValidationError(f"node {name!r}: header has {len(header)} columns, manifest says {dim}")
        rows = []
        for line_no, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != dim:
                raise DataValidationError(f"node {name!r}, row {line_no}: expected {dim} values, got {len(rec)}")
            try:
                rows.append([float(v) for v in rec])
            except ValueError as exc:
                raise DataValidationError(f"node {name!r}, row {line_no}: {exc}") from None
    return np.array(rows, dtype=np.float64).reshape(-1, dim)


def write_dataset(out_dir, samples, names=None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = names or [f"node_{j + 1}" for j in range(len(samples))]
    nodes = []
    for name, s in zip(names, samples):
        fname = f"{name}.csv"
        write_node_csv(out / fname, s.rows)
        nodes.append({"name": name, "file": fname, "dim": s.d})
    manifest = {"n": samples[0].n, "nodes": nodes}
    dump_json(manifest, out / "manifest.json")
    return manifest


def read_dataset(data_dir) -> tuple[list[str], list[CompositionSample]]:
    """Load and validate every node listed in ``manifest.json``.

    Raises :class:`DataValidationError` naming the offending node and row.
    ``OSError`` propagates for missing files.
    """
    root = Path(data_dir)
    manifest = load_json(root / "manifest.json")
    try:
        n = int(manifest["n"])
        entries = [(str(e["name"]), str(e["file"]), int(e["dim"])) for e in manifest["nodes"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataValidationError(f"malformed manifest: {exc}") from None
    if not entries:
        raise DataValidationError("manifest lists no nodes")
    names, samples = [], []
    for j, (name, fname, dim) in enumerate(entries):
        rows = read_node_csv(root / fname, name, dim)
        if rows.shape[0] != n:
            raise DataValidationError(f"node {name!r}: {rows.shape[0]} rows, manifest says {n}")
        try:
            rows = validate_rows(rows)
        except CompTreeError as exc:
            raise DataValidationError(f"node {name!r}: {exc}") from None
        names.append(name)
        samples.append(CompositionSample(j, rows))
    return names, samples


def _parents_by_name(tree: TreeStructure, names) -> list:
    return [None if k is None else names[k] for k in tree.parent]


def tree_from_names(names, parents) -> TreeStructure:
    index = {name: j for j, name in enumerate(names)}
    try:
        return TreeStructure(tuple(None if q is None else index[q] for q in parents))
    except KeyError as exc:
        raise DimensionMismatch(f"unknown parent name {exc}") from None


def _edge_block(child, parent, prm: EdgeParams) -> dict:
    return {
        "child": child,
        "parent": parent,
        "omega0": _f(prm.omega0),
        "omega1": _f(prm.omega1),
        "eta": prm.eta.tolist(),
        "M": prm.M.tolist(),
    }


def truth_to_json(truth, names, spec=None) -> dict:
    out = {
        "p": truth.tree.p,
        "node_names": list(names),
        "parents": _parents_by_name(truth.tree, names),
        "edges": [],
        "roots": [],
    }
    for j, k in enumerate(truth.tree.parent):
        prm = truth.params[j]
        if k is None:
            out["roots"].append({"node": names[j], "eta": prm.eta.tolist()})
        else:
            out["edges"].append(_edge_block(names[j], names[k], prm))
    if spec is not None:
        out["generator"] = {
            "structure": spec.structure,
            "n_roots": spec.n_roots,
            "dims": list(spec.dims),
            "n": spec.n,
            "concentration": spec.concentration,
            "zero_inflation": spec.zero_inflation,
            "omega1_range": list(spec.omega1_range),
            "seed": spec.seed,
        }
    return out


def tree_artifact(tree: TreeStructure, table, names, alpha: float) -> dict:
    """TreeArtifact: the chosen forest with the fitted parameters of each node."""
    out = {
        "p": tree.p,
        "node_names": list(names),
        "parents": _parents_by_name(tree, names),
        "alpha": _f(alpha),
        "edges": [],
        "roots": [],
    }
    for j, k in enumerate(tree.parent):
        if k is None:
            out["roots"].append({
                "node": names[j],
                "eta": table.root_params[j].eta.tolist(),
                "root_risk": _f(table.root_risk[j]),
            })
        else:
            block = _edge_block(names[j], names[k], table.edge_params[(j, k)])
            block["edge_risk"] = _f(table.edge_risk[j, k])
            out["edges"].append(block)
    return out


def params_from_artifact(doc: dict) -> tuple[TreeStructure, dict]:
    """Rebuild the tree and per-node parameters from a TreeArtifact or truth document."""
    names = doc["node_names"]
    index = {name: j for j, name in enumerate(names)}
    tree = tree_from_names(names, doc["parents"])
    params: dict = {}
    for blk in doc["roots"]:
        params[index[blk["node"]]] = RootParams(np.array(blk["eta"], dtype=np.float64))
    for blk in doc["edges"]:
        params[index[blk["child"]]] = EdgeParams(
            float(blk["omega0"]), np.array(blk["eta"], dtype=np.float64), np.array(blk["M"], dtype=np.float64)
        )
    return tree, params


def cv_report_json(report, names, k_folds, fold_seed) -> dict:
    return {
        "k_folds": k_folds,
        "fold_seed": fold_seed,
        "alpha_grid": [_f(a) for a in report.alpha_grid],
        "mean_validation_risk": [
            {"alpha": _f(a), "risk": _f(report.mean_validation_risk[a])} for a in report.alpha_grid
        ],
        "per_fold_risk": report.per_fold_risk.tolist(),
        "selected_alpha": _f(report.selected_alpha),
        "final_tree": {"node_names": list(names), "parents": _parents_by_name(report.final_tree, names)},
        "folds": report.folds.tolist(),
    }


def risk_table_json(table, names) -> dict:
    """Full pairwise risk table (diagonal entries are ``null``)."""
    er = [[None if j == k else _f(table.edge_risk[j, k]) for k in range(table.p)] for j in range(table.p)]
    return {"node_names": list(names), "edge_risk": er, "root_risk": table.root_risk.tolist()}
