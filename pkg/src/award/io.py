"""Reading and writing matrices, partitions, dendrograms and datasets."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import DataMatrix, Dendrogram, Merge, Partition, partition_from_labels


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_matrix_csv(path, label_column: str | int | None = None,
                    header: bool | None = None) -> tuple[DataMatrix, Partition | None]:
    """Load one entity per row. ``header=None`` sniffs whether the first row
    is non-numeric. ``label_column`` (name or index) is split off as truth."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if header is None:
        header = not all(_is_number(c) for c in rows[0])
    names = [c.strip() for c in rows[0]] if header else None
    body = rows[1:] if header else rows
    if not body:
        raise ValueError(f"{path}: header but no data rows")
    width = len(body[0])
    if any(len(r) != width for r in body):
        raise ValueError(f"{path}: rows have unequal lengths")
    truth = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if names is None or label_column not in names:
                raise ValueError(f"{path}: no column named {label_column!r}")
            idx = names.index(label_column)
        else:
            idx = int(label_column) % width
        truth = partition_from_labels([r[idx].strip() for r in body])
        body = [r[:idx] + r[idx + 1:] for r in body]
        if names is not None:
            names = names[:idx] + names[idx + 1:]
    try:
        values = np.array([[float(c) for c in r] for r in body])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value ({exc})") from None
    return DataMatrix(values, names), truth


def write_matrix_csv(path, m: DataMatrix) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(m.names)
        for row in m.values:
            w.writerow([repr(float(x)) for x in row])


def write_partition_csv(path, s: Partition) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entity_id", "cluster"])
        w.writerows(enumerate(s.labels.tolist()))


def read_partition_csv(path) -> Partition:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    order = sorted(rows, key=lambda r: int(r["entity_id"]))
    return partition_from_labels([int(r["cluster"]) for r in order])


def write_linkage_csv(path, d: Dendrogram) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["left", "right", "cost", "size"])
        for mg in d.merges:
            w.writerow([mg.left, mg.right, repr(mg.cost), mg.size])


def read_linkage_csv(path, n_leaves: int, leaf_sizes=None) -> Dendrogram:
    with open(path, newline="") as fh:
        merges = [Merge(int(r["left"]), int(r["right"]), float(r["cost"]), int(r["size"]))
                  for r in csv.DictReader(fh)]
    return Dendrogram(tuple(merges), n_leaves, None if leaf_sizes is None else tuple(leaf_sizes))


def to_newick(d: Dendrogram, leaf_names=None) -> str:
    """Newick text of the forest; each internal node is annotated with its
    merge cost, and ``!`` marks merges cheaper than one of their children.

    Branch lengths are height differences, so inverted merges would get a
    negative length; those are clamped at zero and carry the marker.
    """
    names = [str(n) for n in leaf_names] if leaf_names is not None else [
        f"L{i}" for i in range(d.n_leaves)]
    if len(names) != d.n_leaves:
        raise ValueError("one name per leaf is required")
    inverted = set(d.inversions())
    text = {i: _quote(n) for i, n in enumerate(names)}
    height = {i: 0.0 for i in range(d.n_leaves)}
    roots = set(range(d.n_leaves))
    for i, mg in enumerate(d.merges):
        node = d.n_leaves + i
        parts = [f"{text[c]}:{max(mg.cost - height[c], 0.0):.6g}" for c in (mg.left, mg.right)]
        label = f"m{i}_{mg.cost:.6g}" + ("!" if i in inverted else "")
        text[node] = f"({','.join(parts)}){label}"
        height[node] = mg.cost
        roots -= {mg.left, mg.right}
        roots.add(node)
    ordered = sorted(roots)
    if len(ordered) == 1:
        return text[ordered[0]] + ";"
    return "(" + ",".join(text[r] for r in ordered) + ");"


def _quote(name: str) -> str:
    if any(ch in name for ch in " ():;,[]'"):
        return "'" + name.replace("'", "''") + "'"
    return name


def save_dataset(ds, directory, stem: str | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and the ``<stem>.json`` sidecar; return both paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or f"{ds.name.replace(' ', '_').replace('%', 'pct')}_seed{ds.config.seed}"
    csv_path, json_path = directory / f"{stem}.csv", directory / f"{stem}.json"
    write_matrix_csv(csv_path, ds.matrix)
    json_path.write_text(json.dumps(ds.metadata(), indent=1))
    return csv_path, json_path


def load_dataset(csv_path) -> tuple[DataMatrix, dict]:
    """Matrix plus the sidecar metadata (empty dict when there is none)."""
    csv_path = Path(csv_path)
    m, _ = read_matrix_csv(csv_path, header=True)
    side = csv_path.with_suffix(".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return m, meta
