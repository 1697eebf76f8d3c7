"""Graph ingestion: citation files, the canonical text format, synthetic
generators, splits and feature masking."""

from __future__ import annotations

import logging
import math
import os
import pickle
from pathlib import Path

import numpy as np

from .graph import Graph

log = logging.getLogger(__name__)

KNOWN_DATASETS = ("cora", "citeseer")


class DatasetFormatError(ValueError):
    pass


# ------------------------------------------------------------ citation


def load_citation(content_path, cites_path) -> Graph:
    """Read a ``.content`` / ``.cites`` pair (LINQS distribution).

    Content rows are ``<id> <d binary attributes> <label>``; cites rows are
    ``<cited id> <citing id>``. Class ids follow first occurrence in the
    content file.
    """
    ids, rows, label_names = {}, [], []
    class_ids = {}
    labels = []
    dim = None
    with open(content_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise DatasetFormatError(f"{content_path}:{lineno}: expected '<id> <attrs...> <label>'")
            attrs = parts[1:-1]
            if dim is None:
                dim = len(attrs)
            elif len(attrs) != dim:
                raise DatasetFormatError(
                    f"{content_path}:{lineno}: {len(attrs)} attributes, expected {dim}"
                )
            try:
                rows.append([float(a) for a in attrs])
            except ValueError as exc:
                raise DatasetFormatError(f"{content_path}:{lineno}: {exc}") from None
            if parts[0] in ids:
                raise DatasetFormatError(f"{content_path}:{lineno}: duplicate node id {parts[0]!r}")
            ids[parts[0]] = len(ids)
            name = parts[-1]
            if name not in class_ids:
                class_ids[name] = len(class_ids)
                label_names.append(name)
            labels.append(class_ids[name])

    edges, unknown = [], 0
    with open(cites_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise DatasetFormatError(f"{cites_path}:{lineno}: expected '<cited> <citing>'")
            a, b = ids.get(parts[0]), ids.get(parts[1])
            if a is None or b is None:
                unknown += 1
                continue
            edges.append((a, b))
    if unknown:
        log.warning("dropped %d citations that reference unknown ids", unknown)

    n = len(ids)
    features = np.asarray(rows, dtype=np.float64).reshape(n, dim or 0)
    return Graph.from_edges(
        n,
        edges,
        features=features,
        labels=np.asarray(labels, dtype=np.int64),
        num_classes=len(label_names),
        meta={"classes": label_names, "unknown_edges": unknown, "source": str(content_path)},
    )


def load_planetoid(directory, name) -> Graph:
    """Read the ``ind.<name>.*`` pickles of the Planetoid release.

    Test rows are put back in node order; CiteSeer's isolated test nodes
    without features get all-zero feature rows (label 0).
    """
    directory = Path(directory)

    def _load(suffix):
        with open(directory / f"ind.{name}.{suffix}", "rb") as fh:
            return pickle.load(fh, encoding="latin1")

    def _dense(m):
        return np.asarray(m.todense() if hasattr(m, "todense") else m, dtype=np.float64)

    x_all, tx = _dense(_load("allx")), _dense(_load("tx"))
    y_all, ty = np.asarray(_load("ally"), dtype=np.float64), np.asarray(_load("ty"), dtype=np.float64)
    adjacency = _load("graph")
    test_order = np.loadtxt(directory / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_order)

    full = np.arange(test_sorted[0], test_sorted[-1] + 1)
    tx_full = np.zeros((full.size, tx.shape[1]))
    ty_full = np.zeros((full.size, ty.shape[1]))
    tx_full[test_sorted - test_sorted[0]] = tx
    ty_full[test_sorted - test_sorted[0]] = ty

    features = np.vstack([x_all, tx_full])
    onehot = np.vstack([y_all, ty_full])
    features[test_order] = features[test_sorted]
    onehot[test_order] = onehot[test_sorted]
    n = max(features.shape[0], max(adjacency) + 1)
    if features.shape[0] < n:
        features = np.vstack([features, np.zeros((n - features.shape[0], features.shape[1]))])
        onehot = np.vstack([onehot, np.zeros((n - onehot.shape[0], onehot.shape[1]))])
    edges = [(int(u), int(v)) for u, nbrs in adjacency.items() for v in nbrs]
    return Graph.from_edges(
        n,
        edges,
        features=features,
        labels=onehot.argmax(axis=1),
        num_classes=onehot.shape[1],
        meta={"source": str(directory / f"ind.{name}")},
    )


def load_dataset(spec, **circles_kwargs) -> Graph:
    """Resolve a dataset argument: ``circles``, a canonical text file, a
    directory holding ``*.content``/``*.cites``, or a Planetoid directory."""
    if spec == "circles":
        return two_circles(**circles_kwargs)
    path = Path(spec)
    if not path.exists() and spec.lower() in KNOWN_DATASETS:
        found = data_dir(spec.lower())
        if found is None:
            env = f"DEEPGRAPH_{spec.upper()}_DIR"
            raise FileNotFoundError(f"{spec} not found: set {env} or DEEPGRAPH_DATA to a directory holding it")
        path = found
    if path.is_file():
        return load_canonical(path)
    if not path.is_dir():
        raise FileNotFoundError(f"no dataset at {spec!r}")
    contents = sorted(path.glob("*.content"))
    if contents:
        cites = contents[0].with_suffix(".cites")
        if not cites.exists():
            raise FileNotFoundError(f"{contents[0]} has no matching .cites file")
        return load_citation(contents[0], cites)
    planetoid = sorted(path.glob("ind.*.graph"))
    if planetoid:
        return load_planetoid(path, planetoid[0].name.split(".")[1])
    canonical = sorted(path.glob("*.graph.txt"))
    if canonical:
        return load_canonical(canonical[0])
    raise DatasetFormatError(f"{spec}: no .content/.cites, ind.*.graph or *.graph.txt files found")


# ----------------------------------------------------- canonical text

_MASK_NAMES = ("none", "train", "val", "test")


def _fmt(v):
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def save_canonical(graph: Graph, path):
    out = ["#graph v1", f"n {graph.num_nodes} d {graph.feature_dim} c {graph.num_classes}", "E"]
    out.extend(f"{i} {j}" for i, j in graph.edge_list())
    out.append("X")
    out.extend(" ".join(_fmt(v) for v in row) for row in graph.features)
    out.append("Y")
    out.extend(str(int(y)) for y in graph.labels)
    out.append("M")
    split = np.zeros(graph.num_nodes, dtype=np.int64)
    split[graph.train_mask] = 1
    split[graph.val_mask] = 2
    split[graph.test_mask] = 3
    out.extend(_MASK_NAMES[s] for s in split)
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")


def load_canonical(path) -> Graph:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != "#graph v1":
        raise DatasetFormatError(f"{path}: missing '#graph v1' header")
    head = lines[1].split() if len(lines) > 1 else []
    if len(head) != 6 or head[0::2] != ["n", "d", "c"]:
        raise DatasetFormatError(f"{path}:2: expected 'n <nodes> d <dim> c <classes>'")
    n, d, c = (int(v) for v in head[1::2])

    def _section(start, tag, count):
        if start >= len(lines) or lines[start] != tag:
            raise DatasetFormatError(f"{path}:{start + 1}: expected section {tag!r}")
        return lines[start + 1 : start + 1 + count]

    if len(lines) < 3 or lines[2] != "E":
        raise DatasetFormatError(f"{path}:3: expected section 'E'")
    try:
        x_at = lines.index("X", 3)
    except ValueError:
        raise DatasetFormatError(f"{path}: missing section 'X'") from None
    edges = []
    for lineno in range(3, x_at):
        parts = lines[lineno].split()
        if len(parts) != 2:
            raise DatasetFormatError(f"{path}:{lineno + 1}: malformed edge line")
        edges.append((int(parts[0]), int(parts[1])))

    x_rows = _section(x_at, "X", n)
    if len(x_rows) != n:
        raise DatasetFormatError(f"{path}: expected {n} feature rows")
    features = np.zeros((n, d))
    for r, row in enumerate(x_rows):
        vals = row.split()
        if len(vals) != d:
            raise DatasetFormatError(f"{path}:{x_at + 2 + r}: {len(vals)} features, expected {d}")
        if d:
            features[r] = [float(v) for v in vals]
    y_at = x_at + 1 + n
    y_rows = _section(y_at, "Y", n)
    m_at = y_at + 1 + n
    m_rows = _section(m_at, "M", n)
    if len(y_rows) != n or len(m_rows) != n or len(lines) != m_at + 1 + n:
        raise DatasetFormatError(f"{path}: section lengths do not match n={n}")
    labels = np.array([int(v) for v in y_rows], dtype=np.int64)
    try:
        split = np.array([_MASK_NAMES.index(v.strip()) for v in m_rows])
    except ValueError:
        raise DatasetFormatError(f"{path}: split labels must be train|val|test|none") from None
    try:
        return Graph.from_edges(
            n,
            edges,
            features=features,
            labels=labels,
            train_mask=split == 1,
            val_mask=split == 2,
            test_mask=split == 3,
            num_classes=c,
            meta={"source": str(path)},
        )
    except DatasetFormatError:
        raise
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------- generators


def two_circles(num_points=1000, noise=0.01, threshold=0.1, seed=0) -> Graph:
    """Two concentric rings (radii 1 and 0.5) with Gaussian jitter; nodes
    closer than ``threshold`` are joined. Features are the 2-D positions,
    label 0 is the outer ring."""
    if num_points < 2:
        raise ValueError("need at least two points")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    rng = np.random.default_rng(seed)
    n_out = num_points // 2
    n_in = num_points - n_out
    t_out = np.linspace(0.0, 2.0 * np.pi, n_out, endpoint=False)
    t_in = np.linspace(0.0, 2.0 * np.pi, n_in, endpoint=False)
    pts = np.vstack(
        [
            np.column_stack([np.cos(t_out), np.sin(t_out)]),
            0.5 * np.column_stack([np.cos(t_in), np.sin(t_in)]),
        ]
    )
    if noise > 0:
        pts = pts + rng.normal(scale=noise, size=pts.shape)
    labels = np.concatenate([np.zeros(n_out, np.int64), np.ones(n_in, np.int64)])
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T
    i, j = np.nonzero(np.triu(d2 < threshold * threshold, k=1))
    return Graph.from_edges(
        num_points,
        np.column_stack([i, j]),
        features=pts,
        labels=labels,
        num_classes=2,
        meta={"source": f"two_circles(n={num_points}, noise={noise}, threshold={threshold}, seed={seed})"},
    )


def erdos_renyi(n, p, seed=0, feature_dim=8, num_classes=3) -> Graph:
    """G(n, p) with standard-normal features and uniform random labels."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Graph.from_edges(
        n,
        np.column_stack([iu[keep], ju[keep]]),
        features=rng.normal(size=(n, feature_dim)),
        labels=rng.integers(0, num_classes, size=n),
        num_classes=num_classes,
        meta={"source": f"erdos_renyi(n={n}, p={p}, seed={seed})"},
    )


# --------------------------------------------------- splits / masking


def _half_up(x):
    return int(math.floor(x + 0.5))


def random_split(n, train_frac=0.03, val_frac=0.10, seed=0):
    """Disjoint ``(train, val, test)`` masks; the test set is the remainder."""
    if train_frac < 0 or val_frac < 0 or train_frac + val_frac >= 1:
        raise ValueError("fractions must be non-negative and sum to less than 1")
    n_train = _half_up(train_frac * n)
    n_val = _half_up(val_frac * n)
    if n_train < 1:
        raise ValueError(f"train fraction {train_frac} selects no nodes out of {n}")
    order = np.random.default_rng(seed).permutation(n)
    masks = []
    for part in (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]):
        m = np.zeros(n, dtype=bool)
        m[part] = True
        masks.append(m)
    return tuple(masks)


def with_random_split(graph: Graph, train_frac=0.03, val_frac=0.10, seed=0) -> Graph:
    train, val, test = random_split(graph.num_nodes, train_frac, val_frac, seed)
    return graph.replace(train_mask=train, val_mask=val, test_mask=test)


def mask_features(graph: Graph, p_percent, seed=0) -> Graph:
    """Zero exactly ``floor(p/100 * n * d)`` feature entries chosen without
    replacement."""
    if not 0 <= p_percent <= 100:
        raise ValueError("mask rate must lie in [0, 100]")
    x = graph.features.copy()
    count = int(math.floor(p_percent / 100.0 * x.size))
    if count:
        idx = np.random.default_rng(seed).choice(x.size, size=count, replace=False)
        x.reshape(-1)[idx] = 0.0
    return graph.replace(features=x)


def data_dir(name):
    """Directory for a named real dataset, from ``DEEPGRAPH_<NAME>_DIR`` or
    ``$DEEPGRAPH_DATA/<name>``; ``None`` when neither exists."""
    explicit = os.environ.get(f"DEEPGRAPH_{name.upper()}_DIR")
    if explicit:
        return Path(explicit) if Path(explicit).is_dir() else None
    root = os.environ.get("DEEPGRAPH_DATA")
    if root and (Path(root) / name).is_dir():
        return Path(root) / name
    return None
