"""Plain-text outputs.

Series (``*.tsv``): ``# key: value`` metadata lines, one tab-separated header
row of column names, then one row per sample.

Grids (``grid.tsv``): metadata lines, ``# <axis>: v0 v1 ...`` lines naming the
row and column axes, then the matrix with one row per entry of the row axis.

Matrices (``*.mat.txt``): metadata lines, ``# dim: N``, then a ``# real``
block of N tab-separated rows followed by a ``# imag`` block of N rows.
"""
from pathlib import Path

import numpy as np


def _fmt(v):
    return repr(float(v))


def _meta_lines(meta):
    return [f"# {k}: {v}" for k, v in (meta or {}).items()]


def format_series(columns, meta=None):
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    lines = _meta_lines(meta) + ["\t".join(names)]
    lines += ["\t".join(_fmt(v) for v in row) for row in data]
    return "\n".join(lines) + "\n"


def parse_series(text):
    meta, header, rows = {}, None, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif header is None:
            header = line.split("\t")
        elif line.strip():
            rows.append([float(v) for v in line.split("\t")])
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return meta, {name: data[:, i] for i, name in enumerate(header)}


def format_grid(values, row_axis, col_axis, meta=None):
    """``values[i, j]`` sits at ``row_axis[1][i]``, ``col_axis[1][j]``; axes are ``(name, vector)``."""
    values = np.asarray(values, dtype=float)
    lines = _meta_lines(meta)
    lines.append(f"# rows {row_axis[0]}: " + " ".join(_fmt(v) for v in row_axis[1]))
    lines.append(f"# cols {col_axis[0]}: " + " ".join(_fmt(v) for v in col_axis[1]))
    lines += ["\t".join(_fmt(v) for v in row) for row in values]
    return "\n".join(lines) + "\n"


def parse_grid(text):
    """Return ``(meta, axes, values)`` where ``axes`` maps names to vectors."""
    meta, axes, rows = {}, {}, []
    for line in text.splitlines():
        if line.startswith("# rows ") or line.startswith("# cols "):
            name, _, vals = line[7:].partition(":")
            axes[name.strip()] = np.array([float(v) for v in vals.split()])
        elif line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif line.strip():
            rows.append([float(v) for v in line.split("\t")])
    return meta, axes, np.array(rows, dtype=float)


def format_matrix(m, meta=None):
    m = np.asarray(m, dtype=complex)
    lines = _meta_lines(meta) + [f"# dim: {m.shape[0]}", "# real"]
    lines += ["\t".join(_fmt(v) for v in row) for row in m.real]
    lines.append("# imag")
    lines += ["\t".join(_fmt(v) for v in row) for row in m.imag]
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    block, real, imag = None, [], []
    for line in text.splitlines():
        if line.strip() == "# real":
            block = real
        elif line.strip() == "# imag":
            block = imag
        elif line.startswith("#") or not line.strip():
            continue
        elif block is not None:
            block.append([float(v) for v in line.split("\t")])
    re_, im_ = np.array(real), np.array(imag)
    if re_.shape != im_.shape or re_.ndim != 2:
        raise ValueError("matrix file needs matching '# real' and '# imag' blocks")
    return re_ + 1j * im_


def write_text(path, text):
    path = Path(path)
    path.write_text(text)
    return path
