"""Readers and writers for clouds, meshes and edge ground truth.

Formats (see ``docs/formats.md`` for the byte-level description):

* ``.xyz``: one point per line, whitespace separated. 2 or 3 columns are a
  2D/3D point; 4 or 6 columns add a normal.
* ``.csv``: header row, columns ``x,y[,z]`` plus optional ``nx,ny[,nz]`` and
  ``is_edge``.
* ``.ply``: ``ascii`` or ``binary_little_endian``; vertex properties
  ``x y [z] [nx ny [nz]] [is_edge]``, optional ``face`` list element.
* ``.obj``: ``v``, ``vn`` and ``f`` records (``l`` records for 2D segments).
"""
from __future__ import annotations

import csv
import errno
import io
import os

import numpy as np

from .data import PointCloud, unit_rows
from .errors import DataFormatError
from .mesh import TriMesh

CLOUD_FORMATS = ("xyz", "ply", "csv")

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def detect_format(path, fmt=None):
    if fmt:
        return fmt.lower()
    ext = os.path.splitext(str(path))[1].lower().lstrip(".")
    if ext in ("xyz", "txt", "pts"):
        return "xyz"
    if ext in ("ply", "csv", "obj"):
        return ext
    raise DataFormatError(f"cannot infer format from extension '.{ext}'", path)


def _finite(arr, path):
    if not np.isfinite(arr).all():
        bad = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise DataFormatError("NaN or Inf coordinate", path, bad + 1)


def _cloud(points, normals, labels, path):
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        raise DataFormatError("file contains no points", path)
    _finite(points, path)
    if normals is not None:
        normals = unit_rows(normals)
    return PointCloud(points, normals=normals, edge_labels=labels)


def load_cloud(path, fmt=None):
    fmt = detect_format(path, fmt)
    if not os.path.exists(path):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), str(path))
    if fmt == "xyz":
        return _load_xyz(path)
    if fmt == "csv":
        return _load_csv_cloud(path)
    if fmt == "ply":
        data = read_ply(path)
        return _cloud(data["points"], data.get("normals"), data.get("edge_labels"), path)
    if fmt == "obj":
        mesh = load_mesh(path)
        return _cloud(mesh.vertices, mesh.vertex_normals, None, path)
    raise DataFormatError(f"unknown cloud format '{fmt}'", path)


def _load_xyz(path):
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise DataFormatError(f"non-numeric value in '{line}'", path, lineno) from None
            if len(vals) not in (2, 3, 4, 6) or (width is not None and len(vals) != width):
                raise DataFormatError(f"unexpected column count {len(vals)}", path, lineno)
            if not all(np.isfinite(vals)):
                raise DataFormatError("NaN or Inf coordinate", path, lineno)
            width = len(vals)
            rows.append(vals)
    if not rows:
        raise DataFormatError("file contains no points", path)
    arr = np.array(rows)
    d = {2: 2, 3: 3, 4: 2, 6: 3}[width]
    normals = arr[:, d:] if width > d else None
    return _cloud(arr[:, :d], normals, None, path)


def _load_csv_cloud(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError("empty file", path) from None
        cols = {name: i for i, name in enumerate(header)}
        if "x" not in cols or "y" not in cols:
            raise DataFormatError("header must name x and y columns", path, 1)
        d = 3 if "z" in cols else 2
        pcols = [cols[c] for c in "xyz"[:d]]
        ncols = [cols[c] for c in ("nx", "ny", "nz")[:d]] if "nx" in cols else None
        ecol = cols.get("is_edge")
        pts, nrm, lab = [], [], []
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                pts.append([float(row[i]) for i in pcols])
                if ncols:
                    nrm.append([float(row[i]) for i in ncols])
                if ecol is not None:
                    lab.append(_parse_bool(row[ecol]))
            except (ValueError, IndexError):
                raise DataFormatError(f"malformed row {row}", path, lineno) from None
            if not np.isfinite(pts[-1]).all():
                raise DataFormatError("NaN or Inf coordinate", path, lineno)
    return _cloud(pts, nrm if ncols else None, lab if ecol is not None else None, path)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "t", "yes"):
        return True
    if t in ("0", "false", "f", "no"):
        return False
    raise ValueError(text)


def save_cloud(path, cloud, fmt=None, binary=False):
    fmt = detect_format(path, fmt)
    d = cloud.dim
    if fmt == "xyz":
        cols = [cloud.points] + ([cloud.normals] if cloud.normals is not None else [])
        np.savetxt(path, np.hstack(cols), fmt="%.17g")
    elif fmt == "csv":
        names = list("xyz"[:d])
        cols = [cloud.points]
        if cloud.normals is not None:
            names += ["nx", "ny", "nz"][:d]
            cols.append(cloud.normals)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names + (["is_edge"] if cloud.edge_labels is not None else []))
            arr = np.hstack(cols)
            for i, row in enumerate(arr):
                out = [repr(float(v)) for v in row]
                if cloud.edge_labels is not None:
                    out.append(int(cloud.edge_labels[i]))
                w.writerow(out)
    elif fmt == "ply":
        write_ply(path, cloud.points, normals=cloud.normals, edge_labels=cloud.edge_labels, binary=binary)
    else:
        raise DataFormatError(f"cannot write clouds as '{fmt}'", path)


def read_ply(path):
    """Parse a PLY file into ``points``, optional ``normals``, ``edge_labels`` and ``faces``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"ply"):
        raise DataFormatError("missing 'ply' magic", path, 1)
    end = raw.find(b"end_header")
    if end < 0:
        raise DataFormatError("missing end_header", path)
    body_start = raw.index(b"\n", end) + 1
    header_lines = raw[:end].decode("ascii", "replace").splitlines()
    fmt = None
    elements = []
    for lineno, line in enumerate(header_lines, 1):
        parts = line.split()
        if not parts or parts[0] in ("ply", "comment", "obj_info"):
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append({"name": parts[1], "count": int(parts[2]), "props": []})
        elif parts[0] == "property":
            if not elements:
                raise DataFormatError("property before element", path, lineno)
            if parts[1] == "list":
                elements[-1]["props"].append((parts[4], "list", _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]]))
            else:
                if parts[1] not in _PLY_TYPES:
                    raise DataFormatError(f"unknown property type {parts[1]}", path, lineno)
                elements[-1]["props"].append((parts[2], _PLY_TYPES[parts[1]]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise DataFormatError(f"unsupported PLY format '{fmt}'", path)
    body = raw[body_start:]
    if fmt == "ascii":
        tables = _ply_ascii(body, elements, path, len(header_lines) + 2)
    else:
        tables = _ply_binary(body, elements, path)
    out = {}
    verts = tables.get("vertex")
    if verts is None:
        raise DataFormatError("no vertex element", path)
    names = [p[0] for e in elements if e["name"] == "vertex" for p in e["props"]]
    d = 3 if "z" in names else 2
    out["points"] = np.stack([verts[c] for c in "xyz"[:d]], axis=1).astype(float)
    _finite(out["points"], path)
    if "nx" in names:
        out["normals"] = np.stack([verts[c] for c in ("nx", "ny", "nz")[:d]], axis=1).astype(float)
    if "is_edge" in names:
        out["edge_labels"] = np.asarray(verts["is_edge"]).astype(bool)
    faces = tables.get("face")
    if faces is not None:
        key = "vertex_indices" if "vertex_indices" in faces else "vertex_index"
        out["faces"] = np.array(faces[key], dtype=np.int64).reshape(len(faces[key]), -1) \
            if faces[key] else np.zeros((0, 3), dtype=np.int64)
    edges = tables.get("edge")
    if edges is not None:
        out["segments"] = np.stack([edges["vertex1"], edges["vertex2"]], axis=1).astype(np.int64)
    return out


def _ply_ascii(body, elements, path, first_line):
    lines = body.decode("ascii", "replace").splitlines()
    pos = 0
    tables = {}
    for el in elements:
        cols = {p[0]: [] for p in el["props"]}
        for _ in range(el["count"]):
            if pos >= len(lines):
                raise DataFormatError("unexpected end of file", path, first_line + pos)
            tok = lines[pos].split()
            pos += 1
            k = 0
            try:
                for p in el["props"]:
                    if p[1] == "list":
                        n = int(tok[k])
                        cols[p[0]].append([int(t) for t in tok[k + 1:k + 1 + n]])
                        k += 1 + n
                    else:
                        cols[p[0]].append(float(tok[k]))
                        k += 1
            except (ValueError, IndexError):
                raise DataFormatError(f"malformed {el['name']} record", path, first_line + pos - 1) from None
        tables[el["name"]] = cols
    return tables


def _ply_binary(body, elements, path):
    buf = memoryview(body)
    off = 0
    tables = {}
    for el in elements:
        props = el["props"]
        if all(p[1] != "list" for p in props):
            dt = np.dtype([(p[0], "<" + p[1]) for p in props])
            need = dt.itemsize * el["count"]
            if off + need > len(buf):
                raise DataFormatError(f"truncated {el['name']} data", path)
            arr = np.frombuffer(buf[off:off + need], dtype=dt)
            off += need
            tables[el["name"]] = {p[0]: arr[p[0]] for p in props}
            continue
        cols = {p[0]: [] for p in props}
        try:
            for _ in range(el["count"]):
                for p in props:
                    if p[1] == "list":
                        cdt = np.dtype("<" + p[2])
                        n = int(np.frombuffer(buf[off:off + cdt.itemsize], dtype=cdt)[0])
                        off += cdt.itemsize
                        idt = np.dtype("<" + p[3])
                        cols[p[0]].append(np.frombuffer(buf[off:off + n * idt.itemsize], dtype=idt).tolist())
                        off += n * idt.itemsize
                    else:
                        vdt = np.dtype("<" + p[1])
                        cols[p[0]].append(np.frombuffer(buf[off:off + vdt.itemsize], dtype=vdt)[0])
                        off += vdt.itemsize
        except (IndexError, ValueError):
            raise DataFormatError(f"truncated {el['name']} data", path) from None
        tables[el["name"]] = cols
    return tables


def write_ply(path, points, normals=None, edge_labels=None, faces=None, binary=True):
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    props = [(c, "double") for c in "xyz"[:d]]
    cols = [points]
    if normals is not None:
        props += [(c, "double") for c in ("nx", "ny", "nz")[:d]]
        cols.append(np.asarray(normals, dtype=float))
    if edge_labels is not None:
        props.append(("is_edge", "uchar"))
    head = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
            f"element vertex {len(points)}"]
    head += [f"property {t} {n}" for n, t in props]
    if faces is not None:
        faces = np.asarray(faces, dtype=np.int64)
        if d == 2:
            head += [f"element edge {len(faces)}", "property int vertex1", "property int vertex2"]
        else:
            head += [f"element face {len(faces)}", "property list uchar int vertex_indices"]
    head.append("end_header")
    arr = np.hstack(cols)
    with open(path, "wb") as fh:
        fh.write(("\n".join(head) + "\n").encode("ascii"))
        if binary:
            dt = [(n, "<f8") for n, _ in props if n != "is_edge"]
            if edge_labels is not None:
                dt.append(("is_edge", "u1"))
            rec = np.empty(len(points), dtype=dt)
            for k, (n, _) in enumerate(p for p in props if p[0] != "is_edge"):
                rec[n] = arr[:, k]
            if edge_labels is not None:
                rec["is_edge"] = np.asarray(edge_labels, dtype=np.uint8)
            fh.write(rec.tobytes())
            if faces is not None:
                if d == 2:
                    fh.write(faces.astype("<i4").tobytes())
                else:
                    fr = np.empty(len(faces), dtype=[("n", "u1"), ("i", "<i4", (3,))])
                    fr["n"] = 3
                    fr["i"] = faces
                    fh.write(fr.tobytes())
        else:
            txt = io.StringIO()
            for i, row in enumerate(arr):
                vals = [repr(float(v)) for v in row]
                if edge_labels is not None:
                    vals.append(str(int(edge_labels[i])))
                txt.write(" ".join(vals) + "\n")
            if faces is not None:
                for f in faces:
                    txt.write((" ".join(map(str, f)) if d == 2 else "3 " + " ".join(map(str, f))) + "\n")
            fh.write(txt.getvalue().encode("ascii"))


def save_mesh(path, mesh, fmt=None):
    fmt = detect_format(path, fmt)
    if fmt == "obj":
        write_obj(path, mesh)
    elif fmt == "ply":
        write_ply(path, mesh.vertices, normals=mesh.vertex_normals, faces=mesh.faces, binary=True)
    else:
        raise DataFormatError(f"cannot write meshes as '{fmt}'", path)


def write_obj(path, mesh):
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write("v " + " ".join(repr(float(c)) for c in v) + "\n")
        has_n = mesh.vertex_normals is not None
        if has_n:
            for n in mesh.vertex_normals:
                fh.write("vn " + " ".join(repr(float(c)) for c in n) + "\n")
        tag = "f" if mesh.dim == 3 else "l"
        for f in mesh.faces + 1:
            if has_n and tag == "f":
                fh.write("f " + " ".join(f"{i}//{i}" for i in f) + "\n")
            else:
                fh.write(tag + " " + " ".join(str(i) for i in f) + "\n")


def load_mesh(path, fmt=None):
    fmt = detect_format(path, fmt)
    if not os.path.exists(path):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), str(path))
    if fmt == "ply":
        data = read_ply(path)
        faces = data.get("faces")
        if faces is None:
            faces = data.get("segments", np.zeros((0, data["points"].shape[1]), dtype=np.int64))
        return TriMesh(data["points"], faces, data.get("normals"))
    if fmt != "obj":
        raise DataFormatError(f"cannot read meshes from '{fmt}'", path)
    verts, normals, faces = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(p) for p in parts[1:]])
                elif parts[0] == "vn":
                    normals.append([float(p) for p in parts[1:]])
                elif parts[0] in ("f", "l"):
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                    idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                    if parts[0] == "f" and len(idx) > 3:
                        faces += [[idx[0], idx[k], idx[k + 1]] for k in range(1, len(idx) - 1)]
                    else:
                        faces.append(idx)
            except ValueError:
                raise DataFormatError(f"malformed record '{line.strip()}'", path, lineno) from None
    if not verts:
        raise DataFormatError("no vertices", path)
    v = np.array(verts)
    _finite(v, path)
    n = np.array(normals) if len(normals) == len(verts) else None
    return TriMesh(v, np.array(faces, dtype=np.int64) if faces else np.zeros((0, v.shape[1]), dtype=np.int64), n)


def load_edge_ground_truth(path, cloud=None):
    """Read an edge CSV.

    ``index,is_edge`` files give per-point labels (returned as a boolean array
    aligned with ``cloud`` when given); ``x,y[,z]`` files give edge samples
    (returned as an ``(M, d)`` array).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError("empty file", path) from None
        rows = [(lineno, r) for lineno, r in enumerate(reader, 2) if r and any(c.strip() for c in r)]
    if header[:2] == ["index", "is_edge"]:
        n = len(rows) if cloud is None else len(cloud)
        if cloud is not None and len(rows) != n:
            raise DataFormatError(f"{len(rows)} labels for a cloud of {n} points", path)
        labels = np.zeros(n, dtype=bool)
        seen = np.zeros(n, dtype=bool)
        for lineno, r in rows:
            try:
                i = int(r[0])
                flag = _parse_bool(r[1])
            except (ValueError, IndexError):
                raise DataFormatError(f"malformed row {r}", path, lineno) from None
            if not 0 <= i < n or seen[i]:
                raise DataFormatError(f"index {i} out of range or repeated", path, lineno)
            seen[i] = True
            labels[i] = flag
        return labels
    if header[:2] == ["x", "y"]:
        d = 3 if len(header) > 2 and header[2] == "z" else 2
        pts = []
        for lineno, r in rows:
            try:
                pts.append([float(v) for v in r[:d]])
            except (ValueError, IndexError):
                raise DataFormatError(f"malformed row {r}", path, lineno) from None
            if len(pts[-1]) != d or not np.isfinite(pts[-1]).all():
                raise DataFormatError("bad coordinate", path, lineno)
        return np.array(pts, dtype=float).reshape(-1, d)
    raise DataFormatError("header must be 'index,is_edge' or 'x,y[,z]'", path, 1)


def save_edge_labels(path, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "is_edge"])
        for i, flag in enumerate(np.asarray(labels, dtype=bool)):
            w.writerow([i, int(flag)])


def save_edge_samples(path, points):
    points = np.asarray(points, dtype=float)
    d = points.shape[1] if points.ndim == 2 else 3
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list("xyz"[:d]))
        for p in points.reshape(-1, d):
            w.writerow([repr(float(v)) for v in p])

