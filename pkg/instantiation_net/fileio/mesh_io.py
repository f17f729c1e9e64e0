"""OFF and OBJ triangle mesh codecs. OFF is the canonical format."""
from pathlib import Path

import numpy as np

from instantiation_net.exceptions import MeshError, ParseError
from instantiation_net.fileio.atomic import atomic_write_text
from instantiation_net.graph.mesh import Mesh


def _content_lines(text: str):
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if line:
            yield number, line


def _floats(fields: list[str], path, number: int) -> list[float]:
    try:
        return [float(x) for x in fields]
    except ValueError:
        raise ParseError(path, f'expected numbers, got {" ".join(fields)!r}', number) from None


def _ints(fields: list[str], path, number: int) -> list[int]:
    try:
        return [int(x) for x in fields]
    except ValueError:
        raise ParseError(path, f'expected integers, got {" ".join(fields)!r}', number) from None


def parse_off(text: str, path='<string>') -> Mesh:
    lines = _content_lines(text)
    try:
        number, header = next(lines)
    except StopIteration:
        raise ParseError(path, 'empty file') from None
    tokens = header.split()
    if tokens[0] != 'OFF':
        raise ParseError(path, f'expected OFF header, got {tokens[0]!r}', number)
    tokens = tokens[1:]
    if not tokens:
        try:
            number, counts_line = next(lines)
        except StopIteration:
            raise ParseError(path, 'missing vertex/face counts', number) from None
        tokens = counts_line.split()
    if len(tokens) < 2:
        raise ParseError(path, 'counts line needs vertex and face counts', number)
    n_vertices, n_faces = _ints(tokens[:2], path, number)

    vertices = []
    for _ in range(n_vertices):
        try:
            number, line = next(lines)
        except StopIteration:
            raise ParseError(path, f'expected {n_vertices} vertices, found {len(vertices)}') from None
        fields = line.split()
        if len(fields) < 3:
            raise ParseError(path, 'vertex line needs 3 coordinates', number)
        vertices.append(_floats(fields[:3], path, number))

    faces = []
    for _ in range(n_faces):
        try:
            number, line = next(lines)
        except StopIteration:
            raise ParseError(path, f'expected {n_faces} faces, found {len(faces)}') from None
        fields = _ints(line.split(), path, number)
        if fields[0] != 3 or len(fields) < 4:
            raise ParseError(path, f'only triangle faces are supported, got a {fields[0]}-gon', number)
        face = fields[1:4]
        if min(face) < 0 or max(face) >= n_vertices:
            raise ParseError(path, f'face index out of range for {n_vertices} vertices: {face}', number)
        faces.append(face)

    try:
        return Mesh.create(np.array(vertices, dtype=np.float64).reshape(-1, 3), faces)
    except MeshError as e:
        raise ParseError(path, e.detail) from e


def format_off(mesh: Mesh) -> str:
    out = ['OFF', f'{mesh.vertex_count} {len(mesh.faces)} 0']
    out.extend(' '.join(f'{c:.17g}' for c in v) for v in mesh.vertices)
    out.extend(f'3 {i} {j} {k}' for i, j, k in mesh.faces)
    return '\n'.join(out) + '\n'


def read_off(path: Path) -> Mesh:
    return parse_off(Path(path).read_text(encoding='utf-8'), path)


def write_off(path: Path, mesh: Mesh) -> None:
    atomic_write_text(path, format_off(mesh))


def parse_obj(text: str, path='<string>') -> Mesh:
    """Vertices (`v`) and faces (`f`) of an OBJ; other records are ignored.

    Polygonal faces are fanned into triangles; `v/vt/vn` references keep the vertex index.
    """
    vertices = []
    faces = []
    for number, line in _content_lines(text):
        fields = line.split()
        if fields[0] == 'v':
            if len(fields) < 4:
                raise ParseError(path, 'vertex line needs 3 coordinates', number)
            vertices.append(_floats(fields[1:4], path, number))
        elif fields[0] == 'f':
            refs = _ints([f.split('/', 1)[0] for f in fields[1:]], path, number)
            if len(refs) < 3:
                raise ParseError(path, 'face needs at least 3 vertices', number)
            resolved = []
            for r in refs:
                index = r - 1 if r > 0 else len(vertices) + r
                if not 0 <= index < len(vertices):
                    raise ParseError(path, f'face references vertex {r} of {len(vertices)}', number)
                resolved.append(index)
            faces.extend([resolved[0], resolved[i], resolved[i + 1]] for i in range(1, len(resolved) - 1))
    try:
        return Mesh.create(np.array(vertices, dtype=np.float64).reshape(-1, 3), faces)
    except MeshError as e:
        raise ParseError(path, e.detail) from e


def format_obj(mesh: Mesh) -> str:
    out = [f'v {x:.17g} {y:.17g} {z:.17g}' for x, y, z in mesh.vertices]
    out.extend(f'f {i + 1} {j + 1} {k + 1}' for i, j, k in mesh.faces)
    return '\n'.join(out) + '\n'


def read_mesh(path: Path) -> Mesh:
    path = Path(path)
    text = path.read_text(encoding='utf-8')
    if path.suffix.lower() == '.obj':
        return parse_obj(text, path)
    return parse_off(text, path)


def write_mesh(path: Path, mesh: Mesh) -> None:
    path = Path(path)
    text = format_obj(mesh) if path.suffix.lower() == '.obj' else format_off(mesh)
    atomic_write_text(path, text)
