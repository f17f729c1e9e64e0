"""Errors raised by the library.

Every error carries an ``exit_code`` so the command-line app can turn it into a
process status without knowing the concrete class.
"""


class InstantiationNetError(Exception):
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DimensionError(InstantiationNetError):
    pass


class GradientError(InstantiationNetError):
    pass


class NumericalError(InstantiationNetError):
    pass


class MeshError(InstantiationNetError):
    pass


class DisconnectedMeshError(MeshError):
    pass


class MeshTooSmallError(MeshError):
    def __init__(self, vertex_count: int, minimum: int):
        super().__init__(f'mesh has {vertex_count} vertices, at least {minimum} are required')
        self.vertex_count = vertex_count
        self.minimum = minimum


class SimplificationError(MeshError):
    def __init__(self, detail: str, achieved: int):
        super().__init__(f'{detail} (achieved {achieved} vertices)')
        self.achieved = achieved


class OracleSizeError(InstantiationNetError):
    pass


class ParseError(InstantiationNetError):
    def __init__(self, path, detail: str, line: int | None = None):
        where = f'{path}:{line}' if line is not None else f'{path}'
        super().__init__(f'{where}: {detail}')
        self.path = path
        self.line = line


class InvalidConfigError(InstantiationNetError):
    exit_code = 2


class ConfigurationError(InstantiationNetError):
    pass


class AmplitudeError(InstantiationNetError):
    pass


class FrustumError(InstantiationNetError):
    pass


class DivergenceError(InstantiationNetError):
    pass


class LeakageError(InstantiationNetError):
    pass
