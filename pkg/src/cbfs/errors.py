"""Exception hierarchy shared by every cbfs module."""


class CbfsError(Exception):
    """Base class for all errors raised by cbfs."""


class InputError(CbfsError, ValueError):
    """Invalid user input (files, names, parameters)."""


class ParseError(InputError):
    """Malformed CSV content."""

    def __init__(self, message, path=None, line=None, column=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where) + ": " if where else ""
        super().__init__(prefix + message)
        self.path = path
        self.line = line
        self.column = column


class DimensionError(InputError):
    pass


class DuplicateNameError(InputError):
    pass


class LabelError(InputError):
    pass


class GeneratorError(InputError):
    pass


class FeatureMismatchError(InputError):
    pass


class EmptyClusterError(CbfsError, ValueError):
    """A feature cluster has no selected feature, so its centroid is undefined."""

    def __init__(self, clusters):
        self.clusters = tuple(int(r) for r in clusters)
        super().__init__(f"no selected feature in cluster(s) {list(self.clusters)}")


class TieError(CbfsError, ValueError):
    """A classification step met a non-strict maximum."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"{len(report.indices)} {report.kind}(s) with non-strict maximum: "
                         f"{list(report.indices[:10])}")


class ProportionError(CbfsError, ValueError):
    pass


class IterationLimitError(CbfsError, RuntimeError):
    pass


class EnumerationLimitError(CbfsError, ValueError):
    pass


class NoSolutionError(CbfsError, RuntimeError):
    pass
