"""Exception types shared across the package.

Every error raised by graphaudit derives from GraphAuditError so the CLI
and HTTP layer can map failures to exit codes / status codes uniformly.
"""

from __future__ import annotations


class GraphAuditError(Exception):
    """Base class for all graphaudit errors."""

    code = "error"


class FrozenGraphError(GraphAuditError):
    """Structural or tag mutation attempted after freeze."""

    code = "frozen-graph"


class UnknownIdError(GraphAuditError):
    """A node or edge id does not exist in the graph."""

    code = "unknown-id"


class MixedGraphError(GraphAuditError):
    """Set operation applied to subgraphs of different snapshots."""

    code = "mixed-graph"


class QuerySyntaxError(GraphAuditError):
    """Query script rejected, with the offending position."""

    code = "query-syntax"

    def __init__(self, message: str, offset: int, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column}, offset {offset})")
        self.offset = offset
        self.line = line
        self.column = column


class SourceSyntaxError(GraphAuditError):
    """Source-language parse failure, with file position."""

    code = "syntax"

    def __init__(self, message: str, path: str, line: int, column: int, offset: int):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.path = path
        self.line = line
        self.column = column
        self.offset = offset


class NameResolutionError(GraphAuditError):
    """A type, field, variable or method name does not resolve."""

    code = "unresolved-name"


class InheritanceCycleError(GraphAuditError):
    """The extends relation contains a cycle."""

    code = "inheritance-cycle"


class ManifestError(GraphAuditError):
    code = "manifest"


class LayoutError(GraphAuditError):
    code = "layout"


class PermissionMapError(GraphAuditError):
    code = "permission-map"


class ProfileError(GraphAuditError):
    code = "profile"


class GraphSchemaError(GraphAuditError):
    """Graph JSON violates the exchange schema; json_path locates the offense."""

    code = "graph-schema"

    def __init__(self, message: str, json_path: str):
        super().__init__(f"{json_path}: {message}")
        self.json_path = json_path


class DependencyCycleError(GraphAuditError):
    code = "dependency-cycle"


class MissingEntryPointError(GraphAuditError):
    code = "missing-entry-point"


class UnknownAnalyzerError(GraphAuditError):
    code = "unknown-analyzer"


class UnmetDependencyError(GraphAuditError):
    code = "unmet-dependency"


class UnknownContinuationError(GraphAuditError):
    code = "unknown-continuation"


class UnknownWorkItemError(GraphAuditError):
    code = "unknown-work-item"


class UnknownArtifactError(GraphAuditError):
    code = "unknown-artifact-id"


class UnknownNodeError(GraphAuditError):
    code = "unknown-node"


class HashMismatchError(GraphAuditError):
    """Audit state refers to a different graph snapshot."""

    code = "hash-mismatch"


class StateSchemaError(GraphAuditError):
    code = "state-schema"


class ConfigError(GraphAuditError):
    code = "config"
