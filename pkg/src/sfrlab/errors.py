"""Exception hierarchy shared by every sfrlab module."""


class SfrlabError(Exception):
    """Base class for all domain errors raised by sfrlab."""


class UnknownPresetError(SfrlabError, KeyError):
    def __init__(self, preset_id):
        self.preset_id = preset_id
        super().__init__(f"unknown preset: {preset_id!r}")

    def __str__(self):
        return self.args[0]


class GraphError(SfrlabError):
    """Structural problem with a NetworkGraph (cycles, arity, bad params)."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations) or "invalid graph")


class ShapeError(SfrlabError):
    def __init__(self, node, message):
        self.node = node
        super().__init__(f"shape error at node {node!r}: {message}")


class UnreachableNodeError(SfrlabError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"node {node!r} is not reachable from the graph input")


class WeightsError(SfrlabError):
    """Problem reading, writing or matching a weights file."""


class BadMagicError(WeightsError):
    pass


class VersionMismatchError(WeightsError):
    pass


class TruncatedFileError(WeightsError):
    pass


class MissingWeightError(WeightsError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing weight: {name!r}")


class WeightShapeError(WeightsError):
    pass


class EmptyUnionError(SfrlabError, ZeroDivisionError):
    """IoU requested for two masks with no positive pixels at all."""
