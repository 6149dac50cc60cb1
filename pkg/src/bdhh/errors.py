"""Exception hierarchy shared across the package.

Every error carries a stable ``code`` so the CLI can emit machine-readable
failure records.
"""


class BdhhError(Exception):
    """Base class for all package errors."""

    code = "error"


class MissingFile(BdhhError):
    code = "missing_file"


class SchemaMismatch(BdhhError):
    code = "schema_mismatch"


class MalformedRow(BdhhError):
    """Raised with the 1-based line number of the offending row."""

    code = "malformed_row"

    def __init__(self, line_number, message):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class EmptyInput(BdhhError):
    code = "empty_input"


class NoPrices(BdhhError):
    code = "no_prices"


class EmptyTrainSet(BdhhError):
    code = "empty_train_set"


class UnknownNode(BdhhError):
    code = "unknown_node"


class DimensionMismatch(BdhhError):
    code = "dimension_mismatch"


class EmptyBasket(BdhhError):
    code = "empty_basket"


class EmptySequence(BdhhError):
    code = "empty_sequence"


class NonFiniteLoss(BdhhError):
    code = "non_finite_loss"


class UnknownVariant(BdhhError):
    code = "unknown_variant"


class UnknownKey(BdhhError):
    code = "unknown_key"


class ConfigValueError(BdhhError):
    code = "config_value"


class EmptyTruth(BdhhError):
    code = "empty_truth"


class ArtifactError(BdhhError):
    code = "artifact"
