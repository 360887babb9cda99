"""Exception types shared across the toolkit."""


class AggTopicsError(Exception):
    """Base class for all toolkit errors."""


class AllDocumentsEmpty(AggTopicsError):
    """Every input unit lost all of its tokens during corpus construction."""


class MissingKey(AggTopicsError):
    """A required metadata key is absent from one or more units."""


class MultiValuedKey(AggTopicsError):
    """A metadata key expected to be single-valued carries multiple values."""


class EmptyResult(AggTopicsError):
    """An aggregation produced no output documents."""


class InvalidConfig(AggTopicsError):
    """A model or experiment configuration violates its invariants."""


class MissingEmbedding(AggTopicsError):
    """A unit referenced by a grouping has no embedding row."""


class KTooLarge(AggTopicsError):
    """More clusters requested than there are points."""


class DegenerateWord(AggTopicsError):
    """A coherence computation hit a word with zero document frequency."""


class MissingGroupKey(AggTopicsError):
    """A corpus document lacks the (single-valued) group key."""


class MissingEntityKey(AggTopicsError):
    """A document lacks the entity or label key needed for a validity design."""


class NonConvergence(AggTopicsError):
    """The logit optimizer stopped before reaching the gradient tolerance."""

    def __init__(self, grad_norm: float, max_iter: int):
        self.grad_norm = grad_norm
        self.max_iter = max_iter
        super().__init__(
            f"optimizer did not reach gradient tolerance within {max_iter} "
            f"iterations (final gradient norm {grad_norm:.3e})"
        )


class DegenerateSplit(AggTopicsError):
    """A train/test split left one side empty."""
