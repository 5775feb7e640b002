import enum


class HeadKind(enum.Enum):
    """
    Enum class that defines the output heads a task may carry. Each head kind
    is bound to exactly one loss.

    Attributes:
        CLASSIFICATION (str): Logits over C classes, softmax cross-entropy loss.
        REGRESSION (str): Real vector of m outputs, L1 loss.
        UNIT_VECTOR (str): L2-normalised vector of m outputs, 1 - cosine loss.
    """
    CLASSIFICATION = "classification"

    REGRESSION = "regression"

    UNIT_VECTOR = "unit_vector"

    @property
    def loss_name(self):
        """Name of the loss bound to this head kind."""
        return {
            HeadKind.CLASSIFICATION: "cross_entropy",
            HeadKind.REGRESSION: "l1",
            HeadKind.UNIT_VECTOR: "cosine",
        }[self]

    @classmethod
    def list(cls):
        """
        Returns a list of all head kind names defined in the enum.

        Returns:
            List[str]: A list of head kind names as strings.
        """
        return [kind.name for kind in cls]
