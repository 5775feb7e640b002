import enum


class CombinerKind(enum.Enum):
    """
    Enum class that defines how per-task input gradients are merged into one
    attack direction.

    Attributes:
        SINGLE (str): Follow the gradient of one designated task only.
        TOTAL (str): Sum the raw task gradients.
        SIGN_TOTAL (str): Sum the signs of the task gradients.
        DGBA (str): Sum the task gradients, each weighted by the reciprocal
                    of its current loss.
    """
    SINGLE = "Single"

    TOTAL = "Total"

    SIGN_TOTAL = "SignTotal"

    DGBA = "DGBA"

    @classmethod
    def list(cls):
        """
        Returns a list of all combiner names defined in the enum.

        Returns:
            List[str]: A list of combiner names as strings.
        """
        return [kind.name for kind in cls]
