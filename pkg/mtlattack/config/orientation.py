import enum


class Orientation(enum.Enum):
    """
    Enum class that records which direction of a metric is an improvement.
    The value is the exponent used when orienting a relative change, so a
    lower-better metric contributes with a positive sign and a higher-better
    metric with a negative sign.

    Attributes:
        LOWER_BETTER (int): Errors, angles and losses.
        HIGHER_BETTER (int): Accuracies and within-threshold fractions.
    """
    LOWER_BETTER = 0

    HIGHER_BETTER = 1

    @property
    def sign(self):
        """(-1) ** value, the factor applied to a relative change."""
        return -1.0 if self is Orientation.HIGHER_BETTER else 1.0

    def flipped(self):
        """Return the opposite orientation."""
        if self is Orientation.HIGHER_BETTER:
            return Orientation.LOWER_BETTER
        return Orientation.HIGHER_BETTER

    @classmethod
    def list(cls):
        """
        Returns a list of all orientation names defined in the enum.

        Returns:
            List[str]: A list of orientation names as strings.
        """
        return [orientation.name for orientation in cls]
