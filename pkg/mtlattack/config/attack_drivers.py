import enum


class AttackDriver(enum.Enum):
    """
    Enum class that defines the iterative schemes that turn a combined
    gradient direction into an adversarial example.

    Attributes:
        FGSM (str): One signed step of size epsilon.
        PGD (str): Iterated signed steps with projection after every step.
        APGD (str): PGD with momentum, checkpointed step-size halving and
                    best-so-far tracking.
    """
    FGSM = "fgsm"

    PGD = "pgd"

    APGD = "apgd"

    @classmethod
    def list(cls):
        """
        Returns a list of all driver names defined in the enum.

        Returns:
            List[str]: A list of driver names as strings.
        """
        return [driver.name for driver in cls]

    @classmethod
    def parse(cls, value):
        """
        Resolve a driver from its enum instance, value or (case-insensitive) name.

        :param value: AttackDriver or str
        :return: AttackDriver
        :raises ValueError: if the value names no driver.
        """
        if isinstance(value, cls):
            return value

        text = str(value).strip().lower()
        for driver in cls:
            if driver.value == text:
                return driver

        valid = ", ".join(d.value for d in cls)
        raise ValueError(f"'{value}' is not a valid attack driver. Valid options are: {valid}")
