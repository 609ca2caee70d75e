"""The two class labels used throughout: benign vs porn."""

BENIGN = "benign"
PORN = "porn"

LABELS = (BENIGN, PORN)


def label_index(label: str) -> int:
    """Map a class label to its logit/score index (benign=0, porn=1)."""
    try:
        return LABELS.index(label)
    except ValueError:
        raise ValueError(f"unknown class label {label!r}, expected one of {LABELS}") from None
