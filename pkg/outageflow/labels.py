"""Integer-coded categorical states shared by customers, merchants, and outcomes."""
from __future__ import annotations

from enum import IntEnum

import numpy as np


class Mode(IntEnum):
    OK = 0
    FRUSTRATED = 1
    AVOIDING = 2


class MerchantLabel(IntEnum):
    ACCEPTING = 0
    DEGRADED = 1
    FALLBACK = 2


class OutcomeKind(IntEnum):
    NONE = 0
    SUCCESS = 1
    FAILURE = 2
    UNKNOWN = 3


# Indexed by MerchantLabel.
SEVERITY = np.array([0.0, 0.5, 1.0])
SEVERITY.flags.writeable = False
