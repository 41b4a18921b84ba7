from enum import Enum

class Metering(str, Enum):
    SEPARATE = "separate"
    SHARED = "shared"

class TariffMode(str, Enum):
    DAY_AHEAD = "day_ahead"
    IR_LRP = "ir_lrp"
    OPTIMAL_ALPHA = "optimal_alpha"
    CENTRALIZED_LDF = "centralized_ldf"
