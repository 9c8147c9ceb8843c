from app.signal.decomposition import (DecompositionResult, expanding_position_means, moving_average_filter,
                                      seasonal_decompose)
from app.signal.preprocessing import (cyclical_encode, difference, impute_missing, invert_difference,
                                      remove_outliers)
from app.signal.timeseries import UNIT_CELSIUS, UNIT_KWH, TimeSeries
from app.signal.wavelet import (Scalogram, cwt_scalogram, default_scales, morlet, pseudo_period,
                                scale_for_period, scalogram_stack)

__all__ = [
    "DecompositionResult", "expanding_position_means", "moving_average_filter", "seasonal_decompose",
    "cyclical_encode", "difference", "impute_missing", "invert_difference", "remove_outliers",
    "UNIT_CELSIUS", "UNIT_KWH", "TimeSeries",
    "Scalogram", "cwt_scalogram", "default_scales", "morlet", "pseudo_period", "scale_for_period",
    "scalogram_stack",
]
