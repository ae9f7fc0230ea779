from ._peakrep import (
    PeakrepError,
    bandpass,
    design_bandpass,
    detect,
    index_to_timestamp,
    match,
    reconstruct,
    represent,
    score_output,
    synthesize,
    t_two_tailed_p,
    timestamp_to_index,
    welch,
    zscore,
)

__all__ = [
    "PeakrepError",
    "bandpass",
    "design_bandpass",
    "detect",
    "index_to_timestamp",
    "match",
    "reconstruct",
    "represent",
    "score_output",
    "synthesize",
    "t_two_tailed_p",
    "timestamp_to_index",
    "welch",
    "zscore",
]
