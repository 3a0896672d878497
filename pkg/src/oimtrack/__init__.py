"""Online multi-object tracking with a hierarchical instance-matching loss.

Modules
-------
geometry    boxes, IoU, non-maximum suppression
memory      identity look-up table + background ring buffer
loss        two-level detection/identity loss and its analytic gradient
learn       linear embedder training (hierarchical and flat objectives)
motion      constant-velocity Kalman filter
assignment  minimum-cost matching with deterministic tie-breaks
tracker     proposal fusion, association cascade, track lifecycles
metrics     CLEAR MOT (MOTA/FP/FN/IDSw) and IDF1
synth       deterministic synthetic scenario generation
mot_io      MOTChallenge files and the embedding sidecar
config      single-document run configuration
pipeline    tracking runs and the ablation study
cli         command-line entry points
"""

__version__ = "0.1.0"
