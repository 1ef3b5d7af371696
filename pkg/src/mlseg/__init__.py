"""Multiphase level-set refinement of multi-class score maps.

One signed plane is evolved per class and the label map is the
per-pixel argmin over planes, so every refinement is overlap-free and
void-free by construction. A small recurrent per-pixel predictor closes
the loop: predict, refine, feed the refined labels back, repeat.
"""

from .dtrans import edt, edt_squared, init_phi
from .fields import box_mean, divergence, gradient_central, one_hot, upwind_grad_mag
from .learner import (
    CoarsePredictor,
    PredictorParams,
    TrainConfig,
    class_weights,
    extract_features,
    predict,
    train,
    wce_grad,
    wce_loss,
)
from .metrics import (
    boundary_mask,
    class_frequencies,
    confusion,
    iou_per_class,
    mean_iou,
    pixel_accuracy,
    report,
)
from .mls import (
    EvolutionConfig,
    EvolutionInstability,
    assign,
    classic_speed,
    deep_speed,
    evolve,
    evolve_step,
    refine,
    regularizer,
    speed_classic,
    speed_deep,
)
from .region import RegionModel, fit_regions, loglik
from .synth import RandomStream, SceneSpec, generate, generate_void_case

__version__ = "0.1.0"
