"""layercomp: differentiable multi-object image compositing.

Building blocks: parametric warps (affine, homography, thin plate spline)
with bilinear resampling, occlusion-order hierarchy blending over all M!
layer stackings, edge-aware guided filtering, adversarial and masked cycle
losses, and a seeded recovery harness that drives the pipeline backwards
with gradient descent.
"""

from .guidedfilter import (
    FilterConfig,
    WindowStats,
    box_mean,
    guided_filter,
    guided_filter_raw,
    window_stats,
)
from .hierarchy import (
    MAX_FOREGROUNDS,
    Composite,
    HierarchyWeights,
    InvalidWeightsError,
    TooManyForegroundsError,
    background_coverage,
    compose_hierarchy,
    enumerate_orders,
    order_composites,
    order_index,
    softmax_weights,
    visible_masks,
)
from .imagecore import (
    Image,
    ImageDecodeError,
    MaskMap,
    UnsupportedFormatError,
    decode_image,
    encode_image,
    image_to_mask,
    mask_to_image,
)
from .losses import (
    CriticScores,
    CycleConfig,
    attentional_cycle_loss,
    combined_generator_loss,
    wgan_critic_loss,
    wgan_generator_loss,
)
from .recovery import (
    DivergenceError,
    OptimReport,
    ToyScene,
    filter_sweep,
    generate_scene,
    hierarchy_gradcheck,
    numeric_gradient,
    recover_hierarchy,
    recover_warp,
)
from .scene import (
    Foreground,
    SceneFormatError,
    SceneSpec,
    SceneValidationError,
    compose_scene,
    load_scene_file,
    scene_to_dict,
    validate_scene,
)
from .warp import (
    AffineWarp,
    HomographyWarp,
    SingularTransformError,
    TpsWarp,
    WarpParams,
    fit_tps,
    identity_affine,
    map_points,
    translation_affine,
    warp_from_dict,
    warp_image,
    warp_to_dict,
)

__version__ = "0.1.0"
