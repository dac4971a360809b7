# SPDX-License-Identifier: Apache-2.0
"""Motion discrete diffusion: python surface over the C++ core."""

from ._mdd import (  # noqa: F401
    DataError,
    NumericalError,
    NoiseSchedule,
    Pipeline,
    __version__,
    apply_guidance,
    build_schedule,
    canonicalize,
    caption_nll,
    decode_features,
    diversity,
    ema_update,
    encode_features,
    fid,
    fid_gaussian,
    forward_sample,
    gumbel_sample,
    marginal,
    mm_dist,
    mmodality,
    posterior,
    quantize,
    r_precision,
    transition_matrix,
    vlb_loss,
    vq_loss,
)
