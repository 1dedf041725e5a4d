"""Trim-aware SSD write-amplification laboratory.

A page-granular log-structured FTL simulator with greedy garbage collection
and the matching closed-form steady-state / write-amplification analytics,
plus experiment drivers that verify the two against each other.
"""

from .ftl import (
    DeviceGeometry,
    FtlState,
    OutOfSpaceError,
    PageState,
    SimMetrics,
    new_device,
)
from .markov import (
    EffectiveOverprovisioning,
    SteadyDistribution,
    TrimParams,
    effective_overprovisioning,
    exact_pdf,
    excess_kurtosis,
    gaussian_pdf,
    rho_eff,
    skewness,
    stirling_pdf,
    transition_probs,
)
from .workload import (
    HotColdWorkload,
    MixedPlacement,
    MultiTempWorkload,
    Request,
    RequestGenerator,
    RequestKind,
    SeparatedPlacement,
    UniformWorkload,
)
from .writeamp import (
    TempSpec,
    WaPrediction,
    lambert_w0,
    wa_agarwal,
    wa_agarwal_trim,
    wa_hot_cold_separated,
    wa_hu,
    wa_hu_trim,
    wa_mixed_naive,
    wa_multi_temp,
    wa_xiang,
    wa_xiang_trim,
)
from .experiment import (
    MomentStudy,
    RunConfig,
    RunReport,
    moment_study,
    run,
    simulate_chain,
    sweep_cold_fraction,
    sweep_spare_split,
    sweep_trim,
)

__version__ = "0.1.0"
