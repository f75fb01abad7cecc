"""Asynchronous slotted amplify-and-forward relay networks.

Symbolic channel-matrix construction for slotted AF cooperative
protocols under propagation-delay and slot-offset asynchronism, plus
Monte Carlo outage estimation and closed-form diversity-multiplexing
bounds.  See the README for the protocol catalogue and the CLI.
"""

from .core import (
    AsyncModel,
    DelayProfile,
    FadeDraw,
    NetworkConfig,
    n_fade_coef,
    sample_fade_block,
    sample_fades,
    validate_config,
)
from .builders import (
    PROTOCOLS,
    apply_drop,
    build_direct,
    build_for_protocol,
    build_guard,
    build_guard_dl,
    build_offset,
    build_offset_dl,
    build_prop_naive,
    build_sync,
    compute_drop_plan,
)
from .infotheory import (
    OutageCurve,
    OutagePoint,
    RatePolicy,
    SlopeFit,
    bound_eval,
    bound_sanity,
    dmt_slope,
    mutual_info,
    outage_prob,
    run_curve,
    transmit_bound,
)
from .infotheory import SanityReport
from .symbolic import (
    DropPlan,
    Monomial,
    SymbolicEntry,
    SymbolicMatrix,
    evaluate,
    extract_diag,
    extract_subdiag,
    numeric_to_text,
    shift_truncate,
    to_text,
)
from . import errors

__version__ = "0.1.0"
