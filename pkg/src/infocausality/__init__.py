"""No-signaling boxes, random access codes and information causality."""

__version__ = "0.1.0"

from .boxes import (  # noqa: E402
    CHSH,
    BoxError,
    BoxPoint,
    ChshClassification,
    Scenario,
    ValidationReport,
    chsh_value,
    classify_chsh,
    make_isotropic,
    make_local_deterministic,
    make_pr_box,
    make_white_noise,
    mix,
    validate,
)
from .geometry import (  # noqa: E402
    MembershipCertificate,
    classical_membership,
    enumerate_local_vertices,
    ns_dimension,
)
from .infotheory import (  # noqa: E402
    IcEvaluation,
    JointDistribution,
    apply_local_channel,
    binary_entropy,
    check_ic_proof_chain,
    conditional_entropy,
    ic_sum,
    mutual_information,
    quadratic_bound,
    shannon_entropy,
    tsirelson_threshold,
)
from .protocols import (  # noqa: E402
    RacConfig,
    RacResult,
    build_concatenation_tree,
    rac_exact,
    rac_monte_carlo,
    run_ot,
)
