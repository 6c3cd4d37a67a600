"""Discrete Stieltjes classes for log-transformed lattice distributions ``Y = a^X``."""

from .classifier import (
    Classification,
    Route,
    Verdict,
    classify_by_beta,
    classify_family,
    estimate_beta,
    limit_diagnostic,
    test_condition_W,
)
from .distributions import (
    DiscretePMF,
    Heine,
    LogTransformSpec,
    Poisson,
    Table,
    check_log_concavity,
    from_json,
    log_pmf,
    moment_of_Y,
    pgf,
    pmf,
)
from .numeric import Certified, Mode, PrecisionPolicy, Scalar, escalate, sum_with_tail
from .qseries import (
    BaseParam,
    QParam,
    euler_product,
    gaussian_binomial,
    q_exponential,
    q_factorial,
    q_pochhammer,
    q_pochhammer_inf,
    verify_euler_identity,
)
from .stieltjes import (
    MomentSumCertificate,
    Perturbation,
    StieltjesMember,
    build_perturbation,
    class_member,
    moment_sum,
    verify_member,
)

__version__ = "0.1.0"
