"""Enumeration and characterisation of two-level D- and A-optimal main-effects designs."""

from .canon import (
    CanonicalKey,
    IsomorphismOp,
    apply,
    are_isomorphic,
    canonical_form,
    canonical_key,
    canonical_keys,
)
from .criteria import (
    AberrationProfile,
    AliasTrace,
    FrequencyVector,
    JSpectrum,
    alias_matrix,
    alias_trace,
    frequency_vector,
    j_spectrum,
    profile,
    profiles,
    rank_g,
    rank_g2,
)
from .design import (
    DesignMatrix,
    FormSpec,
    InformationSummary,
    correlation_profile,
    form_of,
    forms_for,
    information_summary,
    matches_form,
    matches_n1_form,
    matches_n2_form,
)
from .enumerator import (
    CandidateKind,
    CandidateSet,
    StageState,
    build_candidate_set,
    enumerate_catalog,
    extend_one,
    extend_stage,
    starting_design_n1,
    starting_design_n2,
)
from .errors import *  # noqa: F401,F403
from .oa import OADerivability, classify, is_orthogonal_array

__version__ = "0.1.0"
