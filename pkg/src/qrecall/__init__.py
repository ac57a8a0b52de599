"""Classical versus quantum implementability of joint distributions under restricted information."""

from .classical import (
    ImplementabilityReport,
    LatentModel,
    LocalModel,
    Witness,
    behavioral_from_joint,
    check_classical_implementable,
    conditionals,
    conditioned_model,
    eval_classical,
    eval_latent,
)
from .constructions import (
    EXAMPLES,
    DiscordantBuild,
    DiscordantSpec,
    VerificationReport,
    build_diag_universal,
    build_discordant,
    build_latent_diagonal,
    build_thm1,
    build_thm2,
    build_universal,
    diagonal_to_latent,
    named_example,
    paper_example,
    separable_model,
    verify_model,
)
from .fitting import FitReport, SearchParams, fit_local_model
from .process import JointDistribution, ProcessSpec, max_abs_error
from .quantum import (
    DensityMatrix,
    Povm,
    QuantumModel,
    basis_off_diagonal,
    born_joint,
    commutation_witness,
    discord_one_sided,
    partial_trace,
    validate_povm,
    validate_state,
    von_neumann_entropy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
