"""Context-driven objective induction and steering for model pipelines."""

from .context import Attachment, ContextSnapshot, Objective, ObjectiveSet, ingest
from .errors import EngineError
from .gateway import CompletionRequest, CompletionResult, ProviderGateway, Role
from .induction import InductionConfig, induce, top_objective
from .steering import ScoredCandidate, best_of_n, eval_objective, gen_objective, score
from .templates import PromptTemplate

__version__ = "0.1.0"

__all__ = [
    "Attachment",
    "CompletionRequest",
    "CompletionResult",
    "ContextSnapshot",
    "EngineError",
    "InductionConfig",
    "Objective",
    "ObjectiveSet",
    "PromptTemplate",
    "ProviderGateway",
    "Role",
    "ScoredCandidate",
    "best_of_n",
    "eval_objective",
    "gen_objective",
    "induce",
    "ingest",
    "score",
    "top_objective",
]
