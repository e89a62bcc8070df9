from .llm import (
    EmptyKnowledgeError,
    GenerationError,
    HTTPChatClient,
    RateLimitError,
    RetryPolicy,
    StubLLM,
    TransportError,
)
from .store import KnowledgeStore, KnowledgeText, generate_knowledge, generate_many
from .templates import (
    MOVIE_FACTORS,
    NEWS_FACTORS,
    FactorParseError,
    PromptKind,
    PromptRequest,
    ScenarioFactors,
    build_item_prompt,
    build_preference_prompt,
    describe_profile,
    elicit_factors,
    parse_factor_list,
    prompt_hash,
)

__all__ = [
    "EmptyKnowledgeError", "FactorParseError", "GenerationError", "HTTPChatClient",
    "KnowledgeStore", "KnowledgeText", "MOVIE_FACTORS", "NEWS_FACTORS", "PromptKind",
    "PromptRequest", "RateLimitError", "RetryPolicy", "ScenarioFactors", "StubLLM",
    "TransportError", "build_item_prompt", "build_preference_prompt", "describe_profile",
    "elicit_factors", "generate_knowledge", "generate_many", "parse_factor_list",
    "prompt_hash",
]
