from .client import (
    ADAPTERS,
    LLMClient,
    ProviderConfig,
    RawResponse,
    ResponseCache,
    load_provider_config,
    prompt_hash,
    query_model,
)
from .parsing import parse_response, response_status
from .template import (
    DEFAULT_SEED,
    FewShotSet,
    PromptTemplate,
    build_prompt,
    load_template,
    render_prompt,
    render_shot,
    select_shots,
)

__all__ = [
    "ADAPTERS",
    "DEFAULT_SEED",
    "FewShotSet",
    "LLMClient",
    "PromptTemplate",
    "ProviderConfig",
    "RawResponse",
    "ResponseCache",
    "build_prompt",
    "load_provider_config",
    "load_template",
    "parse_response",
    "prompt_hash",
    "query_model",
    "render_prompt",
    "render_shot",
    "response_status",
    "select_shots",
]
