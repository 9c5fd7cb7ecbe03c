from .backends import (
    ChatBackend,
    ChatBackendError,
    ChatResult,
    OpenAIChatBackend,
    ScriptedChatBackend,
    UsageTrackingBackend,
)
from .mock import demo_backend, demo_responder, route_stage
from .runner import (
    CandidateAnomaly,
    CandidateOrigin,
    DetectedObject,
    PipelineConfig,
    PipelineError,
    PipelineState,
    StageTokens,
    analyze_attributes,
    expected_call_count,
    integrate_and_format,
    load_pipeline_config,
    parse_object_list,
    perceive_objects,
    reason_relations,
    run_pipeline,
    split_numbered_blocks,
)

__all__ = [
    "ChatBackend",
    "ChatBackendError",
    "ChatResult",
    "OpenAIChatBackend",
    "ScriptedChatBackend",
    "UsageTrackingBackend",
    "demo_backend",
    "demo_responder",
    "route_stage",
    "CandidateAnomaly",
    "CandidateOrigin",
    "DetectedObject",
    "PipelineConfig",
    "PipelineError",
    "PipelineState",
    "StageTokens",
    "analyze_attributes",
    "expected_call_count",
    "integrate_and_format",
    "load_pipeline_config",
    "parse_object_list",
    "perceive_objects",
    "reason_relations",
    "run_pipeline",
    "split_numbered_blocks",
]
