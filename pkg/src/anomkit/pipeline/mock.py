"""Offline scripted backend: a deterministic stand-in for a vision endpoint.

``route_stage`` recognizes which agent a prompt came from by its template
markers; ``demo_responder`` returns a plausible canned reply per stage so the
full pipeline (and the ``annotate --backend mock`` path) runs without any
network or model.
"""

from __future__ import annotations

from .backends import ScriptedChatBackend

PERCEIVE = "perceive"
ATTRIBUTE_STEP1 = "attribute_step1"
ATTRIBUTE_STEP2 = "attribute_step2"
RELATION_STEP1 = "relation_step1"
RELATION_STEP2 = "relation_step2"
INTEGRATE_STEP1 = "integrate_step1"
INTEGRATE_STEP2 = "integrate_step2"
FORMAT = "format"

# Ordered by marker specificity; each marker is fixed text unique to one template.
_MARKERS = (
    ("Description Input:", ATTRIBUTE_STEP2),
    ("Relation Input:", RELATION_STEP2),
    ("Context Descriptions:", RELATION_STEP1),
    ("pre-selected anomalies", FORMAT),
    ("Summarize and categorize all detected", INTEGRATE_STEP2),
    ("Review and analyze the detailed Description and Relationships", INTEGRATE_STEP1),
    ("Analyze all objects and individuals in the image", PERCEIVE),
    ("Focus on analyzing and identifying any anomalies", ATTRIBUTE_STEP1),
)


def route_stage(prompt: str) -> str:
    for marker, stage in _MARKERS:
        if marker in prompt:
            return stage
    raise ValueError("prompt does not match any pipeline template")


DEMO_OBJECTS = """\
#Person#: A man in a blue jacket whose right hand shows six fingers gripping a mug handle.
#Chair#: A wooden chair that appears to be floating slightly above the tiled floor, casting no shadow.\
"""

DEMO_ATTRIBUTE_ANALYSIS = """\
The object shows a structural irregularity: its proportions are inconsistent \
with its apparent function, and one contact region blends into the background \
texture with no occlusion boundary.\
"""

DEMO_ATTRIBUTE_ISSUES = """\
1. Abnormal Phenomenon Name: Distorted contact region
   Observed Issue: The object's support surface merges into the background with no occlusion boundary.
   Explanation: Solid objects occlude what is behind them; a missing boundary indicates an impossible geometry.\
"""

DEMO_RELATION_ANALYSIS = """\
Relationship: the object versus the floor and nearby objects. The object does \
not rest on any supporting surface and its cast shadow is absent, while \
neighboring objects cast consistent shadows.\
"""

DEMO_RELATION_ISSUES = """\
1. Objects Involved: the current object and the floor
   Observed Issue: The object hovers above the floor without any visible support.
   Explanation: Unsupported objects should fall; levitation contradicts gravity.\
"""

DEMO_INTEGRATED = """\
1. Observed Phenomenon: Floating object without support
   - Sources: Both
   - Details: The object hovers above the floor, has no cast shadow, and its contact region merges into the background.
   - Explanation: Gravity requires support; shadows accompany solid objects under scene lighting.\
"""

DEMO_CATEGORIZED = """\
1. Object Name: Chair
   Phenomenon: The chair hovers above the tiled floor without support and casts no shadow.
   Explanation: Unsupported solid objects must fall, and lit objects cast shadows.
2. Object Name: Person
   Phenomenon: The right hand shows six fingers around the mug handle.
   Explanation: Human hands have five fingers; duplicated digits are anatomically impossible.\
"""

DEMO_FORMATTED = """\
@1. **Name**: Floating chair without support
- **Observed Phenomenon**: A wooden chair hovers above the tiled floor with no legs touching the ground and no cast shadow.
- **Reasoning**: Gravity requires contact or suspension, and solid objects under scene lighting cast shadows; both cues are missing.
- **Severity Score**: 10/100 (extremely unnatural)

@2. **Name**: Extra finger on right hand
- **Observed Phenomenon**: The man's right hand shows six fingers wrapped around the mug handle, with two index fingers of identical shape.
- **Reasoning**: Human anatomy allows five fingers per hand; duplicated digits with identical geometry indicate synthesis artifacts.
- **Severity Score**: 20/100 (clearly unnatural)\
"""

_DEMO_REPLIES = {
    PERCEIVE: DEMO_OBJECTS,
    ATTRIBUTE_STEP1: DEMO_ATTRIBUTE_ANALYSIS,
    ATTRIBUTE_STEP2: DEMO_ATTRIBUTE_ISSUES,
    RELATION_STEP1: DEMO_RELATION_ANALYSIS,
    RELATION_STEP2: DEMO_RELATION_ISSUES,
    INTEGRATE_STEP1: DEMO_INTEGRATED,
    INTEGRATE_STEP2: DEMO_CATEGORIZED,
    FORMAT: DEMO_FORMATTED,
}


def demo_responder(prompt: str, image: str | None) -> str:
    return _DEMO_REPLIES[route_stage(prompt)]


def demo_backend() -> ScriptedChatBackend:
    """A ready-to-use scripted backend producing the demo annotation."""
    return ScriptedChatBackend(demo_responder, model="mock")
