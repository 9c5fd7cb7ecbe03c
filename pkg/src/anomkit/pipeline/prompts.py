"""Prompt catalog for the five-agent annotation pipeline.

Templates are plain ``str.format`` strings; the fixed text of each template
is part of the pipeline's contract (tests compare assembled requests against
these literals). Assembly helpers live next to the templates so every stage
builds its request the same way.
"""

from __future__ import annotations

from typing import Sequence

OBJECT_PERCEIVER_PROMPT = """\
Task: Analyze all objects and individuals in the image. For each object or \
individual, provide a detailed, accurate, and comprehensive description, while \
identifying any inconsistencies, anomalies, or illogical aspects. Ensure no \
object or body part is omitted.

Follow the steps below and provide your analysis in the structured format specified:
- Identify and describe all objects and individuals in the image.
- For each object or individual, provide a detailed, accurate, and comprehensive description.
- Highlight any inconsistencies, anomalies, or illogical aspects in:
  - Shape and Structure: Are there distortions, missing parts, or unnatural forms?
  - Material and Texture: Are there abrupt texture changes or mismatches?
  - Lighting and Shadows: Are the lighting and shadows consistent with the environment?
  - Physical Properties: Are there any violations of real-world physics or logic (e.g., floating objects)?
  - Common Sense Verification: Are there any semantic inconsistencies (e.g., a door handle on a chair)?
  - Human Anatomy (if applicable): Identify unnatural features such as missing limbs, extra fingers, or disproportionate body parts.

Output Format:
Each object/body part should be described individually in the following structured format:

#Name#: Detailed Description.

#Name#: Detailed Description.

Highlight all implausible, unnatural, or inconsistent details while ensuring \
full coverage of the image content. Only output the list in the specified format.\
"""

# Detection is repeated with a varying pass marker so independent passes can
# recover objects a single pass missed; the union of all passes is kept.
PERCEIVER_PASS_SUFFIX = """\


(Observation pass {index} of {total}: look at the image again from scratch and \
list every object and individual, including ones a previous pass may have found.)\
"""

ATTRIBUTE_STEP1_TEMPLATE = """\
Task: Analyze {object_name} in the image.

Focus on analyzing and identifying any anomalies in the following aspects:

1. Shape and Structure
   - Are there unnatural forms or distortions?
   - Are proportions consistent with the object's design?
2. Functionality
   - Does the object behave logically in real-world scenarios?
   - Are there physical impossibilities (e.g., unsupported structures)?
3. Human Body Structure Verification (if applicable)
   - Are limbs, fingers, and facial features correctly placed and proportional?
   - Are there unnatural fusions, duplications, or disconnections?

Deliverable:
- Highlight all implausible, unnatural, or inconsistent details.
- Ensure a thorough analysis that covers all aspects of the image content.
- Provide concise, evidence-based explanations for all findings.\
"""

ATTRIBUTE_STEP2_TEMPLATE = """\
Object: {object_name}
Description Input: {analysis}

Task: Analyze the detailed description of {object_name} and identify all \
unreasonable, contradictory, or physically impossible details specific to this object.

Provide a structured list of issues using the following format:
- Abnormal Phenomenon Name: The name of the observed anomaly.
- Observed Issue: The unnatural feature found.
- Explanation: Why this characteristic is unrealistic.

Example Output:
1. Abnormal Phenomenon Name: Streetlight No Power
   Observed Issue: The streetlight is glowing but has no power source or wiring.
   Explanation: A streetlight requires an electrical connection to function, and no wires or batteries are visible.

Instructions:
- Analyze only {object_name}.
- Output only issues directly related to {object_name}, using the specified format.\
"""

RELATION_STEP1_TEMPLATE = """\
Task: Analyze the spatial and logical relationships between {object_name} and \
the following objects: ({other_objects}).

You should evaluate:
- One-to-one relationships (e.g., {object_name} with each object)
- One-to-many relationships (e.g., {object_name} in relation to multiple objects collectively)

Context Descriptions:
{attribute_context}

Focus Areas:
1. Perspective Errors: Are objects placed in impossible or illogical locations relative to {object_name}?
2. Physical Interactions: Are there unnatural interactions (e.g., floating without support, overlapping unnaturally)?
3. Logical Contradictions: Are there contradictions with real-world behavior or common-sense logic?

Instructions:
- Focus analysis on {object_name} as the primary subject.
- For one-to-one relationships, evaluate individual pairings.
- For one-to-many relationships, consider collective spatial, logical, and contextual coherence.

Output Format (structured report for each issue):
- Relationship: Describe the relationship being analyzed.
- Observed Issue: Detail the anomaly or inconsistency.
- Explanation: Explain why the issue is illogical or unrealistic.

Deliverables:
- Analyze all one-to-one and one-to-many relationships involving {object_name}.
- Ensure detailed reasoning and structured output for each detected issue.\
"""

RELATION_STEP2_TEMPLATE = """\
Relation Input: {analysis}

Focus Object: The primary subject of analysis is {object_name}. All evaluations \
should center on {object_name} and its relationships with the following objects: ({other_objects}).

Task: Based on the prior relationship analysis, analyze and summarize the \
relationships between {object_name} and the listed objects. Emphasize detection \
of logical contradictions, physical impossibilities, and semantic anomalies.

Key Aspects to Evaluate:
1. Logical Coherence: Are the relationships internally consistent?
   - Example: An object cannot be both inside and outside another simultaneously.
2. Physical Realism: Do the relationships conform to real-world physical laws?
   - Example: Objects should not float without visible support.
3. Semantic Plausibility: Are the interactions meaningful and contextually appropriate?
   - Example: A dog "wearing" a cloud is not semantically plausible.
4. Causal Consistency: Do object states logically follow from their relationships?
   - Example: A book balanced on a steep slope should be expected to fall.

Output Format: For each detected anomaly, provide a structured report as follows:
- Objects Involved: List the relevant objects (including {object_name}).
- Observed Issue: Describe the logical, physical, or semantic anomaly.
- Reasoning: Justify why this relationship is unnatural, implausible, or illogical.

Instructions:
- Focus exclusively on {object_name} and its relationships.
- Evaluate both individual (one-to-one) and group (one-to-many) relationships.\
"""

# The consolidation step runs once over every object's findings so that
# duplicates spanning two objects collapse in a single pass.
INTEGRATOR_STEP1_HEADER_TEMPLATE = """\
Description for {object_name}: {attribute_findings}
Relationships of {object_name} with other objects ({other_objects}): {relation_findings}\
"""

INTEGRATOR_STEP1_TASK = """\


Task: Review and analyze the detailed Description and Relationships of each \
object listed above. Summarize all unreasonable, contradictory, or physically \
impossible details, while consolidating similar or repeated anomalies into a \
comprehensive report.

Focus Areas:
1. Contradictory Details: Identify conflicting statements or relationships (e.g., "floating" vs. "resting on the ground").
2. Unnatural Behaviors: Highlight features or actions implausible in real-world settings.
3. Spatial Inconsistencies: Detect impossible locations or orientations for the objects.
4. Illogical Physical Properties: Point out violations of physics or reality (e.g., water flowing upward).

Instructions:
- Consolidate similar anomalies from both Description and Relationships.
- Center each finding around the object involved and its interactions with other objects.

Output Format (structured list):
1. Observed Phenomenon: Brief summary of the inconsistency
   - Sources: Indicate if the issue comes from the Description, Relationships, or Both.
   - Details: Provide specific observations related to the anomaly.
   - Explanation: Justify why the phenomenon is contradictory, unnatural, or implausible.

Deliverables:
- Consolidate and summarize issues across Description and Relationships.
- Output only the structured list in the specified format.\
"""

INTEGRATOR_STEP2_TEMPLATE = """\
Anomalies: {findings}

Task: Summarize and categorize all detected unnatural, illogical, or \
inconsistent phenomena in the image.

For each issue, provide:
1. Object Name: Clearly identify the object(s) involved.
2. Phenomenon: Describe the unnatural or illogical aspect of the object(s).
3. Explanation: Explain why this phenomenon is unrealistic, referencing real-world physics, anatomy, perspective, or common sense.

Output Format:
Provide a structured list using the format below:

Example Output:
1. Object Name: Tree
   Phenomenon: The tree trunk bends at an impossible 90-degree angle.
   Explanation: Real trees cannot grow in this shape due to gravitational constraints.
2. Object Name: Dog
   Phenomenon: The dog has three tails, one of which is semi-transparent.
   Explanation: This is anatomically impossible for dogs.

Instructions:
- Only output the list in the specified format.
- Ensure each anomaly is clearly tied to a specific object.
- Exclude unrelated content or commentary.\
"""

FORMATTER_TEMPLATE = """\
The following are a list of pre-selected anomalies:
{anomalies}

Task: From the list above, identify and summarize the visually prominent and \
semantically significant anomalies observed in the image.

You must analyze, consolidate, and explain each anomaly in a way that is \
logical, detailed, and persuasive, as if communicating to both experts and non-experts.

Instructions:
1. Merge Similar or Redundant Anomalies
   - Group phenomena sharing a common cause, concept, or visual effect.
   - Avoid repetition by merging entries describing the same core issue.
2. Resolve Contradictions Thoughtfully
   - If descriptions conflict, reconcile them using physical laws, biological plausibility, and visual logic.
   - Summarize both viewpoints if both are partially valid.
3. Filter Out Non-Visible or Insignificant Issues
   - Omit anomalies that are not visually apparent (e.g., minor texture noise).
   - Focus on what is clearly and prominently visible.
4. Justify with Real-World Logic
   - Support each anomaly with logical, physical, anatomical, or functional reasoning.
5. Do Not Parrot the Input
   - Rephrase and reinterpret anomalies based on visual evidence and contextual understanding.
6. Ensure Coverage
   - All input anomalies must be included, either directly or through consolidation.

Output Format: Write a numbered list. For each entry, use the following structure:

@1. **Name**: [Descriptive title of the anomaly]
- **Observed Phenomenon**:
   - Describe what is visibly wrong in visual terms.
   - Include positions, shapes, textures, or contextual oddities.
   - Ensure clarity without needing to see the image.
- **Reasoning**:
   - Explain why this is implausible.
   - Support with physical laws, anatomy, real-world logic, or social context.
- **Severity Score**: [0-100; 0 = fully unrealistic, 100 = fully realistic]

Final Notes:
- Output only the structured list in the format above.
- Think critically. Be precise, complete, and persuasive.
- Provide a human-understandable summary of core visual anomalies in the image.\
"""


def perceiver_prompt(pass_index: int, total_passes: int) -> str:
    prompt = OBJECT_PERCEIVER_PROMPT
    if total_passes > 1:
        prompt += PERCEIVER_PASS_SUFFIX.format(index=pass_index, total=total_passes)
    return prompt


def attribute_step1_prompt(object_name: str) -> str:
    return ATTRIBUTE_STEP1_TEMPLATE.format(object_name=object_name)


def attribute_step2_prompt(object_name: str, analysis: str) -> str:
    return ATTRIBUTE_STEP2_TEMPLATE.format(object_name=object_name, analysis=analysis)


def relation_step1_prompt(
    object_name: str, other_objects: Sequence[str], attribute_context: str
) -> str:
    return RELATION_STEP1_TEMPLATE.format(
        object_name=object_name,
        other_objects=", ".join(other_objects),
        attribute_context=attribute_context or "(none)",
    )


def relation_step2_prompt(
    object_name: str, other_objects: Sequence[str], analysis: str
) -> str:
    return RELATION_STEP2_TEMPLATE.format(
        object_name=object_name,
        other_objects=", ".join(other_objects),
        analysis=analysis,
    )


def integrator_step1_prompt(sections: Sequence[dict]) -> str:
    """Assemble the global consolidation request from per-object sections.

    Each section is ``{"object_name", "other_objects", "attribute_findings",
    "relation_findings"}``.
    """
    rendered = []
    for section in sections:
        rendered.append(
            INTEGRATOR_STEP1_HEADER_TEMPLATE.format(
                object_name=section["object_name"],
                other_objects=", ".join(section["other_objects"]),
                attribute_findings=section["attribute_findings"] or "(none)",
                relation_findings=section["relation_findings"] or "(none)",
            )
        )
    return "\n\n".join(rendered) + INTEGRATOR_STEP1_TASK


def integrator_step2_prompt(findings: str) -> str:
    return INTEGRATOR_STEP2_TEMPLATE.format(findings=findings)


def formatter_prompt(anomalies: str) -> str:
    return FORMATTER_TEMPLATE.format(anomalies=anomalies)
