"""Prompt templates with explicit placeholder discipline.

A placeholder is a brace-wrapped dotted identifier such as {context} or
{goal.name}. Template bodies may contain literal braces (JSON examples and
the like) as long as they do not form a placeholder token; text that *could*
form one must be embedded escaped (braces doubled). Values substituted at
render time are inserted verbatim and never re-parsed, so a single render
pass is all there is.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Callable, Mapping

from .errors import TemplateError

# One token stream: escaped braces are consumed atomically, so nothing
# inside them can ever read as a placeholder.
_TOKEN_RE = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_.]*)\}")


def escape_braces(text: str) -> str:
    """Double every brace so embedded text can never introduce a placeholder."""
    return text.replace("{", "{{").replace("}", "}}")


def find_placeholders(body: str) -> set[str]:
    """Placeholder tokens in a body, ignoring escaped (doubled) braces."""
    return {m.group(1) for m in _TOKEN_RE.finditer(body) if m.group(1)}


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    placeholder_names: frozenset[str]
    system_text: str = ""
    objective_applied: bool = False

    def __post_init__(self) -> None:
        found = find_placeholders(self.body)
        undeclared = found - set(self.placeholder_names)
        if undeclared:
            raise TemplateError(
                f"template '{self.template_id}' has undeclared placeholders: "
                + ", ".join(sorted(undeclared))
            )

    @classmethod
    def from_body(cls, template_id: str, body: str, system_text: str = "") -> "PromptTemplate":
        return cls(
            template_id=template_id,
            body=body,
            placeholder_names=frozenset(find_placeholders(body)),
            system_text=system_text,
        )

    def fill(self, values: Mapping[str, str], *, escape: bool = False,
             mark_objective_applied: bool = False) -> "PromptTemplate":
        """Substitute a subset of placeholders, returning a new template.

        With escape=True, braces in the supplied values are doubled so the
        new body cannot gain placeholders (used when embedding user-shaped
        text such as objective descriptions into the template itself).
        """
        unknown = set(values) - set(self.placeholder_names)
        if unknown:
            raise TemplateError(
                f"template '{self.template_id}' has no placeholders "
                + ", ".join(sorted(unknown))
            )

        def _sub(match: re.Match[str]) -> str:
            name = match.group(1)
            if name not in values:
                return match.group(0)
            text = values[name]
            return escape_braces(text) if escape else text

        body = _substitute(self.body, _sub)
        return replace(
            self,
            body=body,
            placeholder_names=self.placeholder_names - set(values),
            objective_applied=self.objective_applied or mark_objective_applied,
        )

    def render(self, values: Mapping[str, str] | None = None) -> str:
        """Fill every remaining placeholder and return the final prompt body.

        Render is the exit point: escaped braces in the body collapse back to
        single braces, so the model sees the text as originally written.
        Values are inserted verbatim and never re-parsed.
        """
        values = dict(values or {})
        missing = set(self.placeholder_names) - set(values)
        if missing:
            raise TemplateError(
                f"template '{self.template_id}' missing values for: "
                + ", ".join(sorted(missing))
            )

        def _sub(match: re.Match[str]) -> str:
            return values.get(match.group(1), match.group(0))

        return _substitute(self.body, _sub, unescape=True)


def _substitute(body: str, sub: Callable[[re.Match], str], unescape: bool = False) -> str:
    # One left-to-right pass; substituted values are never re-scanned, and
    # escaped braces either stay doubled (template output) or collapse to
    # single braces (final render).
    def _replace(match: re.Match[str]) -> str:
        token = match.group(0)
        if token == "{{":
            return "{" if unescape else "{{"
        if token == "}}":
            return "}" if unescape else "}}"
        return sub(match)

    return _TOKEN_RE.sub(_replace, body)


# ---------------------------------------------------------------------------
# Builtin templates
# ---------------------------------------------------------------------------

INDUCTION_BODY = """\
I have the following CONTEXT that a current user is working on:

CONTEXT:
{context}

Now, employ the following reasoning framework when inferring the goals.
0. If there is an attached screenshot, use context clues to infer what application the user is viewing and what they might be doing in that application. Are they the direct author of the text, or are they viewing it as a reader? Are they actively editing the text, providing feedback, or synthesizing the content?
1. Identify the genre of what the user is working on and their stage of completion. Map the content's genre and completion stage to common goals users of these genre and stages may have and form an initial hypothesis of what the user's goals may be.
2. Infer who the intended audience of the content is. Based on how you think the user wants their audience to receive their content, update your goal hypothesis.
3. Think about what an ideal version of the user's current content would look like and identify what is missing. Then, use this to update your goal hypothesis.
4. Simulate what the user's reaction would be to possible tools generated (e.g. grammar checker, style reviser, high-level structure advisor, new content generator, etc.). Use the user's responses to update your goal hypothesis.

For each step in your reasoning, briefly write out your thought process, your current hypothesis of the goals as a numbered list, and what the updated list would be after your reasoning.

After you are done, finalize the {limit} most important goals. Make sure these goals are distinct and have minimal overlap.

Please respond ONLY with a JSON that matches the following json_schema including your reasoning and the new goals along with their relative weight (1-10). The weight is the estimated *importance* of the goal to the user, based on the provided context (1 = not important, 5 = moderately important, 10 = very important)
{json_schema}
"""

EXPERT_PROPOSAL_BODY = """\
I have the following CONTEXT and GOALS for creating a helpful tool:

CONTEXT:
{context}

GOALS:
{goals}

What {limit} entities (experts, perspectives, concepts, or knowledge areas) would be most helpful for accomplishing these goals? Suggest entities that would provide diverse and valuable perspectives.

Please respond ONLY with a JSON that matches the following json_schema:
{json_schema}
"""

EXPERT_BACKGROUND_BODY = """\
Find recent information about the following ENTITY that would be relevant for the following GOALS:

GOALS:
{goals_text}

ENTITY NAME: {entity_name}

ENTITY DESCRIPTION:
{entity_desc}

Please search for additional background information on this ENTITY and expand the description with more detailed context.
For example, use web search to find:
1. Recent publications, talks, or projects by this entity
2. Details on specific expertise areas and methodologies
3. Notable quotes or key ideas from this entity

Respond ONLY with the additional background information, nothing else. Produce at most 2-3 paragraphs.
"""

TOOL_PROPOSAL_BODY = """\
I have the following CONTEXT and GOALS for creating a helpful tool:

CONTEXT:
{context}

GOALS:
{goals}

What {limit} design patterns would be most helpful for accomplishing these goals?

Please respond ONLY with a JSON that matches the following json_schema:
{json_schema}
"""

RELEVANCE_EVAL_BODY = """\
I have the following GOAL:
Name: {goal.name}
Description: {goal.description}

I have the following COMPONENT:
{component_description}

How relevant and helpful is this COMPONENT for accomplishing the GOAL?
Please respond with a score between 0 and 1, where 0 means not relevant and 1 means fully relevant.

ONLY respond with the numeric score, no other text.
"""

UI_CODEGEN_BODY = """\
I would like to generate a tool that combines the following entities and patterns:
ENTITIES:
{entities}

PATTERNS:
{patterns}

GOALS:
{goals}

Please generate the tool as a web interface that supports user interaction.

As you generate the tool, keep in mind these important guidelines:
- Please design UI layouts that are easy to use and understandable.
- Please format the LLM outputs of the tool to improve readability.
- Please keep the textual output concise.

Instructions:
- Please ensure that this is a standalone web interface and does not require external dependencies or services.
- The tool should be able to take in user input, the provided entities, and incorporate the specification of the provided design pattern.
- Please implement the tool as a single self-contained HTML file with inline script and styles.
- The host environment provides these helper functions as globals; use them to retrieve the entities and make LLM calls rather than using hard-coded data to populate the interface:
    - getExperts() -> list of available entities
    - promptExpert(expertId, prompt) -> response text from the perspective of that entity
    - promptGeneral(prompt) -> response text for general prompts
    - Use promptExpert (alias promptEntity) instead of promptGeneral whenever you want to get a response from the perspective of a particular entity. Use promptGeneral ONLY for general prompts that don't require a specific entity.
- Do not use fetch, XMLHttpRequest, WebSocket, or any other direct network access; the helper functions are the only way to reach a model.

Respond ONLY with a renderable standalone HTML code snippet for the tool.
"""

UI_CRITIQUE_BODY = """\
I have the following HTML code snippet for a tool:
{result}

GOALS:
{goals}

You are tasked with improving the HTML UI code.
Do not change or break any core functionality of the UI. Instead, make enhancements on top of the existing structure.

Your usability improvements should focus on the following metrics:
1. Transparency - Add explicit loading indicators for background processes and give clear status feedback so users know what's happening.
2. Textual output understandability - For any UI elements that call downstream LLMs to generate text, update the associated prompts so that outputs are concise but still functional and informative.
3. Design & layout interpretability - Ensure the layout is intuitive so that users can immediately understand how the tool works and what each element does without needing external instructions.
4. Visual hierarchy - Strengthen using size, color, and position so that important elements stand out, related elements are grouped, and the UI feels clean and readable.

Do not remove existing IDs, class names, or functionality hooks. Do not alter the core workflows. Just layer usability and interpretability improvements on top.

Critical requirements for your debugging improvements for functional UI may include, but are NOT limited to:
1. ALL buttons and interactive elements are functional, with click handlers that call defined functions.
2. ANY interaction the user has with the tool that updates some component is reflected.
3. ALL inputs are wired to state via input or change listeners.

Respond ONLY with a JSON of the following format:
{{
    "critique": "<Critique of the tool>",
    "improved_html": "<Full updated HTML code snippet>"
}}
"""

FORMAT_SELECT_BODY = """\
I have the following GOAL:
Name: {goal.name}
Description: {goal.description}

I have the following CONTEXT:
{context}

Select the most relevant OUTPUT FORMAT for assisting the user with this context and goal:
- Feedback: generates feedback and a synthesis of common themes and unique perspectives.
- Brainstorm: generates brainstorming ideas based on input content.
- Line Editor: interactively generates line-level edits on user-highlighted text.

ONLY respond with the name of one format (Feedback, Brainstorm, or Line Editor), no other text.
"""

EXPERT_RUN_BODY = """\
You are responding as the following EXPERT:
Name: {expert_name}
Description: {expert_description}
Background:
{expert_background}

CONTEXT:
{context}

GOALS:
{goals}

{format_instructions}

USER INPUT:
{user_input}
"""

SYNTHESIS_BODY = """\
The following EXPERT RESPONSES were gathered for the user's content:

{sections}

GOALS:
{goals}

Write a synthesis of the common themes and unique perspectives across these expert responses. Attribute notable points to the expert who raised them. Keep the synthesis concise.
"""

FEEDBACK_GENERATOR_BODY = """\
I have the following CONTEXT a user is working on:

CONTEXT:
{context}

GOALS:
{goals}

Provide feedback or advice that helps the user with this content. Be specific and concrete; ground every suggestion in the content itself.
"""

PAIRWISE_JUDGE_BODY = """\
I have the following GOAL:
Name: {goal.name}
Description: {goal.description}

Two candidate outputs for the same task are shown below.

OPTION A:
{option_a}

OPTION B:
{option_b}

Which option better serves the GOAL? ONLY respond with the single letter A or B, no other text.
"""

FORMAT_INSTRUCTIONS = {
    "Feedback": (
        "Give feedback on the user's content from your perspective as this expert. "
        "Point to specific passages, explain why they matter, and suggest concrete improvements."
    ),
    "Brainstorm": (
        "Brainstorm ideas based on the user's content from your perspective as this expert. "
        "Respond with a list of distinct, concrete ideas, one per line."
    ),
    "LineEditor": (
        "Propose line-level edits for the highlighted text from your perspective as this expert. "
        "For each edit, quote the original line, give the revised line, and add a one-sentence rationale. "
        "Confine edits to the HIGHLIGHTED TEXT given in the user input."
    ),
}


def induction_template() -> PromptTemplate:
    return PromptTemplate.from_body("induction", INDUCTION_BODY)


def expert_proposal_template() -> PromptTemplate:
    return PromptTemplate.from_body("expert_proposal", EXPERT_PROPOSAL_BODY)


def expert_background_template() -> PromptTemplate:
    return PromptTemplate.from_body("expert_background", EXPERT_BACKGROUND_BODY)


def tool_proposal_template() -> PromptTemplate:
    return PromptTemplate.from_body("tool_proposal", TOOL_PROPOSAL_BODY)


def relevance_eval_template() -> PromptTemplate:
    return PromptTemplate.from_body("relevance_eval", RELEVANCE_EVAL_BODY)


def ui_codegen_template() -> PromptTemplate:
    return PromptTemplate.from_body("ui_codegen", UI_CODEGEN_BODY)


def ui_critique_template() -> PromptTemplate:
    return PromptTemplate.from_body("ui_critique", UI_CRITIQUE_BODY)


def format_select_template() -> PromptTemplate:
    return PromptTemplate.from_body("format_select", FORMAT_SELECT_BODY)


def expert_run_template() -> PromptTemplate:
    return PromptTemplate.from_body("expert_run", EXPERT_RUN_BODY)


def synthesis_template() -> PromptTemplate:
    return PromptTemplate.from_body("synthesis", SYNTHESIS_BODY)


def feedback_generator_template() -> PromptTemplate:
    return PromptTemplate.from_body("feedback_generator", FEEDBACK_GENERATOR_BODY)


def pairwise_judge_template() -> PromptTemplate:
    return PromptTemplate.from_body("pairwise_judge", PAIRWISE_JUDGE_BODY)
