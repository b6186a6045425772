"""Tool generation: design proposals, selection, single-file UI synthesis,
and the critique/refinement pass.

Generated code is never executed here. Static gates keep it inside the
helper contract (the only model access the sandbox will bridge) and reject
critique rounds that drop ids, class names, or helper call sites.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, replace

from .context import ContextSnapshot, Objective, context_block_text, context_image_parts
from .errors import CodegenFailure, StructureParseFailure, ToolValidationFailure
from .gateway import CompletionRequest, ProviderGateway, Role, TextPart
from .steering import eval_objective, fan_out, gen_objective, score
from .structured import StructureDescriptor
from .templates import tool_proposal_template, ui_codegen_template, ui_critique_template

logger = logging.getLogger(__name__)

HELPER_CONTRACT_VERSION = "1"
HELPER_NAMES = ("getExperts", "promptExpert", "promptEntity", "promptGeneral")

TOOL_SCHEMA_TEXT = """\
{
  "tools": [
    {
      "name": "<tool name>",
      "description": "<high-level description of the tool's function>",
      "input_type": "<what the tool takes in>",
      "output_type": "<what the tool produces>",
      "interface_features": ["<interface feature>"],
      "expected_user_behavior": ["<expected user behavior>"],
      "design_guidelines": "<problem settings where this tool is an apt solution>"
    }
  ]
}"""

TOOL_DESCRIPTOR = StructureDescriptor(
    kind="object",
    required=("tools",),
    reminder=(
        'Respond ONLY with a JSON object of the form {"tools": [...]} where every '
        "tool has name, description, input_type, output_type, interface_features, "
        "expected_user_behavior, and design_guidelines."
    ),
)

CRITIQUE_DESCRIPTOR = StructureDescriptor(
    kind="object",
    required=("critique", "improved_html"),
    reminder=(
        'Respond ONLY with a JSON object of the form {"critique": "...", '
        '"improved_html": "..."} and nothing else.'
    ),
)


@dataclass(frozen=True)
class ToolDesign:
    name: str
    description: str
    input_type: str = ""
    output_type: str = ""
    interface_features: tuple[str, ...] = ()
    expected_user_behavior: tuple[str, ...] = ()
    design_guidelines: str = ""
    relevance_score: float | None = None

    def __post_init__(self) -> None:
        if not self.name.strip() or not self.description.strip():
            raise ToolValidationFailure("tool design needs a name and a description")
        if not self.interface_features:
            raise ToolValidationFailure(
                f"tool design '{self.name}' lists no interface features"
            )

    def render(self) -> str:
        lines = [
            f"Name: {self.name}",
            f"Description: {self.description}",
            f"Input type: {self.input_type}",
            f"Output type: {self.output_type}",
            "Interface features:",
            *[f"- {f}" for f in self.interface_features],
            "Expected user behavior:",
            *[f"- {b}" for b in self.expected_user_behavior],
            f"Design guidelines: {self.design_guidelines}",
        ]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "input_type": self.input_type,
            "output_type": self.output_type,
            "interface_features": list(self.interface_features),
            "expected_user_behavior": list(self.expected_user_behavior),
            "design_guidelines": self.design_guidelines,
            "relevance_score": self.relevance_score,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ToolDesign":
        return cls(
            name=str(raw.get("name", "")),
            description=str(raw.get("description", "")),
            input_type=str(raw.get("input_type", "")),
            output_type=str(raw.get("output_type", "")),
            interface_features=tuple(str(f) for f in raw.get("interface_features", [])),
            expected_user_behavior=tuple(str(b) for b in raw.get("expected_user_behavior", [])),
            design_guidelines=str(raw.get("design_guidelines", "")),
            relevance_score=raw.get("relevance_score"),
        )


@dataclass(frozen=True)
class CritiqueRound:
    critique: str
    code_before_hash: str
    code_after_hash: str
    accepted: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "critique": self.critique,
            "code_before_hash": self.code_before_hash,
            "code_after_hash": self.code_after_hash,
            "accepted": self.accepted,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class GeneratedTool:
    design: ToolDesign
    experts: tuple = ()
    code: str = ""
    critique_history: tuple[CritiqueRound, ...] = ()
    helper_contract_version: str = HELPER_CONTRACT_VERSION

    def __post_init__(self) -> None:
        if not self.code.strip():
            raise CodegenFailure("generated tool has empty code")

    def to_dict(self) -> dict:
        return {
            "design": self.design.to_dict(),
            "experts": [e.to_dict() for e in self.experts],
            "code": self.code,
            "critique_history": [r.to_dict() for r in self.critique_history],
            "helper_contract_version": self.helper_contract_version,
        }


def code_hash(code: str) -> str:
    return hashlib.sha256(code.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Static gates
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```\s*$", re.S)

VOID_TAGS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}

_TAG_RE = re.compile(r"<(/?)([a-zA-Z][a-zA-Z0-9-]*)((?:\"[^\"]*\"|'[^']*'|[^>\"'])*)(/?)>")

_JS_KEYWORDS = {
    "if", "for", "while", "switch", "catch", "return", "function", "typeof",
    "new", "await", "async", "else", "do", "try", "delete", "void", "in",
    "of", "yield", "case", "throw", "instanceof", "get", "set", "static",
    "constructor", "super", "import", "export",
}

_JS_GLOBALS = {
    "alert", "confirm", "setTimeout", "setInterval", "clearTimeout",
    "clearInterval", "parseInt", "parseFloat", "isNaN", "isFinite", "String",
    "Number", "Boolean", "Array", "Object", "Error", "TypeError",
    "RangeError", "Promise", "Symbol", "Map", "Set", "WeakMap", "WeakSet",
    "Date", "RegExp", "JSON", "Math", "encodeURIComponent",
    "decodeURIComponent", "encodeURI", "decodeURI", "structuredClone",
    "btoa", "atob", "requestAnimationFrame", "cancelAnimationFrame",
    "queueMicrotask", "getComputedStyle",
}

_BANNED_NETWORK_RE = re.compile(
    r"\b(fetch|XMLHttpRequest|WebSocket|EventSource|importScripts)\s*\(|"
    r"\bnew\s+(XMLHttpRequest|WebSocket|EventSource)\b|"
    r"\bnavigator\.sendBeacon\b|\bimport\s*\("
)

_BARE_CALL_RE = re.compile(r"(?<![.\w$])([A-Za-z_$][\w$]*)\s*\(")

_DECLARATION_RES = (
    re.compile(r"\bfunction\s+([A-Za-z_$][\w$]*)"),
    re.compile(r"\b(?:const|let|var)\s+([A-Za-z_$][\w$]*)"),
    re.compile(r"([A-Za-z_$][\w$]*)\s*\([^()]*\)\s*\{"),
    re.compile(r"([A-Za-z_$][\w$]*)\s*[:=]\s*(?:async\s*)?(?:function\b|\()"),
)


def strip_code_fences(reply: str) -> str:
    text = reply.strip()
    m = _FENCE_RE.match(text)
    if m:
        return m.group(1).strip()
    return text


def check_tag_balance(markup: str) -> list[str]:
    """Stack check over HTML tags; script/style bodies and comments are
    skipped so JS comparisons cannot masquerade as tags."""
    findings: list[str] = []
    stack: list[str] = []
    i = 0
    n = len(markup)
    while i < n:
        if markup.startswith("<!--", i):
            end = markup.find("-->", i)
            if end == -1:
                findings.append("unterminated HTML comment")
                break
            i = end + 3
            continue
        if markup[i] == "<":
            m = _TAG_RE.match(markup, i)
            if not m:
                i += 1
                continue
            closing, name, _, self_close = m.groups()
            name = name.lower()
            i = m.end()
            if closing:
                if not stack:
                    findings.append(f"closing </{name}> with no open tag")
                elif stack[-1] != name:
                    findings.append(
                        f"closing </{name}> does not match open <{stack[-1]}>"
                    )
                    stack.pop()
                else:
                    stack.pop()
            elif self_close or name in VOID_TAGS:
                pass
            elif name in ("script", "style"):
                close = markup.find(f"</{name}", i)
                if close == -1:
                    findings.append(f"<{name}> is never closed")
                    break
                end = markup.find(">", close)
                i = n if end == -1 else end + 1
            else:
                stack.append(name)
        else:
            i += 1
    for name in stack:
        findings.append(f"<{name}> is never closed")
    return findings


def _declared_names(code: str) -> set[str]:
    names: set[str] = set()
    for pattern in _DECLARATION_RES:
        names.update(pattern.findall(code))
    return names


def check_helper_closure(code: str) -> list[str]:
    """Every helper-like bare call must be declared in the file, a standard
    global, or part of the helper contract. Direct network access is banned
    outright."""
    findings: list[str] = []
    for m in _BANNED_NETWORK_RE.finditer(code):
        findings.append(f"direct network access is not allowed: {m.group(0).strip()}")
    declared = _declared_names(code)
    flagged: set[str] = set()
    for m in _BARE_CALL_RE.finditer(code):
        name = m.group(1)
        if name in _JS_KEYWORDS or name in _JS_GLOBALS or name in HELPER_NAMES:
            continue
        if name in declared or name in flagged:
            continue
        prefix = code[:m.start()].rstrip()
        if prefix.endswith("new") or prefix.endswith("function"):
            continue
        flagged.add(name)
        findings.append(
            f"undeclared helper call '{name}(' (helper contract: {', '.join(HELPER_NAMES)})"
        )
    return findings


def run_static_gates(code: str) -> list[str]:
    if not code.strip():
        return ["empty code"]
    findings = check_tag_balance(code)
    findings.extend(check_helper_closure(code))
    if "<" not in code:
        findings.append("reply contains no markup")
    return findings


def extract_id_tokens(code: str) -> set[str]:
    tokens: set[str] = set()
    for m in re.finditer(r"""\bid\s*=\s*("([^"]*)"|'([^']*)')""", code, re.I):
        value = m.group(2) if m.group(2) is not None else m.group(3)
        if value:
            tokens.add(value)
    return tokens


def extract_class_tokens(code: str) -> set[str]:
    tokens: set[str] = set()
    for m in re.finditer(r"""\bclass\s*=\s*("([^"]*)"|'([^']*)')""", code, re.I):
        value = m.group(2) if m.group(2) is not None else m.group(3)
        tokens.update(value.split())
    return tokens


def helper_call_counts(code: str) -> dict[str, int]:
    return {
        name: len(re.findall(rf"\b{name}\s*\(", code))
        for name in HELPER_NAMES
    }


def check_preservation(before: str, after: str) -> list[str]:
    """Reject refinements that drop ids, class names, or helper call sites."""
    findings: list[str] = []
    missing_ids = extract_id_tokens(before) - extract_id_tokens(after)
    if missing_ids:
        findings.append(f"ids removed: {', '.join(sorted(missing_ids))}")
    missing_classes = extract_class_tokens(before) - extract_class_tokens(after)
    if missing_classes:
        findings.append(f"class tokens removed: {', '.join(sorted(missing_classes))}")
    before_calls = helper_call_counts(before)
    after_calls = helper_call_counts(after)
    for name, count in before_calls.items():
        if after_calls[name] < count:
            findings.append(
                f"helper call sites removed: {name} ({count} -> {after_calls[name]})"
            )
    return findings


# ---------------------------------------------------------------------------
# Pipeline operations
# ---------------------------------------------------------------------------


def propose_tools(
    snapshot: ContextSnapshot,
    objective: Objective,
    gateway: ProviderGateway,
    limit: int = 3,
) -> list[ToolDesign]:
    if limit < 1:
        raise ValueError("limit must be >= 1")
    template = gen_objective(tool_proposal_template(), objective)
    prompt = template.render({
        "context": context_block_text(snapshot),
        "limit": str(limit),
        "json_schema": TOOL_SCHEMA_TEXT,
    })
    parts = (TextPart(prompt),) + context_image_parts(snapshot)

    note = ""
    failure: ToolValidationFailure | None = None
    for _ in range(2):
        sent = parts if not note else parts + (TextPart(note),)
        result = gateway.complete(CompletionRequest(
            role=Role.GENERATOR,
            parts=sent,
            response_mode="structured",
            descriptor=TOOL_DESCRIPTOR,
        ))
        raw_tools = result.parsed.get("tools", [])  # type: ignore[union-attr]
        try:
            designs = [ToolDesign.from_dict(t) for t in raw_tools if isinstance(t, dict)]
            if not designs:
                raise ToolValidationFailure("reply contains no tool designs")
            if len(designs) > limit:
                raise ToolValidationFailure(
                    f"model returned {len(designs)} designs for limit {limit}"
                )
            return designs
        except ToolValidationFailure as exc:
            failure = exc
            note = (
                f"Return at most {limit} tools, each with a name, description, and "
                "at least one interface feature. Respond ONLY with the JSON object."
            )
    assert failure is not None
    raise failure


def select_tool(
    candidates: list[ToolDesign],
    objective: Objective,
    gateway: ProviderGateway,
) -> ToolDesign:
    """Score every design; argmax with proposal-order tiebreak."""
    if not candidates:
        raise ToolValidationFailure("no tool designs to select from")
    parallel = not gateway.requires_serial(Role.EVALUATOR)
    cap = gateway.in_flight_cap(Role.EVALUATOR)
    tasks = [(lambda d=d: score(d.render(), objective, gateway)) for d in candidates]
    outcomes = fan_out(tasks, parallel=parallel, max_workers=cap)
    best: ToolDesign | None = None
    best_score = -1.0
    for design, outcome in zip(candidates, outcomes):
        if isinstance(outcome, Exception):
            raise outcome
        value = float(outcome)  # type: ignore[arg-type]
        if value > best_score:
            best = replace(design, relevance_score=value)
            best_score = value
    assert best is not None
    return best


def _render_entities(experts: tuple) -> str:
    if not experts:
        return "(none)"
    blocks = []
    for i, expert in enumerate(experts):
        block = f"{i + 1}. {expert.name}: {expert.description}"
        if expert.background:
            block += f"\n{expert.background}"
        blocks.append(block)
    return "\n\n".join(blocks)


def synthesize_ui(
    design: ToolDesign,
    experts: tuple,
    objective: Objective,
    gateway: ProviderGateway,
    snapshot: ContextSnapshot | None = None,
) -> GeneratedTool:
    """One ui_codegen call producing a single self-contained HTML file.

    Static gate failures trigger one corrective retry with the findings
    appended; a second failure raises CodegenFailure.
    """
    template = gen_objective(ui_codegen_template(), objective)
    prompt = template.render({
        "entities": _render_entities(experts),
        "patterns": design.render(),
    })
    image_parts = context_image_parts(snapshot) if snapshot else ()

    note = ""
    findings: list[str] = []
    for _ in range(2):
        body = prompt if not note else prompt + "\n\n" + note
        result = gateway.complete(CompletionRequest(
            role=Role.UI_CODEGEN,
            parts=(TextPart(body),) + image_parts,
        ))
        code = strip_code_fences(result.raw_text)
        findings = run_static_gates(code)
        if not findings:
            return GeneratedTool(design=design, experts=experts, code=code)
        note = (
            "The previous reply failed these checks; fix them and respond ONLY "
            "with the corrected standalone HTML:\n- " + "\n- ".join(findings)
        )
    raise CodegenFailure("generated code failed static gates: " + "; ".join(findings))


def critique_and_refine(
    tool: GeneratedTool,
    objective: Objective,
    gateway: ProviderGateway,
    rounds: int = 1,
    warnings: list[str] | None = None,
) -> GeneratedTool:
    """Evaluator-driven refinement. Each accepted round must preserve every
    pre-existing id/class token and helper call site; a violating round keeps
    its critique but discards its code."""
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    current = tool
    for round_index in range(rounds):
        template = eval_objective(ui_critique_template(), objective)
        prompt = template.render({"result": current.code})
        try:
            result = gateway.complete(CompletionRequest(
                role=Role.EVALUATOR,
                parts=(TextPart(prompt),),
                response_mode="structured",
                descriptor=CRITIQUE_DESCRIPTOR,
            ))
        except StructureParseFailure as exc:
            message = f"critique round {round_index} skipped: {exc}"
            logger.warning(message)
            if warnings is not None:
                warnings.append(message)
            continue
        parsed = result.parsed
        critique = str(parsed.get("critique", ""))  # type: ignore[union-attr]
        improved = strip_code_fences(str(parsed.get("improved_html", "")))  # type: ignore[union-attr]
        before_hash = code_hash(current.code)

        problems = check_preservation(current.code, improved)
        problems.extend(run_static_gates(improved))
        if problems:
            entry = CritiqueRound(
                critique=critique,
                code_before_hash=before_hash,
                code_after_hash=before_hash,
                accepted=False,
                reason="; ".join(problems),
            )
            current = replace(
                current, critique_history=current.critique_history + (entry,)
            )
            continue
        entry = CritiqueRound(
            critique=critique,
            code_before_hash=before_hash,
            code_after_hash=code_hash(improved),
            accepted=True,
        )
        current = replace(
            current,
            code=improved,
            critique_history=current.critique_history + (entry,),
        )
    return current
