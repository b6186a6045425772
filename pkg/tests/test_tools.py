"""Tool pipeline: design proposals, selection, synthesis gates, critique."""

from __future__ import annotations

import json
from html.parser import HTMLParser

import pytest

from jitsteer.context import Objective, ingest
from jitsteer.errors import CodegenFailure, ToolValidationFailure
from jitsteer.gateway import ProviderGateway, Role, RoleConfig
from jitsteer.scripted import ScriptedProvider
from jitsteer.tools import (
    GeneratedTool,
    ToolDesign,
    check_helper_closure,
    check_preservation,
    check_tag_balance,
    code_hash,
    critique_and_refine,
    extract_class_tokens,
    extract_id_tokens,
    propose_tools,
    select_tool,
    strip_code_fences,
    synthesize_ui,
)

SNAPSHOT = ingest(text="Mocking up a system architecture figure in a design tool…")
OBJECTIVE = Objective(
    "Create clear visual representations",
    "Turn the architecture into a readable diagram.", 9,
)

SCENARIO_TOOLS = json.dumps({"tools": [
    {"name": "Component Relationship Diagram Builder",
     "description": "Drag-and-drop tool to visualize connections between components.",
     "input_type": "component list", "output_type": "diagram",
     "interface_features": ["drag-and-drop canvas"],
     "expected_user_behavior": ["place blocks"],
     "design_guidelines": "architecture diagrams"},
    {"name": "Architecture Template Gallery",
     "description": "Gallery of system architecture templates.",
     "input_type": "selection", "output_type": "template",
     "interface_features": ["template grid"],
     "expected_user_behavior": ["browse"],
     "design_guidelines": "starting from a blank canvas"},
    {"name": "Component Style Synchronizer",
     "description": "Unify styles, colors and formatting across a diagram.",
     "input_type": "diagram", "output_type": "styled diagram",
     "interface_features": ["style picker"],
     "expected_user_behavior": ["apply styles"],
     "design_guidelines": "inconsistent visuals"},
]})

MINIMAL_TOOL = """<div id="tool-root" class="panel main">
  <button id="run-btn" class="action">Ask the expert</button>
  <div id="result" class="output"></div>
  <script>
    const button = document.getElementById('run-btn');
    button.addEventListener('click', async () => {
      const reply = await promptExpert('0', 'Review the diagram');
      document.getElementById('result').textContent = reply;
    });
  </script>
</div>"""


def gateway_for(role_providers):
    configs = {}
    providers = {}
    for role, provider in role_providers.items():
        configs[role] = RoleConfig(provider="scripted",
                                   strictness=provider.transcript.strictness)
        providers[role] = provider
    return ProviderGateway(configs, providers)


# --- oracle: independent tag-balance checker over stdlib HTMLParser -----------


class _BalanceOracle(HTMLParser):
    VOID = {"area", "base", "br", "col", "embed", "hr", "img", "input",
            "link", "meta", "param", "source", "track", "wbr"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.stack = []
        self.balanced = True

    def handle_starttag(self, tag, attrs):
        if tag not in self.VOID:
            self.stack.append(tag)

    def handle_startendtag(self, tag, attrs):
        pass

    def handle_endtag(self, tag):
        if not self.stack or self.stack[-1] != tag:
            self.balanced = False
        else:
            self.stack.pop()


def oracle_is_balanced(markup: str) -> bool:
    parser = _BalanceOracle()
    parser.feed(markup)
    parser.close()
    return parser.balanced and not parser.stack


BALANCE_CASES = [
    ("<div><p>x</p></div>", True),
    ("<div><p>x</div>", False),
    ("<div><br><img src='x'></div>", True),
    ("<div>", False),
    ("</div>", False),
    ("<div><span>a</span><span>b</span></div>", True),
    (MINIMAL_TOOL, True),
    ("<div><script>if (a < b) { go() }</script></div>", True),
    ("<!-- <div> --><p>x</p>", True),
]


@pytest.mark.parametrize("markup,expected", BALANCE_CASES)
def test_tag_balance_matches_independent_oracle(markup, expected):
    assert oracle_is_balanced(markup) == expected
    assert (check_tag_balance(markup) == []) == expected


def test_helper_closure_accepts_contract_calls():
    assert check_helper_closure(MINIMAL_TOOL) == []


def test_helper_closure_flags_undeclared_helper():
    code = MINIMAL_TOOL.replace("promptExpert('0', 'Review the diagram')",
                                "fetchData('x')")
    findings = check_helper_closure(code)
    assert any("fetchData" in f for f in findings)


def test_helper_closure_bans_direct_network_access():
    code = "<div><script>fetch('https://x.test')</script></div>"
    findings = check_helper_closure(code)
    assert any("network" in f or "fetch" in f for f in findings)


def test_helper_closure_allows_locally_declared_functions():
    code = """<div><script>
    function renderRow(item) { return item; }
    const items = [1, 2].map(i => renderRow(i));
    promptGeneral('hello');
    </script></div>"""
    assert check_helper_closure(code) == []


def test_strip_code_fences():
    fenced = "```html\n<div></div>\n```"
    assert strip_code_fences(fenced) == "<div></div>"
    assert strip_code_fences("<div></div>") == "<div></div>"


def test_token_extraction():
    assert extract_id_tokens(MINIMAL_TOOL) == {"tool-root", "run-btn", "result"}
    assert extract_class_tokens(MINIMAL_TOOL) == {"panel", "main", "action", "output"}


def test_preservation_detects_dropped_id_and_class():
    after = MINIMAL_TOOL.replace(' id="result" class="output"', "")
    findings = check_preservation(MINIMAL_TOOL, after)
    assert any("result" in f for f in findings)
    assert any("output" in f for f in findings)


def test_preservation_detects_removed_helper_call():
    after = MINIMAL_TOOL.replace("await promptExpert('0', 'Review the diagram')", "'static'")
    findings = check_preservation(MINIMAL_TOOL, after)
    assert any("promptExpert" in f for f in findings)


def test_preservation_allows_additions():
    after = MINIMAL_TOOL.replace(
        "<div id=\"result\" class=\"output\"></div>",
        "<div id=\"result\" class=\"output\"></div><div id=\"spinner\" class=\"loading\">…</div>",
    )
    assert check_preservation(MINIMAL_TOOL, after) == []


# --- propose / select ----------------------------------------------------------


def test_propose_tools_scenario():
    gw = gateway_for({Role.GENERATOR: ScriptedProvider.from_responses([SCENARIO_TOOLS])})
    designs = propose_tools(SNAPSHOT, OBJECTIVE, gw, limit=3)
    assert [d.name for d in designs] == [
        "Component Relationship Diagram Builder",
        "Architecture Template Gallery",
        "Component Style Synchronizer",
    ]


def test_propose_tools_limit_one():
    single = json.dumps({"tools": [json.loads(SCENARIO_TOOLS)["tools"][0]]})
    gw = gateway_for({Role.GENERATOR: ScriptedProvider.from_responses([single])})
    assert len(propose_tools(SNAPSHOT, OBJECTIVE, gw, limit=1)) == 1


def test_propose_tools_missing_features_retry_then_error():
    broken = json.dumps({"tools": [
        {"name": "n", "description": "d", "interface_features": []},
    ]})
    gw = gateway_for({Role.GENERATOR: ScriptedProvider.from_responses([broken, broken])})
    with pytest.raises(ToolValidationFailure):
        propose_tools(SNAPSHOT, OBJECTIVE, gw)


def test_select_tool_argmax():
    designs = [ToolDesign(name=f"t{i}", description="d", interface_features=("f",))
               for i in range(3)]
    gw = gateway_for({Role.EVALUATOR: ScriptedProvider.from_responses(["0.7", "0.9", "0.8"])})
    chosen = select_tool(designs, OBJECTIVE, gw)
    assert chosen.name == "t1"
    assert chosen.relevance_score == 0.9


def test_select_tool_single_candidate_still_scored():
    designs = [ToolDesign(name="only", description="d", interface_features=("f",))]
    gw = gateway_for({Role.EVALUATOR: ScriptedProvider.from_responses(["0.3"])})
    chosen = select_tool(designs, OBJECTIVE, gw)
    assert chosen.name == "only"
    assert chosen.relevance_score == 0.3


def test_select_tool_equal_scores_take_first():
    designs = [ToolDesign(name=f"t{i}", description="d", interface_features=("f",))
               for i in range(3)]
    gw = gateway_for({Role.EVALUATOR: ScriptedProvider.from_responses(["0.5", "0.5", "0.5"])})
    assert select_tool(designs, OBJECTIVE, gw).name == "t0"


# --- synthesize_ui --------------------------------------------------------------


DESIGN = ToolDesign(
    name="Diagram Builder", description="d",
    interface_features=("canvas",), expected_user_behavior=("drag",),
)


def test_synthesize_ui_accepts_clean_component():
    gw = gateway_for({Role.UI_CODEGEN: ScriptedProvider.from_responses([MINIMAL_TOOL])})
    tool = synthesize_ui(DESIGN, (), OBJECTIVE, gw)
    assert tool.code == MINIMAL_TOOL
    assert tool.critique_history == ()


def test_synthesize_ui_strips_fences():
    gw = gateway_for({Role.UI_CODEGEN: ScriptedProvider.from_responses(
        [f"```html\n{MINIMAL_TOOL}\n```"]
    )})
    assert synthesize_ui(DESIGN, (), OBJECTIVE, gw).code == MINIMAL_TOOL


def test_synthesize_ui_gate_failure_triggers_corrective_retry():
    bad = MINIMAL_TOOL.replace("promptExpert('0', 'Review the diagram')", "fetchData('x')")
    provider = ScriptedProvider.from_responses([bad, MINIMAL_TOOL])
    gw = gateway_for({Role.UI_CODEGEN: provider})
    tool = synthesize_ui(DESIGN, (), OBJECTIVE, gw)
    assert tool.code == MINIMAL_TOOL
    assert "fetchData" in provider.requests[1]  # findings fed back


def test_synthesize_ui_unbalanced_markup_fails_after_retry():
    bad = "<div><p>unclosed</div>"
    gw = gateway_for({Role.UI_CODEGEN: ScriptedProvider.from_responses([bad, bad])})
    with pytest.raises(CodegenFailure):
        synthesize_ui(DESIGN, (), OBJECTIVE, gw)


# --- critique_and_refine ---------------------------------------------------------


def critique_reply(critique: str, code: str) -> str:
    return json.dumps({"critique": critique, "improved_html": code})


def base_tool() -> GeneratedTool:
    return GeneratedTool(design=DESIGN, code=MINIMAL_TOOL)


def test_critique_accepts_improvement_with_loading_indicator():
    improved = MINIMAL_TOOL.replace(
        '<div id="result" class="output"></div>',
        '<div id="result" class="output"></div>'
        '<div id="loading" class="spinner">Loading…</div>',
    )
    gw = gateway_for({Role.EVALUATOR: ScriptedProvider.from_responses(
        [critique_reply("add a loading indicator", improved)]
    )})
    tool = critique_and_refine(base_tool(), OBJECTIVE, gw, rounds=1)
    assert tool.code == improved
    assert len(tool.critique_history) == 1
    entry = tool.critique_history[0]
    assert entry.accepted
    assert entry.code_before_hash == code_hash(MINIMAL_TOOL)
    assert entry.code_after_hash == code_hash(improved)


def test_critique_rejects_id_deletion():
    vandalized = MINIMAL_TOOL.replace(' id="result"', "")
    gw = gateway_for({Role.EVALUATOR: ScriptedProvider.from_responses(
        [critique_reply("cleanup", vandalized)]
    )})
    tool = critique_and_refine(base_tool(), OBJECTIVE, gw, rounds=1)
    assert tool.code == MINIMAL_TOOL  # unchanged
    entry = tool.critique_history[0]
    assert not entry.accepted
    assert entry.code_after_hash == entry.code_before_hash
    assert "result" in entry.reason


def test_critique_zero_rounds_returns_unmodified():
    gw = gateway_for({Role.EVALUATOR: ScriptedProvider.from_responses([])})
    tool = critique_and_refine(base_tool(), OBJECTIVE, gw, rounds=0)
    assert tool.code == MINIMAL_TOOL
    assert tool.critique_history == ()


def test_critique_parse_failure_skips_round_with_warning():
    gw = gateway_for({Role.EVALUATOR: ScriptedProvider.from_responses(
        ["not json", "still not json", "never json"]
    )})
    warnings: list[str] = []
    tool = critique_and_refine(base_tool(), OBJECTIVE, gw, rounds=1, warnings=warnings)
    assert tool.code == MINIMAL_TOOL
    assert tool.critique_history == ()
    assert warnings


def test_critique_history_hash_chain():
    step1 = MINIMAL_TOOL.replace("</script>", "// round one\n</script>")
    step2 = step1.replace("// round one", "// round one and two")
    gw = gateway_for({Role.EVALUATOR: ScriptedProvider.from_responses([
        critique_reply("one", step1), critique_reply("two", step2),
    ])})
    tool = critique_and_refine(base_tool(), OBJECTIVE, gw, rounds=2)
    h = tool.critique_history
    assert h[0].code_after_hash == h[1].code_before_hash
    assert h[1].code_after_hash == code_hash(tool.code)


def test_end_to_end_tool_replay_is_byte_identical():
    def run() -> bytes:
        gw = gateway_for({
            Role.GENERATOR: ScriptedProvider.from_responses([SCENARIO_TOOLS]),
            Role.EVALUATOR: ScriptedProvider.from_responses(
                ["0.7", "0.9", "0.8", critique_reply("ok", MINIMAL_TOOL)]
            ),
            Role.UI_CODEGEN: ScriptedProvider.from_responses([MINIMAL_TOOL]),
        })
        designs = propose_tools(SNAPSHOT, OBJECTIVE, gw, limit=3)
        chosen = select_tool(designs, OBJECTIVE, gw)
        tool = synthesize_ui(chosen, (), OBJECTIVE, gw)
        tool = critique_and_refine(tool, OBJECTIVE, gw, rounds=1)
        return json.dumps(tool.to_dict(), sort_keys=True).encode()

    assert run() == run()
