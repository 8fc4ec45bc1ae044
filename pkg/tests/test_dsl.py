import pytest

from chargerig import dsl
from chargerig.dsl import (
    Diagnostic,
    DuplicateNodeId,
    DuplicateTreeName,
    TreeSyntaxError,
    exit_code,
    parse,
    serialize,
    validate,
)
from chargerig.mission import build_mission_trees

MINIMAL = """<TreeDocument format="1">
  <Behaviors>
    <Behavior name="AlwaysTrue" kind="Condition"/>
  </Behaviors>
  <Tree name="Tiny">
    <Condition id="root" name="AlwaysTrue"/>
  </Tree>
</TreeDocument>
"""


def test_minimal_document_parses_to_one_tree():
    doc = parse(MINIMAL)
    assert list(doc.trees) == ["Tiny"]
    root = doc.trees["Tiny"]
    assert root.kind == "Condition"
    assert root.behavior == "AlwaysTrue"


def test_charging_tree_has_parallel_root_with_two_children():
    doc = parse(serialize(build_mission_trees()))
    charging = doc.trees["Charging"]
    assert charging.kind == "Parallel"
    assert charging.success_threshold == "all"
    assert len(charging.children) == 2


def test_unclosed_element_reports_line():
    broken = MINIMAL.replace("  </Tree>\n", "")
    with pytest.raises(TreeSyntaxError) as err:
        parse(broken)
    assert err.value.line == 7  # mismatch is detected at the closing root tag


def test_unknown_attribute_is_an_error():
    bad = MINIMAL.replace('<Condition id="root"', '<Condition id="root" retries="3"')
    with pytest.raises(TreeSyntaxError) as err:
        parse(bad)
    assert "retries" in str(err.value)


def test_unknown_element_is_an_error():
    bad = MINIMAL.replace('<Condition id="root" name="AlwaysTrue"/>', "<Chooser/>")
    with pytest.raises(TreeSyntaxError):
        parse(bad)


def test_duplicate_node_id_rejected():
    bad = """<TreeDocument format="1">
  <Behaviors><Behavior name="T" kind="Condition"/></Behaviors>
  <Tree name="A">
    <Sequence id="dup">
      <Condition id="dup" name="T"/>
    </Sequence>
  </Tree>
</TreeDocument>
"""
    with pytest.raises(DuplicateNodeId):
        parse(bad)


def test_duplicate_tree_name_rejected():
    bad = MINIMAL.replace("</TreeDocument>", '<Tree name="Tiny"><Condition name="AlwaysTrue"/></Tree>\n</TreeDocument>')
    with pytest.raises(DuplicateTreeName):
        parse(bad)


def test_unsupported_format_version_rejected():
    with pytest.raises(TreeSyntaxError):
        parse(MINIMAL.replace('format="1"', 'format="9"'))


def test_shipped_trees_validate_clean():
    doc = build_mission_trees()
    diagnostics = validate(doc)
    assert diagnostics == []
    assert exit_code(diagnostics) == dsl.EXIT_CLEAN


def test_parallel_threshold_beyond_children_is_error():
    text = """<TreeDocument format="1">
  <Behaviors><Behavior name="T" kind="Condition"/></Behaviors>
  <Tree name="A">
    <Parallel success_threshold="3">
      <Condition name="T"/>
      <Condition name="T"/>
    </Parallel>
  </Tree>
</TreeDocument>
"""
    diagnostics = validate(parse(text))
    assert any(d.rule == "threshold-range" and d.severity == "error" for d in diagnostics)
    assert exit_code(diagnostics) == dsl.EXIT_ERRORS


def test_memory_sequence_under_charging_parallel_warns():
    doc = build_mission_trees()
    text = serialize(doc)
    # wrap a leaf of the charging tree in a memory sequence
    needle = '<Action id="pop" name="PopHole" ports="mission=mission,out=current_hole"/>'
    assert needle in text
    replacement = (
        '<Sequence id="mem_wrap" memory="true">'
        + needle
        + "</Sequence>"
    )
    mutated = parse(text.replace(needle, replacement))
    diagnostics = validate(mutated)
    warnings = [d for d in diagnostics if d.rule == "memory-under-parallel"]
    assert len(warnings) == 1
    assert warnings[0].node_id == "mem_wrap"
    assert exit_code(diagnostics) == dsl.EXIT_WARNINGS


def test_goal_condition_after_action_warns():
    text = """<TreeDocument format="1">
  <Behaviors>
    <Behavior name="T" kind="Condition"/>
    <Behavior name="A" kind="Action"/>
  </Behaviors>
  <Tree name="A">
    <Fallback>
      <Action name="A"/>
      <Condition name="T"/>
    </Fallback>
  </Tree>
</TreeDocument>
"""
    diagnostics = validate(parse(text))
    assert any(d.rule == "goal-condition-first" for d in diagnostics)


def test_unknown_behavior_and_kind_mismatch_are_errors():
    text = """<TreeDocument format="1">
  <Behaviors><Behavior name="T" kind="Condition"/></Behaviors>
  <Tree name="A">
    <Sequence>
      <Action name="T"/>
      <Condition name="Ghost"/>
    </Sequence>
  </Tree>
</TreeDocument>
"""
    diagnostics = validate(parse(text))
    rules = {d.rule for d in diagnostics}
    assert "behavior-kind" in rules
    assert "unknown-behavior" in rules


def test_condition_with_children_is_error():
    text = """<TreeDocument format="1">
  <Behaviors><Behavior name="T" kind="Condition"/></Behaviors>
  <Tree name="A">
    <Condition name="T">
      <Condition name="T" id="inner"/>
    </Condition>
  </Tree>
</TreeDocument>
"""
    diagnostics = validate(parse(text))
    assert any(d.rule == "leaf-children" for d in diagnostics)


def test_port_binding_against_undeclared_or_mistyped_key():
    text = """<TreeDocument format="1">
  <Blackboard>
    <Key name="flagkey" type="flag"/>
  </Blackboard>
  <Behaviors>
    <Behavior name="W" kind="Action" ports="out:hole"/>
  </Behaviors>
  <Tree name="A">
    <Sequence>
      <Action name="W" ports="out=flagkey"/>
      <Action name="W" ports="out=nowhere"/>
      <Action name="W"/>
    </Sequence>
  </Tree>
</TreeDocument>
"""
    diagnostics = validate(parse(text))
    rules = sorted(d.rule for d in diagnostics)
    assert rules == ["missing-port", "port-type", "undeclared-key"]


def test_round_trip_identity_on_minimal_and_corpus():
    for text in (MINIMAL, serialize(build_mission_trees())):
        doc = parse(text)
        assert parse(serialize(doc)) == doc


def test_round_trip_preserves_child_order():
    doc = build_mission_trees()
    reparsed = parse(serialize(doc))
    for name, tree in doc.trees.items():
        got = [n.node_id for n in reparsed.trees[name].walk()]
        want = [n.node_id for n in tree.walk()]
        assert got == want


def test_diagnostics_carry_location():
    text = """<TreeDocument format="1">
  <Behaviors><Behavior name="T" kind="Condition"/></Behaviors>
  <Tree name="A">
    <Condition name="Ghost" id="g"/>
  </Tree>
</TreeDocument>
"""
    diagnostics = validate(parse(text))
    assert diagnostics and all(d.node_id and d.line > 0 for d in diagnostics)
    assert isinstance(str(diagnostics[0]), str)


def test_diagnostic_str_is_informative():
    d = Diagnostic("error", "x-rule", "boom", tree="T", node_id="n1", line=3, column=5)
    as_text = str(d)
    assert "x-rule" in as_text and "T:n1" in as_text and "line 3" in as_text
