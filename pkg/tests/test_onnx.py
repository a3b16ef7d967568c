"""Operator extraction from hand-encoded protobuf graph files."""

from __future__ import annotations

import pytest

from airscan.findings import Severity
from airscan.packaging import MalformedProtobuf, PolicyConfig, scan_onnx_ops
from helpers import onnx_graph, onnx_model, onnx_node, pb_len, pb_string, pb_tag, pb_varint

POLICY = PolicyConfig(
    allowed_formats=frozenset({"safetensors", "onnx"}),
    blocked_formats=frozenset({"pickle"}),
    extension_allowlist=frozenset({".onnx"}),
    allowed_onnx_ops=frozenset({"MatMul", "Add", "Relu"}),
    suspicious_template_patterns=("exfiltrate",),
)


def write(tmp_path, data: bytes):
    p = tmp_path / "model.onnx"
    p.write_bytes(data)
    return p


def test_allowlisted_ops_are_clean(tmp_path):
    model = onnx_model(onnx_graph([onnx_node("MatMul"), onnx_node("Add")]))
    ops, findings = scan_onnx_ops(write(tmp_path, model), POLICY)
    assert ops == ["Add", "MatMul"]
    assert findings == []


def test_op_outside_allowlist_is_critical(tmp_path):
    model = onnx_model(onnx_graph([onnx_node("MatMul"), onnx_node("PyFunc")]))
    ops, findings = scan_onnx_ops(write(tmp_path, model), POLICY)
    assert "PyFunc" in ops
    assert [f.id for f in findings] == ["onnx-op-not-allowlisted"]
    f = findings[0]
    assert f.severity is Severity.CRITICAL
    assert f.threat_ref == "2.3"
    assert f.evidence["op_type"] == "PyFunc"


def test_custom_domain_always_flagged(tmp_path):
    model = onnx_model(onnx_graph([onnx_node("MatMul", domain="com.custom")]))
    _, findings = scan_onnx_ops(write(tmp_path, model), POLICY)
    assert [f.id for f in findings] == ["onnx-custom-domain"]
    assert findings[0].evidence["domain"] == "com.custom"


def test_subgraph_ops_found(tmp_path):
    inner = onnx_graph([onnx_node("PyFunc")])
    outer = onnx_graph([onnx_node("Add", attrs=[pb_len(6, inner)])])
    ops, findings = scan_onnx_ops(write(tmp_path, onnx_model(outer)), POLICY)
    assert set(ops) == {"Add", "PyFunc"}
    assert [f.id for f in findings] == ["onnx-op-not-allowlisted"]


def test_repeated_subgraphs_field_found(tmp_path):
    inner = onnx_graph([onnx_node("Loop")])
    outer = onnx_graph([onnx_node("Relu", attrs=[pb_len(11, inner)])])
    ops, _ = scan_onnx_ops(write(tmp_path, onnx_model(outer)), POLICY)
    assert "Loop" in ops


def test_unrelated_fields_are_skipped(tmp_path):
    extras = (
        pb_string(2, "producer")            # len-delimited string field
        + pb_tag(3, 0) + pb_varint(77)       # varint field
        + pb_tag(9, 1) + b"\x00" * 8         # 64-bit field
        + pb_tag(10, 5) + b"\x00" * 4        # 32-bit field
    )
    model = onnx_model(onnx_graph([onnx_node("Add")]), extra_fields=extras)
    ops, findings = scan_onnx_ops(write(tmp_path, model), POLICY)
    assert ops == ["Add"]
    assert findings == []


def test_zero_length_file(tmp_path):
    with pytest.raises(MalformedProtobuf) as exc:
        scan_onnx_ops(write(tmp_path, b""), POLICY)
    assert exc.value.offset == 0


def test_truncated_length_delimited_field(tmp_path):
    data = pb_tag(7, 2) + pb_varint(100) + b"short"
    with pytest.raises(MalformedProtobuf):
        scan_onnx_ops(write(tmp_path, data), POLICY)


def test_overlong_varint_rejected(tmp_path):
    data = b"\xff" * 11
    with pytest.raises(MalformedProtobuf):
        scan_onnx_ops(write(tmp_path, data), POLICY)


def test_group_wire_type_rejected(tmp_path):
    data = pb_tag(7, 3)
    with pytest.raises(MalformedProtobuf):
        scan_onnx_ops(write(tmp_path, data), POLICY)
