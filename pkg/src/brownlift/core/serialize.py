"""JSON round trip for operator expression trees.

Node tags match the class names.  ``{"ref": name}`` refers to a previously
defined operator in a scenario namespace.
"""
from __future__ import annotations

from .indexsets import StructuralError, index_from_json, indexmap_from_json, indexset_from_json
from .operators import (Add, Adjoint, BilateralShift, BlockMatrix, Compose, DenseMatrix,
                        Diagonal, DirectSum, Identity, Inclusion, Operator, ScalarMul, Tensor,
                        UnilateralShift, ZeroOp)
from .weights import WeightSequence

SCHEMA = "brownlift.operator/1"


def _complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    return complex(x)


def operator_to_json(op: Operator) -> dict:
    return op.to_json()


def operator_from_json(data, namespace: dict | None = None, path: str = "$") -> Operator:
    if not isinstance(data, dict):
        raise StructuralError(f"{path}: operator must be an object")
    if "ref" in data:
        name = data["ref"]
        if namespace is None or name not in namespace:
            raise StructuralError(f"{path}: unresolved operator reference {name!r}")
        return namespace[name]
    node = data.get("node")

    def sub(key):
        return operator_from_json(data[key], namespace, f"{path}.{key}")

    try:
        if node == "Identity":
            return Identity(indexset_from_json(data["space"]))
        if node == "ZeroOp":
            dom = indexset_from_json(data["domain"])
            cod = indexset_from_json(data.get("codomain", data["domain"]))
            return ZeroOp(dom, cod)
        if node == "ScalarMul":
            return ScalarMul(_complex(data["c"]), sub("op"))
        if node == "UnilateralShift":
            w = data.get("weights", {"kind": "constant", "theta": 1.0})
            return UnilateralShift(WeightSequence.from_json(w))
        if node == "BilateralShift":
            return BilateralShift(float(data.get("weight", 1.0)))
        if node == "Diagonal":
            space = indexset_from_json(data["space"])
            vals = {index_from_json(i): _complex(v) for i, v in data.get("values", [])}
            factors = tuple((WeightSequence.from_json(f["weights"]), int(f["power"]),
                             int(f.get("offset", 0))) for f in data.get("factors", []))
            return Diagonal(space, vals, _complex(data.get("tail", 0.0)), factors)
        if node == "DenseMatrix":
            rows = [[_complex(x) for x in row] for row in data["matrix"]]
            dom = indexset_from_json(data["domain"]) if "domain" in data else None
            cod = indexset_from_json(data["codomain"]) if "codomain" in data else None
            return DenseMatrix(rows, dom, cod)
        if node == "Adjoint":
            return Adjoint(sub("op"))
        if node == "Compose":
            return Compose(sub("a"), sub("b"))
        if node == "Add":
            return Add(sub("a"), sub("b"))
        if node == "DirectSum":
            return DirectSum(sub("a"), sub("b"))
        if node == "Tensor":
            return Tensor(sub("a"), sub("b"))
        if node == "BlockMatrix":
            blocks = [operator_from_json(b, namespace, f"{path}.blocks[{k}]")
                      for k, b in enumerate(data["blocks"])]
            return BlockMatrix(*blocks)
        if node == "Inclusion":
            return Inclusion(indexmap_from_json(data["map"]))
    except KeyError as exc:
        raise StructuralError(f"{path}: missing field {exc.args[0]!r} for node {node!r}") from None
    if node == "Embedding":
        raise StructuralError(f"{path}: Embedding nodes are generated and cannot be read back")
    raise StructuralError(f"{path}: unknown node {node!r}")
