"""Template families and generators shared by the test modules."""

from __future__ import annotations

import numpy as np

from subarch.arch import (
    ArchParamVar,
    ArchTemplate,
    Constraint,
    activation,
    attention,
    dense,
    enumerate_space,
    matmul,
    scale,
    softmax,
)
from subarch.poly import parse


def attention_family(p: int = 3, H=(2, 4), J=(1,), A=(1, 2)):
    """Attention block, linear layer, sigmoid; A must divide H."""
    layers = (attention("p", "H", "A"), softmax("H"), dense("H", "J"), activation("sigmoid", "J"))
    t = ArchTemplate(layers, p, variables=("H", "p", "J", "A"))
    variables = [ArchParamVar("H", "dimension", tuple(H)), ArchParamVar("p", "other", (p,)),
                 ArchParamVar("J", "dimension", tuple(J)), ArchParamVar("A", "divisor", tuple(A))]
    space = enumerate_space(variables, [Constraint.divides(parse("A"), parse("H"))])
    return t, space


def abc_chain(act: str, p: int, width="h", segment_out="sigmoid"):
    """dense(p->h), act | dense(h->h), act (repeated n times) | dense(h->1), sigmoid."""
    return (
        dense(p, width, segment="A"), activation(act, width, segment="A"),
        dense(width, width, segment="B"), activation(act, width, segment="B"),
        dense(width, 1, segment="C"), activation(segment_out, 1, segment="C"),
    )


def depth_family(act: str, h: int, depths, p: int = 2):
    t = ArchTemplate(abc_chain(act, p, width=h), p, variables=("n",), depth_var="n")
    return t, enumerate_space([ArchParamVar("n", "depth", tuple(depths))], [])


def width_family(act: str, widths, p: int = 2, depth: int = 1):
    t = ArchTemplate(abc_chain(act, p), p, variables=("h", "n"), depth_var="n")
    space = enumerate_space([ArchParamVar("h", "dimension", tuple(widths)),
                             ArchParamVar("n", "depth", (depth,))], [])
    return t, space


def grid_family(act: str, widths, depths, p: int = 2):
    t = ArchTemplate(abc_chain(act, p), p, variables=("h", "n"), depth_var="n")
    space = enumerate_space([ArchParamVar("h", "dimension", tuple(widths)),
                             ArchParamVar("n", "depth", tuple(depths))], [])
    return t, space


# -- random templates covering every layer kind ----------------------------------

RANDOM_VARS = ("a", "b", "c")
_DIMS = ("a", "b", "a*b", "2", "a + 1", "b + c")


def random_template(rng: np.random.Generator, max_blocks: int = 4, kinds=None):
    """A random chain ending in dense(->1) and a sigmoid, over variables a, b, c.

    Returns ``(template, space, kinds_used)``.
    """
    p = int(rng.integers(1, 4))
    kinds = kinds or ("dense", "activation", "softmax", "scale", "matmul", "attention")
    layers, cur, used = [], str(p), set()
    for _ in range(int(rng.integers(1, max_blocks + 1))):
        kind = str(rng.choice(kinds))
        used.add(kind)
        if kind == "dense":
            out = str(rng.choice(_DIMS))
            layers.append(dense(cur, out, bias=bool(rng.integers(2))))
            cur = out
        elif kind == "activation":
            layers.append(activation(str(rng.choice(["sigmoid", "tanh", "relu"])), cur))
        elif kind == "softmax":
            layers.append(softmax(cur))
        elif kind == "scale":
            layers.append(scale(cur, int(rng.integers(1, 4)), str(rng.choice(["1", "a", "b + 1"]))))
        elif kind == "matmul":
            layers.append(dense(cur, "c*a"))
            layers.append(matmul("c", "a", "b"))
            cur = "c*b"
        else:
            layers.append(attention(cur, "a*c", "c", bias=bool(rng.integers(2))))
            cur = "a*c"
    layers.append(dense(cur, 1, bias=bool(rng.integers(2))))
    layers.append(activation("sigmoid", 1))
    t = ArchTemplate(tuple(layers), p, variables=RANDOM_VARS)
    space = enumerate_space([ArchParamVar("a", "dimension", (1, 2, 3)),
                             ArchParamVar("b", "dimension", (1, 2)),
                             ArchParamVar("c", "dimension", (1, 2))], [])
    return t, space, used


def random_abc_template(rng: np.random.Generator):
    """A random A/B/C dense family with a width variable h and depth n."""
    act = str(rng.choice(["sigmoid", "tanh", "relu"]))
    p = int(rng.integers(1, 4))
    t = ArchTemplate(abc_chain(act, p), p, variables=("h", "n"), depth_var="n")
    space = enumerate_space([ArchParamVar("h", "dimension", (1, 2, 3, 4)),
                             ArchParamVar("n", "depth", (1, 2, 3))], [])
    return t, space
